# src/corpus/synth.py
"""
Source-filter utterance synthesis
Syllables of a harmonic source at the speaker's f0 (slow random vibrato,
spectral tilt) pass through a cascade of three second-order resonators.
Pauses separate the syllables. A noise floor is added and the result is
peak-normalized to 0.9.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.signal import get_window, lfilter

from src.corpus.speakers import SpeakerProfile
from src.errors import DataError
from src.features.filterbank import Waveform
from src.tensor_core.tensor import DTYPE

PEAK_LEVEL = 0.9
VIBRATO_DEPTH = 0.03
VIBRATO_RATE_HZ = (3.0, 6.0)
CONTENT_JITTER = 0.03
SYLLABLE_MS = (160.0, 320.0)
PAUSE_MS = (40.0, 100.0)
RAMP_MS = 15.0


@dataclass(frozen=True)
class UtteranceSpec:
    utterance_id: str
    speaker_id: str
    duration_s: float
    noise_floor_db: float
    rng_seed: int
    sample_rate: int = 16000
    harmonic_amplitude: float = 1.0

    def __post_init__(self):
        if self.duration_s < 1.0:
            raise DataError(f"{self.utterance_id}: duration must be >= 1 s, got {self.duration_s}")


def resonator_coefficients(freq: float, bandwidth: float, sample_rate: int):
    """(b, a) of a unity-DC-gain two-pole resonator"""
    c = -np.exp(-2.0 * np.pi * bandwidth / sample_rate)
    b = 2.0 * np.exp(-np.pi * bandwidth / sample_rate) * np.cos(2.0 * np.pi * freq / sample_rate)
    a = 1.0 - b - c
    return np.array([a]), np.array([1.0, -b, -c])


def apply_envelope(source: np.ndarray, resonances: Sequence[float], bandwidths: Sequence[float],
                   sample_rate: int) -> np.ndarray:
    """Filter through the cascade of resonators"""
    out = np.asarray(source, dtype=np.float64)
    for freq, bw in zip(resonances, bandwidths):
        b, a = resonator_coefficients(freq, bw, sample_rate)
        out = lfilter(b, a, out)
    return out


def harmonic_source(f0_track: np.ndarray, tilt_db_per_octave: float, sample_rate: int) -> np.ndarray:
    """Sum of harmonics of a time-varying f0; harmonics above 0.45 * sample_rate are muted"""
    phase = 2.0 * np.pi * np.cumsum(f0_track) / sample_rate
    ceiling = 0.45 * sample_rate
    out = np.zeros_like(phase)
    for k in range(1, int(ceiling / f0_track.min()) + 1):
        gain = 10.0 ** (tilt_db_per_octave * np.log2(k) / 20.0)
        out += np.where(k * f0_track < ceiling, gain * np.sin(k * phase), 0.0)
    return out


def _peak_normalize(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak == 0:
        return x
    return x * (PEAK_LEVEL / peak)


def syllable_plan(n_samples: int, sample_rate: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """(start, stop) sample spans of the voiced syllables; every syllable follows a pause"""
    per_ms = sample_rate / 1000.0
    shortest = int(2 * RAMP_MS * per_ms)
    spans, pos = [], 0
    while True:
        pos += int(rng.uniform(*PAUSE_MS) * per_ms)
        stop = min(pos + int(rng.uniform(*SYLLABLE_MS) * per_ms), n_samples)
        if stop - pos < shortest:
            return spans
        spans.append((pos, stop))
        pos = stop


def syllable_gate(length: int, ramp: int) -> np.ndarray:
    """Flat gate with raised-cosine onset and offset ramps"""
    ramp = max(1, min(ramp, length // 2))
    hann = get_window("hann", 2 * ramp, fftbins=False)
    gate = np.ones(length)
    gate[:ramp] = hann[:ramp]
    gate[length - ramp:] = hann[ramp:]
    return gate


def synth_utterance(profile: SpeakerProfile, spec: UtteranceSpec) -> Waveform:
    """
    Render one utterance; identical (profile, spec) pairs give bit-identical output

    The utterance is a train of syllables separated by short pauses. Each
    syllable draws its own small f0 and resonance offsets, so the spectral
    envelope stands out against the pauses after mean normalization.

    Args:
        profile: speaker parameters
        spec: duration, noise floor and seed of the utterance

    Returns:
        Waveform peak-normalized to 0.9 (all zeros when both the harmonic
        amplitude and the noise floor are silent)
    """
    rng = np.random.default_rng(spec.rng_seed)
    sr = spec.sample_rate
    n = int(round(spec.duration_s * sr))
    t = np.arange(n) / sr

    vib_rate = rng.uniform(*VIBRATO_RATE_HZ)
    vib_depth = rng.uniform(0.0, VIBRATO_DEPTH)
    vib_phase = rng.uniform(0.0, 2.0 * np.pi)
    f0_track = profile.f0 * (1.0 + vib_depth * np.sin(2.0 * np.pi * vib_rate * t + vib_phase))

    ramp = int(RAMP_MS * sr / 1000)
    voiced = np.zeros(n)
    for start, stop in syllable_plan(n, sr, rng):
        f0_offset = rng.uniform(-CONTENT_JITTER, CONTENT_JITTER)
        res_offset = rng.uniform(1.0 - CONTENT_JITTER, 1.0 + CONTENT_JITTER, size=3)
        source = harmonic_source(f0_track[start:stop] * (1.0 + f0_offset), profile.tilt_db_per_octave, sr)
        resonances = np.asarray(profile.resonances) * res_offset
        voiced[start:stop] = syllable_gate(stop - start, ramp) * apply_envelope(
            source, resonances, profile.bandwidths, sr)
    signal = _peak_normalize(spec.harmonic_amplitude * voiced)

    if np.isfinite(spec.noise_floor_db):
        signal = signal + rng.standard_normal(n) * 10.0 ** (spec.noise_floor_db / 20.0)
    return Waveform(_peak_normalize(signal).astype(DTYPE), sr)
