# src/corpus/speakers.py
"""
Synthetic speaker profiles
An adult-like and a child-like domain; child severity (1 = youngest)
shifts f0 and the resonance envelope upwards.
"""

import json
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import SEVERITY_BANDS
from src.errors import DataError

DOMAINS = ("adult", "child")

ADULT_F0_RANGE = (90.0, 180.0)
BASE_RESONANCES = (500.0, 1500.0, 2500.0)
BASE_BANDWIDTHS = (80.0, 100.0, 140.0)
RESONANCE_JITTER = 0.05
BANDWIDTH_JITTER = 0.10
TILT_RANGE_DB = (-12.0, -6.0)

F0_SEVERITY_GAIN = 0.8
RESONANCE_SEVERITY_GAIN = 0.35


@dataclass(frozen=True)
class SpeakerProfile:
    """Source-filter parameters of one synthetic speaker"""

    speaker_id: str
    domain: str
    severity: float
    f0: float
    resonances: Tuple[float, float, float]
    bandwidths: Tuple[float, float, float]
    tilt_db_per_octave: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SpeakerProfile":
        return cls(
            speaker_id=d["speaker_id"],
            domain=d["domain"],
            severity=float(d["severity"]),
            f0=float(d["f0"]),
            resonances=tuple(float(x) for x in d["resonances"]),
            bandwidths=tuple(float(x) for x in d["bandwidths"]),
            tilt_db_per_octave=float(d["tilt_db_per_octave"]),
        )

    @property
    def band(self) -> str:
        return severity_band(self.domain, self.severity)


def severity_band(domain: str, severity: float) -> str:
    """Map a speaker to its test-set column: adult or one of the child severity bands"""
    if domain == "adult":
        return "adult"
    young_low = SEVERITY_BANDS["child-young"][0]
    mid_low = SEVERITY_BANDS["child-mid"][0]
    if severity >= young_low:
        return "child-young"
    if severity >= mid_low:
        return "child-mid"
    return "child-old"


def f0_multiplier(severity: float) -> float:
    return 1.0 + F0_SEVERITY_GAIN * severity


def resonance_multiplier(severity: float) -> float:
    return 1.0 + RESONANCE_SEVERITY_GAIN * severity


def gen_speaker(domain: str, severity: float, rng: np.random.Generator,
                speaker_id: Optional[str] = None) -> SpeakerProfile:
    """
    Sample one speaker profile

    Args:
        domain: "adult" or "child"
        severity: child age knob in [0, 1]; must be 0 for adults
        rng: random generator
        speaker_id: identifier (generated from the draw when omitted)

    Returns:
        SpeakerProfile whose child parameters are the adult draw scaled by
        (1 + 0.8 s) for f0 and (1 + 0.35 s) for resonances and bandwidths
    """
    if domain not in DOMAINS:
        raise DataError(f"unknown domain '{domain}'")
    if not 0.0 <= severity <= 1.0:
        raise DataError(f"severity must lie in [0, 1], got {severity}")
    if domain == "adult" and severity != 0.0:
        raise DataError(f"adult speakers must have severity 0, got {severity}")

    # the adult-range draw is identical for both domains
    f0 = float(rng.uniform(*ADULT_F0_RANGE))
    res_jitter = rng.uniform(1.0 - RESONANCE_JITTER, 1.0 + RESONANCE_JITTER, size=3)
    bw_jitter = rng.uniform(1.0 - BANDWIDTH_JITTER, 1.0 + BANDWIDTH_JITTER, size=3)
    tilt = float(rng.uniform(*TILT_RANGE_DB))

    shift = resonance_multiplier(severity)
    resonances = tuple(float(x) for x in np.asarray(BASE_RESONANCES) * res_jitter * shift)
    bandwidths = tuple(float(x) for x in np.asarray(BASE_BANDWIDTHS) * bw_jitter * shift)
    if speaker_id is None:
        speaker_id = f"{domain}-{int(rng.integers(0, 2**31)):010d}"
    return SpeakerProfile(speaker_id, domain, float(severity), f0 * f0_multiplier(severity),
                          resonances, bandwidths, tilt)


def stratified_severities(count: int, severity_range: Tuple[float, float],
                          rng: np.random.Generator) -> List[float]:
    """Child severities spread round-robin over the severity bands, uniform within each band"""
    low, high = severity_range
    bands = []
    for name in ("child-young", "child-mid", "child-old"):
        b_low, b_high = SEVERITY_BANDS[name]
        b_low, b_high = max(b_low, low), min(b_high, high)
        if b_low < b_high:
            bands.append((b_low, b_high))
    if not bands:
        raise DataError(f"severity range {severity_range} overlaps no band")
    return [float(rng.uniform(*bands[i % len(bands)])) for i in range(count)]


def generate_speakers(adult_count: int, child_count: int, severity_range: Tuple[float, float],
                      seed: int) -> List[SpeakerProfile]:
    """Adults first, then children; each speaker drawn from its own seeded stream"""
    severity_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    severities = stratified_severities(child_count, severity_range, severity_rng)
    speakers = []
    for i in range(adult_count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, 0, i)))
        speakers.append(gen_speaker("adult", 0.0, rng, speaker_id=f"A{i:04d}"))
    for i, severity in enumerate(severities):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, 1, i)))
        speakers.append(gen_speaker("child", severity, rng, speaker_id=f"C{i:04d}"))
    return speakers


def speakers_to_jsonl(speakers: List[SpeakerProfile]) -> str:
    return "".join(json.dumps(s.to_dict(), sort_keys=True) + "\n" for s in speakers)


def speakers_from_jsonl(text: str) -> Dict[str, SpeakerProfile]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            profile = SpeakerProfile.from_dict(json.loads(line))
            out[profile.speaker_id] = profile
    return out
