# src/features/augment.py
"""
Training augmentations
Additive white noise and synthetic-RIR reverberation act on waveforms,
frequency and time masking act on filter-bank features. augment() picks
one of the four uniformly at random per call.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.signal import fftconvolve

from config.logger import AASVLogger
from config.settings import AUGMENT_CONFIG
from src.errors import ConfigError
from src.features.filterbank import DEFAULT_FILTERBANK, FilterbankConfig, Waveform, logmel
from src.tensor_core.tensor import DTYPE

logger = AASVLogger.get_logger(__name__)

AUGMENTATIONS = ("noise", "reverb", "freq_mask", "time_mask")


@dataclass(frozen=True)
class AugmentConfig:
    snr_db_range: Tuple[float, float] = (5.0, 20.0)
    rir_decay_ms: float = 150.0
    freq_mask_max: int = 10
    time_mask_max: int = 20
    mask_value: float = 0.0

    def __post_init__(self):
        low, high = self.snr_db_range
        if not low < high:
            raise ConfigError(f"snr_db_range must be non-degenerate, got {self.snr_db_range}")
        if self.rir_decay_ms <= 0:
            raise ConfigError(f"rir_decay_ms must be positive, got {self.rir_decay_ms}")
        if self.freq_mask_max < 1 or self.time_mask_max < 1:
            raise ConfigError("mask maxima must be at least 1")

    @classmethod
    def from_dict(cls, cfg: dict) -> "AugmentConfig":
        return cls(
            snr_db_range=tuple(cfg.get("snr_db_range", (5.0, 20.0))),
            rir_decay_ms=float(cfg.get("rir_decay_ms", 150.0)),
            freq_mask_max=int(cfg.get("freq_mask_max", 10)),
            time_mask_max=int(cfg.get("time_mask_max", 20)),
            mask_value=float(cfg.get("mask_value", 0.0)),
        )


DEFAULT_AUGMENT = AugmentConfig.from_dict(AUGMENT_CONFIG)


def add_noise(w: Waveform, snr_db: float, rng: np.random.Generator) -> Waveform:
    """Add white Gaussian noise so that signal power / noise power = 10^(snr_db / 10)"""
    if np.isinf(snr_db) and snr_db > 0:
        return Waveform(w.samples.copy(), w.sample_rate)
    signal = w.samples.astype(np.float64)
    signal_power = float(np.mean(signal ** 2))
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise = rng.standard_normal(signal.shape[0]) * np.sqrt(noise_power)
    return Waveform((signal + noise).astype(DTYPE), w.sample_rate)


def synthetic_rir(decay_ms: float, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Unit impulse followed by a noise tail decaying 60 dB over decay_ms"""
    length = max(2, int(sample_rate * decay_ms / 1000.0))
    t = np.arange(length) / sample_rate
    tail = 0.2 * rng.standard_normal(length) * np.exp(-6.908 * t / (decay_ms / 1000.0))
    tail[0] = 1.0
    return tail


def add_reverb(w: Waveform, decay_ms: float, rng: np.random.Generator) -> Waveform:
    """Convolve with a synthetic RIR, keep the original length and peak level"""
    signal = w.samples.astype(np.float64)
    rir = synthetic_rir(decay_ms, w.sample_rate, rng)
    wet = fftconvolve(signal, rir, mode="full")[:signal.shape[0]]
    peak_in = np.max(np.abs(signal))
    peak_out = np.max(np.abs(wet))
    if peak_out > 0:
        wet *= peak_in / peak_out
    return Waveform(wet.astype(DTYPE), w.sample_rate)


def _mask_span(dim: int, max_width: int, rng: np.random.Generator,
               width: Optional[int]) -> Tuple[int, int]:
    if max_width >= dim:
        raise ConfigError(f"mask maximum {max_width} must be smaller than the dimension {dim}")
    if width is None:
        width = int(rng.integers(1, max_width + 1))
    elif not 0 <= width <= max_width:
        raise ConfigError(f"mask width {width} outside [0, {max_width}]")
    if width == 0:
        logger.warning("mask width 0 leaves the features unchanged")
    start = int(rng.integers(0, dim - width + 1))
    return start, width


def apply_freq_mask(f: np.ndarray, max_width: int, rng: np.random.Generator,
                    mask_value: float = 0.0, width: Optional[int] = None) -> np.ndarray:
    """Set one contiguous band of mel bins to mask_value for every frame"""
    start, width = _mask_span(f.shape[1], max_width, rng, width)
    out = f.copy()
    out[:, start:start + width] = mask_value
    return out


def apply_time_mask(f: np.ndarray, max_width: int, rng: np.random.Generator,
                    mask_value: float = 0.0, width: Optional[int] = None) -> np.ndarray:
    """Set one contiguous span of frames to mask_value"""
    start, width = _mask_span(f.shape[0], max_width, rng, width)
    out = f.copy()
    out[start:start + width, :] = mask_value
    return out


def augment(w: Waveform, rng: np.random.Generator, cfg: AugmentConfig = DEFAULT_AUGMENT,
            fb: FilterbankConfig = DEFAULT_FILTERBANK) -> Union[Waveform, np.ndarray]:
    """
    Apply one randomly selected augmentation

    Args:
        w: input waveform
        rng: random generator; every draw comes from it
        cfg: augmentation settings
        fb: filter-bank settings for the masking branches

    Returns:
        a Waveform for noise/reverb, a (frames, mels) feature matrix for masking
    """
    choice = AUGMENTATIONS[int(rng.integers(0, len(AUGMENTATIONS)))]
    if choice == "noise":
        snr = float(rng.uniform(*cfg.snr_db_range))
        return add_noise(w, snr, rng)
    if choice == "reverb":
        return add_reverb(w, cfg.rir_decay_ms, rng)
    feats = logmel(w, fb)
    if choice == "freq_mask":
        return apply_freq_mask(feats, cfg.freq_mask_max, rng, cfg.mask_value)
    # masks longer than the utterance are narrowed to what fits
    max_width = min(cfg.time_mask_max, feats.shape[0] - 1)
    if max_width < 1:
        logger.warning(f"{feats.shape[0]} frames leave no room for a time mask, features left unmasked")
        return feats
    return apply_time_mask(feats, max_width, rng, cfg.mask_value)


def augmented_features(w: Waveform, rng: np.random.Generator, cfg: AugmentConfig = DEFAULT_AUGMENT,
                       fb: FilterbankConfig = DEFAULT_FILTERBANK) -> np.ndarray:
    """augment() followed by logmel when the result is still a waveform (no cmn)"""
    out = augment(w, rng, cfg, fb)
    if isinstance(out, Waveform):
        return logmel(out, fb)
    return out
