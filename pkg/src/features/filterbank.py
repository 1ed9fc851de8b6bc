# src/features/filterbank.py
"""
Log-mel filter-bank features
80 triangular mel filters over a Hamming-windowed power spectrum,
25 ms window, 10 ms hop, plus per-utterance mean normalization and
training crops.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.signal import get_window

from config.settings import FEATURE_CONFIG
from src.errors import ConfigError, DataError
from src.tensor_core.tensor import DTYPE


@dataclass
class Waveform:
    """Mono audio in [-1, 1]"""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=DTYPE).reshape(-1)

    @property
    def duration_s(self) -> float:
        return self.samples.shape[0] / self.sample_rate

    def has_signal(self) -> bool:
        return bool(np.any(self.samples != 0))


@dataclass(frozen=True)
class FilterbankConfig:
    sample_rate: int = 16000
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 80
    f_min: float = 20.0
    f_max: Optional[float] = None
    log_floor: float = 1e-10

    @classmethod
    def from_dict(cls, cfg: dict) -> "FilterbankConfig":
        return cls(**{k: cfg[k] for k in cls.__dataclass_fields__ if k in cfg})

    @property
    def window(self) -> int:
        return int(round(self.sample_rate * self.window_ms / 1000.0))

    @property
    def hop(self) -> int:
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    @property
    def upper_hz(self) -> float:
        return self.f_max if self.f_max is not None else self.sample_rate / 2.0


DEFAULT_FILTERBANK = FilterbankConfig.from_dict(FEATURE_CONFIG)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, f_min: float, f_max: float) -> np.ndarray:
    """Triangular filters, shape (n_mels, n_fft // 2 + 1), peak weight 1 at each center"""
    if not 0 <= f_min < f_max <= sample_rate / 2.0:
        raise ConfigError(f"invalid mel range [{f_min}, {f_max}] for {sample_rate} Hz")
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bins = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins[None, :] - lower) / (center - lower)
    falling = (upper - bins[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def num_frames(num_samples: int, cfg: FilterbankConfig = DEFAULT_FILTERBANK) -> int:
    """1 + floor((N - window) / hop)"""
    return 1 + (num_samples - cfg.window) // cfg.hop


def logmel(w: Waveform, cfg: FilterbankConfig = DEFAULT_FILTERBANK) -> np.ndarray:
    """
    Compute (frames, n_mels) log filter-bank energies

    Args:
        w: waveform at cfg.sample_rate
        cfg: filter-bank settings

    Returns:
        float32 matrix of log(energy + log_floor)
    """
    if w.sample_rate != cfg.sample_rate:
        raise DataError(f"waveform is {w.sample_rate} Hz, features expect {cfg.sample_rate} Hz")
    samples = w.samples.astype(np.float64)
    if samples.shape[0] < cfg.window:
        raise DataError(f"waveform too short: {samples.shape[0]} samples < window {cfg.window}")

    frames = np.lib.stride_tricks.sliding_window_view(samples, cfg.window)[::cfg.hop]
    window = get_window("hamming", cfg.window, fftbins=False)
    spectrum = np.fft.rfft(frames * window, n=cfg.n_fft, axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    fb = mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.f_min, cfg.upper_hz)
    energies = power @ fb.T
    return np.log(energies + cfg.log_floor).astype(DTYPE)


def cmn(f: np.ndarray) -> np.ndarray:
    """Subtract each mel bin's mean over frames"""
    if f.ndim != 2 or f.shape[0] < 1:
        raise DataError(f"cmn needs a (frames >= 1, mels) matrix, got {f.shape}")
    f64 = f.astype(np.float64)
    return (f64 - f64.mean(axis=0, keepdims=True)).astype(DTYPE)


def crop_or_pad(f: np.ndarray, target_frames: int, rng: np.random.Generator) -> np.ndarray:
    """
    Return exactly target_frames frames

    Longer inputs get a uniform-random contiguous crop; shorter inputs are
    repeated with wrap-around and then cut.
    """
    if target_frames <= 0:
        raise ConfigError(f"target_frames must be positive, got {target_frames}")
    if f.ndim != 2 or f.shape[0] == 0:
        raise DataError("crop_or_pad needs a non-empty feature matrix")
    frames = f.shape[0]
    if frames == target_frames:
        return f.copy()
    if frames > target_frames:
        start = int(rng.integers(0, frames - target_frames + 1))
        return f[start:start + target_frames].copy()
    return f[np.arange(target_frames) % frames]


def utterance_features(w: Waveform, cfg: FilterbankConfig = DEFAULT_FILTERBANK) -> np.ndarray:
    """Clean evaluation features: logmel followed by cmn; silent input is rejected"""
    if not w.has_signal():
        raise DataError("waveform is all zeros")
    return cmn(logmel(w, cfg))
