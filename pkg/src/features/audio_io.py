# src/features/audio_io.py
"""
WAV reading/writing and the binary feature cache
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np
from scipy.io import wavfile

from config.logger import AASVLogger
from src.errors import DataError
from src.features.filterbank import Waveform
from src.tensor_core.tensor import DTYPE

logger = AASVLogger.get_logger(__name__)

FEATURE_MAGIC = b"AASVFEAT"
FEATURE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<8sIII")

PathLike = Union[str, Path]


def read_wav(path: PathLike, expected_rate: int = 16000) -> Waveform:
    """
    Load a single-channel PCM WAV (16-bit, 32-bit int or 32-bit float)

    Raises:
        DataError: unsupported sample rate, channel count or encoding
    """
    rate, data = wavfile.read(str(path))
    if rate != expected_rate:
        raise DataError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz (resampling unsupported)")
    if data.ndim == 2:
        if data.shape[1] != 1:
            raise DataError(f"{path}: {data.shape[1]} channels, expected mono")
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(DTYPE) / 32768.0
    elif data.dtype == np.int32:
        samples = (data.astype(np.float64) / 2147483648.0).astype(DTYPE)
    elif data.dtype == np.float32:
        samples = data
    else:
        raise DataError(f"{path}: unsupported WAV sample type {data.dtype}")
    return Waveform(samples, rate)


def write_wav(path: PathLike, w: Waveform):
    """Write 32-bit float mono WAV (lossless for regenerated audio)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), w.sample_rate, w.samples.astype(np.float32))


def save_features(path: PathLike, features: np.ndarray):
    """Write the AASVFEAT cache: header then little-endian f32 row-major values"""
    if features.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got {features.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames, mels = features.shape
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, frames, mels))
        fh.write(np.ascontiguousarray(features, dtype="<f4").tobytes())


def load_features(path: PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FEATURE_HEADER.size:
        raise DataError(f"{path}: truncated feature cache")
    magic, version, frames, mels = _FEATURE_HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise DataError(f"{path}: not a feature cache (magic {magic!r})")
    if version != FEATURE_VERSION:
        raise DataError(f"{path}: unsupported feature cache version {version}")
    body = raw[_FEATURE_HEADER.size:]
    if len(body) != frames * mels * 4:
        raise DataError(f"{path}: expected {frames * mels} values, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(frames, mels).astype(DTYPE)
