# src/encoder/merge.py
"""
Weight space ensemble: element-wise interpolation of two encoders
"""

from typing import Dict, Sequence

import numpy as np

from config.logger import AASVLogger
from src.encoder.tdnn import SpeakerEncoder
from src.errors import ConfigError, ShapeError
from src.tensor_core.tensor import DTYPE

logger = AASVLogger.get_logger(__name__)


def wse_merge(encoder_a: SpeakerEncoder, encoder_c: SpeakerEncoder, alpha: float = 0.5) -> SpeakerEncoder:
    """
    w = alpha * w_a + (1 - alpha) * w_c for every parameter and batch-norm statistic

    Args:
        encoder_a: adult encoder
        encoder_c: child encoder with the same architecture
        alpha: weight of the adult encoder in [0, 1]

    Returns:
        a new encoder; the inputs are untouched
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    state_a, state_c = encoder_a.state_dict(), encoder_c.state_dict()
    if list(state_a) != list(state_c):
        raise ShapeError("encoders have different tensor layouts")
    merged = {}
    for name, a in state_a.items():
        c = state_c[name]
        if a.shape != c.shape:
            raise ShapeError(f"{name}: shapes {a.shape} and {c.shape} differ")
        merged[name] = (alpha * a.astype(np.float64) + (1.0 - alpha) * c.astype(np.float64)).astype(DTYPE)
    out = encoder_a.copy()
    out.load_state_dict(merged)
    logger.info(f"Merged encoders with alpha={alpha}")
    return out


def wse_sweep(encoder_a: SpeakerEncoder, encoder_c: SpeakerEncoder,
              alphas: Sequence[float]) -> Dict[float, SpeakerEncoder]:
    return {float(a): wse_merge(encoder_a, encoder_c, a) for a in alphas}
