# src/tensor_core/losses.py
"""
Loss functions: softmax cross-entropy and additive angular margin (AAM) softmax
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import AASVError, ConfigError, DataError, ShapeError


@dataclass(frozen=True)
class AamConfig:
    """Scale s and margin m (radians) of the AAM-softmax"""

    scale: float = 30.0
    margin: float = 0.2

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError(f"AAM scale must be positive, got {self.scale}")
        if not 0.0 <= self.margin < math.pi / 2:
            raise ConfigError(f"AAM margin must lie in [0, pi/2), got {self.margin}")


def _normalize_rows(x: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DataError(f"zero-norm {what}")
    return x / norms, norms


def _margin_target(cos_y: np.ndarray, margin: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    cos(theta + m) and its derivative w.r.t. cos(theta)

    Uses cos(theta + m) = c cos m - sin(theta) sin m so that m = 0 returns c
    exactly; theta + m is clamped to pi.
    """
    sin_theta = np.sqrt(np.clip(1.0 - cos_y ** 2, 0.0, 1.0))
    within = np.arccos(cos_y) + margin <= math.pi
    target = np.where(within, cos_y * math.cos(margin) - sin_theta * math.sin(margin), -1.0)
    safe_sin = np.maximum(sin_theta, 1e-6)
    dtarget = np.where(within, math.cos(margin) + cos_y * math.sin(margin) / safe_sin, 0.0)
    return target, dtarget


def aam_logits(embedding: np.ndarray, head: np.ndarray, label: int, cfg: AamConfig) -> np.ndarray:
    """
    AAM logits for a single embedding

    Args:
        embedding: (d,) speaker embedding
        head: (classes, d) class weight rows
        label: true class index
        cfg: scale and margin

    Returns:
        (classes,) logits: s * cos(theta_j), with s * cos(theta_label + m) for the true class
    """
    logits, _ = AamSoftmaxLoss(cfg).logits(embedding[None, :], head, np.array([label]))
    return logits[0]


def softmax_cross_entropy(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """
    Cross-entropy of softmax(logits) against label

    Returns:
        (loss, grad) with grad = softmax(logits) - one_hot(label)
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[0]:
        raise DataError(f"label {label} out of range for {logits.shape[0]} classes")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = float(log_z - shifted[label])
    grad = np.exp(shifted - log_z)
    grad[label] -= 1.0
    return loss, grad


def batch_softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                                class_weights: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy over a batch; grad is w.r.t. the (batch, classes) logits

    With class_weights each row counts w[label] times and the mean is taken
    over the summed weights.
    """
    batch, classes = logits.shape
    if np.any(labels < 0) or np.any(labels >= classes):
        raise DataError(f"labels out of range for {classes} classes")
    if class_weights is None:
        weights = np.ones(batch)
    else:
        class_weights = np.asarray(class_weights, dtype=np.float64)
        if class_weights.shape != (classes,) or np.any(class_weights <= 0):
            raise DataError(f"class_weights must be {classes} positive values, got {class_weights}")
        weights = class_weights[labels]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    total = weights.sum()
    loss = float(np.sum(weights * (log_z - shifted[rows, labels])) / total)
    grad = np.exp(shifted - log_z[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad * (weights / total)[:, None]


class AamSoftmaxLoss:
    """Batched AAM-softmax cross-entropy with analytic gradients"""

    def __init__(self, cfg: AamConfig = None):
        self.cfg = cfg or AamConfig()
        self._cache = None

    def logits(self, embeddings: np.ndarray, head: np.ndarray, labels: np.ndarray):
        """Return (logits, cache) for embeddings (batch, d) and head (classes, d)"""
        if embeddings.ndim != 2 or head.ndim != 2 or embeddings.shape[1] != head.shape[1]:
            raise ShapeError(f"AAM: embeddings {embeddings.shape} vs head {head.shape}")
        labels = np.asarray(labels)
        if np.any(labels < 0) or np.any(labels >= head.shape[0]):
            raise DataError(f"labels out of range for {head.shape[0]} classes")
        e_hat, e_norm = _normalize_rows(embeddings, "embedding")
        w_hat, w_norm = _normalize_rows(head, "head row")
        cos = np.clip(e_hat @ w_hat.T, -1.0, 1.0)
        rows = np.arange(embeddings.shape[0])
        target, dtarget = _margin_target(cos[rows, labels], self.cfg.margin)
        logits = self.cfg.scale * cos
        logits[rows, labels] = self.cfg.scale * target
        cache = (e_hat, e_norm, w_hat, w_norm, cos, labels, dtarget)
        return logits, cache

    def forward(self, embeddings: np.ndarray, head: np.ndarray, labels: np.ndarray) -> float:
        logits, cache = self.logits(embeddings, head, labels)
        loss, dlogits = batch_softmax_cross_entropy(logits, cache[5])
        self._cache = cache + (dlogits,)
        return loss

    @property
    def cosines(self) -> np.ndarray:
        """Un-margined cosine matrix of the last forward"""
        if self._cache is None:
            raise AASVError("AAM loss has no cached forward")
        return self._cache[4]

    def backward(self) -> Tuple[np.ndarray, np.ndarray]:
        """Gradients of the last forward's loss w.r.t. (embeddings, head)"""
        if self._cache is None:
            raise AASVError("AAM backward called without a preceding forward")
        e_hat, e_norm, w_hat, w_norm, _, labels, dtarget, dlogits = self._cache
        self._cache = None
        rows = np.arange(e_hat.shape[0])
        dcos = self.cfg.scale * dlogits
        dcos[rows, labels] *= dtarget
        de_hat = dcos @ w_hat
        dw_hat = dcos.T @ e_hat
        # backward of x / ||x|| row-wise
        de = (de_hat - e_hat * np.sum(de_hat * e_hat, axis=1, keepdims=True)) / e_norm
        dw = (dw_hat - w_hat * np.sum(dw_hat * w_hat, axis=1, keepdims=True)) / w_norm
        return de, dw
