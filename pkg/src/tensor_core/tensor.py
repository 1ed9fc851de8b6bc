# src/tensor_core/tensor.py
"""
Tensor helpers and the Parameter container
Tensors are plain numpy arrays; model storage is float32
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.errors import NonFiniteError, ShapeError

DTYPE = np.float32


def as_tensor(data, dtype=DTYPE) -> np.ndarray:
    """Convert input to a contiguous array of the storage dtype"""
    return np.ascontiguousarray(np.asarray(data, dtype=dtype))


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    """Raise NonFiniteError if x holds NaN or Inf"""
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} contains non-finite values")
    return x


def check_ndim(x: np.ndarray, ndim: int, what: str = "tensor"):
    if x.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-D, got shape {x.shape}")


@dataclass
class Parameter:
    """A trainable tensor and its gradient accumulator"""

    name: str
    value: np.ndarray
    grad: Optional[np.ndarray] = None
    trainable: bool = True
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape:
            raise ShapeError(
                f"parameter {self.name}: grad shape {self.grad.shape} != value shape {self.value.shape}"
            )

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        if self.grad.dtype != self.value.dtype or self.grad.shape != self.value.shape:
            self.grad = np.zeros_like(self.value)
        else:
            self.grad.fill(0.0)

    def accumulate(self, g: np.ndarray):
        """Add g into the gradient accumulator (frozen parameters ignore it)"""
        if g.shape != self.value.shape:
            raise ShapeError(f"parameter {self.name}: gradient shape {g.shape} != {self.value.shape}")
        if self.trainable:
            self.grad += g

    def copy(self) -> "Parameter":
        return Parameter(self.name, self.value.copy(), self.grad.copy(), self.trainable, dict(self.tags))
