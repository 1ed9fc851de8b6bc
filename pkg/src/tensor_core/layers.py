# src/tensor_core/layers.py
"""
Dense layers with hand-written forward and backward passes
Every layer owns the caches its backward pass needs; a training-mode
forward must precede each backward. Inference-mode forward never writes
to the layer, so it is safe to share between threads.
"""

from typing import Dict, List, Optional

import numpy as np

from src.errors import AASVError, ShapeError
from src.tensor_core.tensor import DTYPE, Parameter, check_ndim


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x @ w + b for x of shape (batch, in), w (in, out), b (out,)"""
    check_ndim(x, 2, "dense input")
    if w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense: input {x.shape} does not conform to weight {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"dense: bias {b.shape} does not match output width {w.shape[1]}")
    return x @ w + b


_PAD_MODES = {"zeros": "constant", "edge": "edge"}


def _same_padding(width: int, dilation: int) -> int:
    if width % 2 != 1:
        raise ShapeError(f"conv1d kernel width must be odd, got {width}")
    return dilation * (width - 1) // 2


def _unfold(x: np.ndarray, width: int, dilation: int, padding: str = "zeros") -> np.ndarray:
    """Pad x (batch, channels, frames) and gather (batch * frames, channels * width) columns"""
    batch, channels, frames = x.shape
    pad = _same_padding(width, dilation)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)), mode=_PAD_MODES[padding])
    cols = np.stack([xp[:, :, k * dilation:k * dilation + frames] for k in range(width)], axis=2)
    # (batch, channels, width, frames) -> (batch, frames, channels, width)
    return cols.transpose(0, 3, 1, 2).reshape(batch * frames, channels * width)


def conv1d_forward(x: np.ndarray, kernels: np.ndarray, dilation: int = 1,
                   bias: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Temporal convolution with "same" zero padding

    Args:
        x: (batch, channels, frames)
        kernels: (out_channels, channels, width), width odd
        dilation: spacing between kernel taps
        bias: optional (out_channels,)

    Returns:
        (batch, out_channels, frames)
    """
    check_ndim(x, 3, "conv1d input")
    out_channels, channels, width = kernels.shape
    if x.shape[1] != channels:
        raise ShapeError(f"conv1d: input has {x.shape[1]} channels, kernels expect {channels}")
    batch, _, frames = x.shape
    cols = _unfold(x, width, dilation)
    y = cols @ kernels.reshape(out_channels, channels * width).T
    if bias is not None:
        y = y + bias
    return y.reshape(batch, frames, out_channels).transpose(0, 2, 1)


def _fan_in_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Layer:
    """Base class: forward/backward plus parameter and buffer access"""

    def __init__(self, name: str):
        self.name = name
        self._cache = None

    def parameters(self) -> List[Parameter]:
        return []

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def set_buffer(self, key: str, value: np.ndarray):
        raise KeyError(f"{self.name} has no buffer {key}")

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise AASVError(f"{self.name}: backward called without a preceding training forward")
        cache, self._cache = self._cache, None
        return cache


class Dense(Layer):
    """Fully connected layer"""

    def __init__(self, in_features: int, out_features: int, name: str = "dense",
                 rng: Optional[np.random.Generator] = None):
        super().__init__(name)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Parameter(f"{name}.weight", _fan_in_uniform(rng, (in_features, out_features), in_features))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_features, dtype=DTYPE))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        y = dense_forward(x, self.weight.value, self.bias.value)
        if training:
            self._cache = x
        return y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        self.weight.accumulate(x.T @ grad)
        self.bias.accumulate(grad.sum(axis=0))
        return grad @ self.weight.value.T


class Conv1d(Layer):
    """
    Dilated temporal convolution (TDNN frame layer)

    padding="edge" repeats the boundary frames instead of zero filling, so a
    time-constant input stays time-constant.
    """

    def __init__(self, in_channels: int, out_channels: int, width: int, dilation: int = 1,
                 name: str = "conv", rng: Optional[np.random.Generator] = None, padding: str = "zeros"):
        super().__init__(name)
        _same_padding(width, dilation)
        if padding not in _PAD_MODES:
            raise ShapeError(f"{name}: unknown padding '{padding}'")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.width = width
        self.dilation = dilation
        self.padding = padding
        fan_in = in_channels * width
        self.weight = Parameter(f"{name}.weight",
                                _fan_in_uniform(rng, (out_channels, in_channels, width), fan_in))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_channels, dtype=DTYPE))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        check_ndim(x, 3, f"{self.name} input")
        out_channels, channels, width = self.weight.value.shape
        if x.shape[1] != channels:
            raise ShapeError(f"{self.name}: input has {x.shape[1]} channels, expected {channels}")
        batch, _, frames = x.shape
        cols = _unfold(x, width, self.dilation, self.padding)
        w2 = self.weight.value.reshape(out_channels, channels * width)
        y = cols @ w2.T + self.bias.value
        if training:
            self._cache = (cols, x.shape)
        return y.reshape(batch, frames, out_channels).transpose(0, 2, 1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        cols, (batch, channels, frames) = self._take_cache()
        out_channels, _, width = self.weight.value.shape
        g2 = grad.transpose(0, 2, 1).reshape(batch * frames, out_channels)
        self.weight.accumulate((g2.T @ cols).reshape(out_channels, channels, width))
        self.bias.accumulate(g2.sum(axis=0))

        dcols = (g2 @ self.weight.value.reshape(out_channels, channels * width))
        dcols = dcols.reshape(batch, frames, channels, width).transpose(0, 2, 3, 1)
        pad = _same_padding(width, self.dilation)
        dxp = np.zeros((batch, channels, frames + 2 * pad), dtype=grad.dtype)
        for k in range(width):
            start = k * self.dilation
            dxp[:, :, start:start + frames] += dcols[:, :, k, :]
        dx = dxp[:, :, pad:pad + frames].copy()
        if self.padding == "edge" and pad:
            dx[:, :, 0] += dxp[:, :, :pad].sum(axis=2)
            dx[:, :, -1] += dxp[:, :, pad + frames:].sum(axis=2)
        return dx


class ReLU(Layer):

    def __init__(self, name: str = "relu"):
        super().__init__(name)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        mask = x > 0
        if training:
            self._cache = mask
        return np.where(mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        mask = self._take_cache()
        return np.where(mask, grad, 0).astype(grad.dtype, copy=False)


class BatchNorm1d(Layer):
    """
    Per-channel batch normalization over (batch, frames) or (batch,)

    Training mode normalizes with batch statistics and updates running
    averages as running = momentum * running + (1 - momentum) * batch.
    Inference mode uses the frozen running averages.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, name: str = "bn"):
        super().__init__(name)
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(f"{name}.gamma", np.ones(channels, dtype=DTYPE))
        self.beta = Parameter(f"{name}.beta", np.zeros(channels, dtype=DTYPE))
        self.running_mean = np.zeros(channels, dtype=DTYPE)
        self.running_var = np.ones(channels, dtype=DTYPE)

    def parameters(self) -> List[Parameter]:
        return [self.gamma, self.beta]

    def buffers(self) -> Dict[str, np.ndarray]:
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def set_buffer(self, key: str, value: np.ndarray):
        if key == f"{self.name}.running_mean":
            self.running_mean = np.array(value, dtype=DTYPE)
        elif key == f"{self.name}.running_var":
            self.running_var = np.array(value, dtype=DTYPE)
        else:
            super().set_buffer(key, value)

    @staticmethod
    def _axes(x: np.ndarray):
        return (0, 2) if x.ndim == 3 else (0,)

    def _broadcast(self, v: np.ndarray, x: np.ndarray) -> np.ndarray:
        return v[None, :, None] if x.ndim == 3 else v[None, :]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim not in (2, 3) or x.shape[1] != self.gamma.value.shape[0]:
            raise ShapeError(f"{self.name}: unexpected input shape {x.shape}")
        axes = self._axes(x)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = (self.momentum * self.running_mean
                                 + (1.0 - self.momentum) * mean).astype(DTYPE)
            self.running_var = (self.momentum * self.running_var
                                + (1.0 - self.momentum) * var).astype(DTYPE)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - self._broadcast(mean, x)) * self._broadcast(inv_std, x)
        if training:
            self._cache = (xhat, inv_std, axes)
        return self._broadcast(self.gamma.value, x) * xhat + self._broadcast(self.beta.value, x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xhat, inv_std, axes = self._take_cache()
        count = grad.size // grad.shape[1]
        self.gamma.accumulate((grad * xhat).sum(axis=axes))
        self.beta.accumulate(grad.sum(axis=axes))
        dxhat = grad * self._broadcast(self.gamma.value, grad)
        sum_dxhat = self._broadcast(dxhat.sum(axis=axes), grad)
        sum_dxhat_xhat = self._broadcast((dxhat * xhat).sum(axis=axes), grad)
        return (self._broadcast(inv_std, grad) / count) * (count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)


class StatsPooling(Layer):
    """Concatenate per-channel mean and standard deviation over frames"""

    def __init__(self, eps: float = 1e-5, name: str = "pool"):
        super().__init__(name)
        self.eps = eps

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        check_ndim(x, 3, f"{self.name} input")
        mean = x.mean(axis=2)
        centered = x - mean[:, :, None]
        std = np.sqrt((centered ** 2).mean(axis=2) + self.eps)
        if training:
            self._cache = (centered, std)
        return np.concatenate([mean, std], axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        centered, std = self._take_cache()
        channels = centered.shape[1]
        frames = centered.shape[2]
        g_mean = grad[:, :channels]
        g_std = grad[:, channels:]
        dx = np.repeat(g_mean[:, :, None] / frames, frames, axis=2)
        dx = dx + (g_std / std)[:, :, None] * centered / frames
        return dx
