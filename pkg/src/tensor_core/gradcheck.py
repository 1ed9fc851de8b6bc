# src/tensor_core/gradcheck.py
"""
Central finite-difference check of analytic gradients
"""

from typing import Callable, List, Optional

import numpy as np

from src.tensor_core.tensor import Parameter


def finite_diff_check(loss_fn: Callable[[], float], params: List[Parameter], epsilon: float = 1e-3,
                      max_coords: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> float:
    """
    Compare analytic gradients against central differences

    Args:
        loss_fn: zero-argument callable that zeroes grads, runs forward and
            backward (filling param.grad) and returns the scalar loss
        params: parameters to check
        epsilon: perturbation size
        max_coords: if set, check at most this many randomly chosen
            coordinates per parameter
        rng: generator for coordinate sampling

    Returns:
        max over checked coordinates of |a - n| / max(|a|, |n|, 1e-8)

    Parameters are promoted to float64 for the duration of the check and
    restored to their original dtype afterwards.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    dtypes = [p.value.dtype for p in params]
    for p in params:
        p.value = p.value.astype(np.float64)
        p.grad = np.zeros_like(p.value)

    try:
        loss_fn()
        analytic = [p.grad.astype(np.float64).copy() for p in params]

        worst = 0.0
        for p, grad in zip(params, analytic):
            flat = p.value.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
            for i in coords:
                original = flat[i]
                flat[i] = original + epsilon
                plus = float(loss_fn())
                flat[i] = original - epsilon
                minus = float(loss_fn())
                flat[i] = original
                numeric = (plus - minus) / (2.0 * epsilon)
                a = float(grad.reshape(-1)[i])
                denom = max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, abs(a - numeric) / denom)
        return worst
    finally:
        for p, dtype in zip(params, dtypes):
            p.value = p.value.astype(dtype)
            p.grad = np.zeros_like(p.value)
