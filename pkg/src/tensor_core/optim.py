# src/tensor_core/optim.py
"""
Adam with decoupled weight decay and the triangular cyclic learning-rate schedule
"""

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from src.errors import ConfigError, NonFiniteError
from src.tensor_core.tensor import Parameter


@dataclass
class AdamState:
    """Per-parameter Adam moments"""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    weight_decay: float = 2e-6
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_parameter(cls, param: Parameter, **hyper) -> "AdamState":
        return cls(np.zeros_like(param.value), np.zeros_like(param.value), **hyper)


def adam_step(param: Parameter, state: AdamState, lr: float):
    """
    One Adam update with bias correction

    Weight decay is decoupled: value -= lr * weight_decay * value is applied
    before the Adam delta. Updates param.value and state in place.
    """
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"non-finite gradient for {param.name}")
    if state.m.shape != param.value.shape:
        raise ConfigError(f"Adam state shape {state.m.shape} does not match {param.name}")

    state.step_count += 1
    t = state.step_count
    if state.weight_decay:
        param.value -= lr * state.weight_decay * param.value
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    param.value -= (lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(param.value.dtype, copy=False)


class Adam:
    """Applies adam_step to a list of parameters, skipping frozen ones"""

    def __init__(self, params: List[Parameter], weight_decay: float = 2e-6,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = params
        self.states: Dict[str, AdamState] = {
            p.name: AdamState.for_parameter(p, weight_decay=weight_decay, beta1=beta1,
                                            beta2=beta2, epsilon=epsilon)
            for p in params
        }

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float):
        for p in self.params:
            if p.trainable:
                adam_step(p, self.states[p.name], lr)


@dataclass(frozen=True)
class CyclicLrSchedule:
    """Triangular schedule between base_lr and max_lr with period cycle_steps"""

    base_lr: float = 1e-8
    max_lr: float = 1e-3
    cycle_steps: int = 2000

    def __post_init__(self):
        if self.cycle_steps < 1:
            raise ConfigError(f"cycle_steps must be positive, got {self.cycle_steps}")
        if not 0 <= self.base_lr <= self.max_lr:
            raise ConfigError(f"need 0 <= base_lr <= max_lr, got {self.base_lr}, {self.max_lr}")


def lr_at(schedule: CyclicLrSchedule, step: int) -> float:
    """Linear rise base -> max over the first half-cycle, linear fall over the second"""
    if step < 0:
        raise ConfigError(f"step must be non-negative, got {step}")
    position = (step % schedule.cycle_steps) / schedule.cycle_steps
    fraction = 1.0 - abs(2.0 * position - 1.0)
    lr = schedule.base_lr + (schedule.max_lr - schedule.base_lr) * fraction
    return float(min(max(lr, schedule.base_lr), schedule.max_lr))
