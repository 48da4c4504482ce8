"""Seven gradient-descent learning methods as interchangeable update rules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class OptimizerError(ValueError):
    pass


class Method(str, enum.Enum):
    CONSTANT_SGD = "constant_sgd"
    DECAYED_SGD = "decayed_sgd"
    CONSTANT_MOMENTUM = "constant_momentum"
    DECAYED_MOMENTUM = "decayed_momentum"
    CONSTANT_NESTEROV = "constant_nesterov"
    DECAYED_NESTEROV = "decayed_nesterov"
    ADAM = "adam"


ALL_METHODS = tuple(Method)
_DECAYED = {Method.DECAYED_SGD, Method.DECAYED_MOMENTUM, Method.DECAYED_NESTEROV}
_MOMENTUM = {Method.CONSTANT_MOMENTUM, Method.DECAYED_MOMENTUM}
_NESTEROV = {Method.CONSTANT_NESTEROV, Method.DECAYED_NESTEROV}


@dataclass(frozen=True)
class OptimizerSpec:
    method: Method = Method.ADAM
    alpha: float = 1e-3
    momentum: float = 0.9
    decay_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.alpha > 0:
            raise OptimizerError("alpha must be positive")
        if not 0 <= self.momentum < 1:
            raise OptimizerError("momentum must be in [0, 1)")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise OptimizerError("Adam betas must be in [0, 1)")
        if not self.eps > 0:
            raise OptimizerError("eps must be positive")
        if self.decay_rate < 0:
            raise OptimizerError("decay_rate must be non-negative")


@dataclass
class OptimizerState:
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)  # velocity, or Adam first moment
    v: list[np.ndarray] = field(default_factory=list)  # Adam second moment


def init_state(params: Sequence[np.ndarray]) -> OptimizerState:
    return OptimizerState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def lr_at(spec: OptimizerSpec, t: int) -> float:
    if spec.method in _DECAYED:
        return spec.alpha / (1.0 + spec.decay_rate * t)
    return spec.alpha


def needs_lookahead(spec: OptimizerSpec) -> bool:
    return spec.method in _NESTEROV


def lookahead(spec: OptimizerSpec, state: OptimizerState, params: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Point ``theta + mu * v`` where Nesterov methods evaluate their gradient."""
    if not state.m:
        return list(params)
    return [p + spec.momentum * v for p, v in zip(params, state.m)]


def apply_update(spec: OptimizerSpec, state: OptimizerState, params: Sequence[np.ndarray],
                 grads: Sequence[np.ndarray], names: Sequence[str] | None = None,
                 ) -> tuple[list[np.ndarray], OptimizerState]:
    """One step of ``spec.method``; returns new parameters and a new state.

    For Nesterov methods ``grads`` must be taken at ``lookahead(...)``.
    """
    if len(params) != len(grads):
        raise OptimizerError("parameter and gradient lists differ in length")
    if not state.m:
        state = init_state(params)
    names = names or [f"param{i}" for i in range(len(params))]
    for p, g, m, name in zip(params, grads, state.m, names):
        if p.shape != g.shape or p.shape != m.shape:
            raise OptimizerError(f"{name}: shape mismatch {p.shape} vs {g.shape}")
    # one reduction per array; a NaN or inf anywhere makes its sum non-finite
    if not np.isfinite(sum(float(np.add.reduce(g, axis=None)) for g in grads)):
        for g, name in zip(grads, names):
            if not np.all(np.isfinite(g)):
                raise OptimizerError(f"{name}: non-finite gradient")

    method = spec.method
    t = state.t + 1
    if method is Method.ADAM:
        b1, b2 = spec.beta1, spec.beta2
        m_new = [b1 * m + (1 - b1) * g for m, g in zip(state.m, grads)]
        v_new = [b2 * v + (1 - b2) * (g * g) for v, g in zip(state.v, grads)]
        step = spec.alpha / (1 - b1 ** t)
        root_c2 = np.sqrt(1 - b2 ** t)
        new = []
        for p, m, v in zip(params, m_new, v_new):
            # alpha * m_hat / (sqrt(v_hat) + eps), written with fewer temporaries
            denom = np.sqrt(v)
            denom /= root_c2
            denom += spec.eps
            new.append(p - step * m / denom)
        return new, OptimizerState(t, m_new, v_new)

    lr = lr_at(spec, state.t)
    if method in _MOMENTUM or method in _NESTEROV:
        vel = [spec.momentum * v - lr * g for v, g in zip(state.m, grads)]
        new = [p + v for p, v in zip(params, vel)]
        return new, OptimizerState(t, vel, state.v)
    new = [p - lr * g for p, g in zip(params, grads)]
    return new, OptimizerState(t, state.m, state.v)
