"""Mean squared error and the parameter update rules (Adadelta, SGD)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .network import ModelParams


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.size == 0 or pred.shape != target.shape:
        raise ParameterError(
            f"mse_loss needs equal nonempty lengths, got {pred.size} and {target.size}"
        )
    r = pred - target
    return float(np.dot(r, r) / r.size)


def mse_grad(pred, target, n: int):
    """Derivative of the n-sample mean squared error with respect to ``pred``."""
    if n < 1:
        raise ParameterError(f"mse_grad needs n >= 1, got {n}")
    g = 2.0 * (np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)) / n
    return float(g) if g.ndim == 0 else g


def _check_shapes(params: ModelParams, *others: ModelParams) -> None:
    for other in others:
        if not params.same_shape(other):
            raise ShapeError(
                "parameter shapes disagree: "
                f"{[a.shape for a in params.arrays()]} vs {[a.shape for a in other.arrays()]}"
            )


@dataclass
class AdadeltaState:
    """Running averages E[g^2] and E[dx^2] for every parameter array."""

    avg_sq_grad: list[np.ndarray]
    avg_sq_update: list[np.ndarray]
    rho: float = 0.95
    epsilon: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ParameterError(f"Adadelta rho must be in (0, 1), got {self.rho}")
        if not self.epsilon > 0.0:
            raise ParameterError(f"Adadelta epsilon must be positive, got {self.epsilon}")

    @classmethod
    def for_params(cls, params: ModelParams, rho: float = 0.95, epsilon: float = 1e-6):
        return cls(
            [np.zeros_like(a) for a in params.arrays()],
            [np.zeros_like(a) for a in params.arrays()],
            rho,
            epsilon,
        )


def adadelta_step(state: AdadeltaState, params: ModelParams, grads: ModelParams) -> None:
    """Apply one Adadelta update to ``params`` in place.

    Per element::

        E[g^2]  <- rho E[g^2] + (1 - rho) g^2
        dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
        E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
        x       <- x + dx
    """
    _check_shapes(params, grads)
    arrays = params.arrays()
    if len(state.avg_sq_grad) != len(arrays) or any(
        a.shape != s.shape for a, s in zip(arrays, state.avg_sq_grad)
    ):
        raise ShapeError("Adadelta state does not match the parameters")
    rho, eps = state.rho, state.epsilon
    for x, g, eg, edx in zip(arrays, grads.arrays(), state.avg_sq_grad, state.avg_sq_update):
        eg *= rho
        eg += (1.0 - rho) * g * g
        dx = -(np.sqrt(edx + eps) / np.sqrt(eg + eps)) * g
        edx *= rho
        edx += (1.0 - rho) * dx * dx
        x += dx


@dataclass
class SgdState:
    learning_rate: float = 0.01

    def __post_init__(self):
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ParameterError(f"learning rate must be positive, got {self.learning_rate}")


def sgd_step(state: SgdState, params: ModelParams, grads: ModelParams) -> None:
    _check_shapes(params, grads)
    for x, g in zip(params.arrays(), grads.arrays()):
        x -= state.learning_rate * g


@dataclass(frozen=True)
class AdadeltaConfig:
    rho: float = 0.95
    epsilon: float = 1e-6
    name: str = field(default="adadelta", init=False)

    def __post_init__(self):
        AdadeltaState([], [], self.rho, self.epsilon)

    def make_state(self, params: ModelParams) -> AdadeltaState:
        return AdadeltaState.for_params(params, self.rho, self.epsilon)

    def step(self, state, params, grads) -> None:
        adadelta_step(state, params, grads)


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.01
    name: str = field(default="sgd", init=False)

    def __post_init__(self):
        SgdState(self.learning_rate)

    def make_state(self, params: ModelParams) -> SgdState:
        return SgdState(self.learning_rate)

    def step(self, state, params, grads) -> None:
        sgd_step(state, params, grads)
