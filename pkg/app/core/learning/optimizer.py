"""Gradient-ascent optimizers over PolicyParams."""

from dataclasses import dataclass

import numpy as np

from app.core.exceptions import ParameterError
from app.core.learning.policy import PolicyParams


@dataclass
class OptimizerState:
    """First/second moment accumulators mirroring the parameter layout."""

    first_moment: PolicyParams
    second_moment: PolicyParams
    step: int = 0

    @classmethod
    def zeros_like(cls, params: PolicyParams) -> "OptimizerState":
        return cls(first_moment=params.zeros_like(), second_moment=params.zeros_like())

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            first_moment=self.first_moment.copy(),
            second_moment=self.second_moment.copy(),
            step=self.step,
        )


def _check_layout(params: PolicyParams, grads: PolicyParams) -> None:
    for name, tensor in params.tensors.items():
        if grads[name].shape != tensor.shape:
            raise ParameterError(f"gradient for {name} has shape {grads[name].shape}")


def adam_update(
    params: PolicyParams,
    grads: PolicyParams,
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[PolicyParams, OptimizerState]:
    """Bias-corrected adaptive-moment step in the ascent direction."""
    _check_layout(params, grads)
    new_params = params.copy()
    new_state = state.copy()
    new_state.step += 1

    bc1 = 1.0 - beta1**new_state.step
    bc2 = 1.0 - beta2**new_state.step
    for name, g in grads.tensors.items():
        m = new_state.first_moment[name]
        v = new_state.second_moment[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        new_params[name] += lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return new_params, new_state


def sgd_update(
    params: PolicyParams,
    grads: PolicyParams,
    state: OptimizerState,
    lr: float,
) -> tuple[PolicyParams, OptimizerState]:
    """Plain gradient ascent; moments untouched, step counted."""
    _check_layout(params, grads)
    new_params = params.copy()
    for name, g in grads.tensors.items():
        new_params[name] += lr * g
    new_state = state.copy()
    new_state.step += 1
    return new_params, new_state


OPTIMIZERS = {"adam": adam_update, "sgd": sgd_update}
