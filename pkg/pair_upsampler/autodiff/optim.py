from __future__ import annotations

from typing import Mapping

import numpy as np

from ..common import exceptions
from .tensor import GradientMap


class AdamState:
    """
    First/second moment accumulators of the Adam optimizer.

    :param shapes: parameter name -> shape.
    """

    def __init__(self, shapes: Mapping[str, tuple[int, ...]], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.first: dict[str, np.ndarray] = {name: np.zeros(shape) for name, shape in shapes.items()}
        """First-moment estimates."""
        self.second: dict[str, np.ndarray] = {name: np.zeros(shape) for name, shape in shapes.items()}
        """Second-moment estimates (non-negative)."""
        self.step: int = 0
        """Number of updates applied so far."""
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kwargs) -> AdamState:
        return cls({name: np.shape(values) for name, values in params.items()}, **kwargs)

    def copy(self) -> AdamState:
        state = AdamState({}, self.beta1, self.beta2, self.eps)
        state.first = {name: values.copy() for name, values in self.first.items()}
        state.second = {name: values.copy() for name, values in self.second.items()}
        state.step = self.step
        return state


def adam_update(params: Mapping[str, np.ndarray], grads: GradientMap, state: AdamState,
                learning_rate: float) -> tuple[dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam step. Inputs are left untouched.

    :return: (updated parameters, updated state).
    """
    if not learning_rate > 0:
        raise exceptions.InvalidArgumentError("learning_rate", learning_rate, "must be positive")
    new_state = state.copy()
    new_state.step += 1
    t = new_state.step
    b1, b2 = state.beta1, state.beta2
    updated: dict[str, np.ndarray] = {}
    for name, values in params.items():
        if name not in grads:
            raise exceptions.InvalidArgumentError("grads", name, "missing gradient for parameter")
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != np.shape(values):
            raise exceptions.ShapeMismatchError("adam_update", np.shape(values), grad.shape)
        first = b1 * new_state.first.get(name, np.zeros_like(grad)) + (1.0 - b1) * grad
        second = b2 * new_state.second.get(name, np.zeros_like(grad)) + (1.0 - b2) * grad * grad
        new_state.first[name], new_state.second[name] = first, second
        first_hat = first / (1.0 - b1 ** t)
        second_hat = second / (1.0 - b2 ** t)
        updated[name] = values - learning_rate * first_hat / (np.sqrt(second_hat) + state.eps)
    return updated, new_state
