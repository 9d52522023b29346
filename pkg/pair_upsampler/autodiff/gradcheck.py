from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..common import exceptions
from .tensor import GradientMap, Tensor


def finite_difference_gradient(function: Callable[[dict[str, np.ndarray]], "float | Tensor"],
                               parameters: Mapping[str, np.ndarray], step: float = 1e-6) -> GradientMap:
    """
    Central-difference estimate (f(p+h) - f(p-h)) / 2h of the gradient, one coordinate at a time.

    :param function: maps a parameter dict to a scalar (float or scalar :class:`Tensor`).
    :param parameters: point of evaluation; not modified.
    :param step: h, must be positive.

    :return: gradient map with the shapes of ``parameters``.
    """
    if not step > 0:
        raise exceptions.InvalidArgumentError("step", step, "must be positive")
    point = {name: np.array(values, dtype=np.float64, copy=True) for name, values in parameters.items()}

    def evaluate() -> float:
        value = function(point)
        return float(value.values if isinstance(value, Tensor) else value)

    result: GradientMap = {}
    for name, values in point.items():
        grad = np.zeros_like(values)
        flat = values.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            upper = evaluate()
            flat[i] = original - step
            lower = evaluate()
            flat[i] = original
            grad.flat[i] = (upper - lower) / (2.0 * step)
        result[name] = grad
    return result


def relative_error(analytic: Mapping[str, np.ndarray], numeric: Mapping[str, np.ndarray],
                   atol: float = 1e-7) -> float:
    """
    Worst per-parameter ``|a - n| / max(|a|, |n|)`` over two gradient maps (vector norms).
    Parameters whose maps differ by at most ``atol`` are skipped.
    """
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        if a.shape != n.shape:
            raise exceptions.ShapeMismatchError("gradient", a.shape, n.shape)
        difference = np.linalg.norm(a - n)
        if difference <= atol:
            continue
        scale = np.maximum(np.linalg.norm(a), np.linalg.norm(n))
        worst = np.maximum(worst, float(difference / scale))
    return float(worst)
