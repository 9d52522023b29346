"""
Earth Mover's Distance (exact and auction-approximated), the two-term reconstruction
loss and its weight schedule, and the evaluation metrics CD / HD / P2F.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .autodiff import Tensor, ops
from .common import exceptions
from .common.utils import as_points, pairwise_sq_distances
from .types import AnalyticShape

LAMBDA_START = 0.01
LAMBDA_END = 1.0
BRUTE_FORCE_LIMIT = 2048
_CHUNK = 512


def _check_equal(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise exceptions.ShapeMismatchError("emd", a.shape, b.shape)


def optimal_matching(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Minimum-cost bijection between two equal-size point sets.

    :return: ``match`` such that ``a[i]`` is paired with ``b[match[i]]``.
    """
    a, b = as_points(a), as_points(b)
    _check_equal(a, b)
    rows, cols = linear_sum_assignment(cdist(a, b))
    match = np.empty(len(a), dtype=np.int64)
    match[rows] = cols
    return match


def emd_exact(a: np.ndarray, b: np.ndarray, normalized: bool = True) -> float:
    """
    Exact Earth Mover's Distance: the optimal assignment cost over Euclidean distances.

    :param a: (m, 3) points.
    :param b: (m, 3) points.
    :param normalized: divide the total cost by m.
    """
    a, b = as_points(a), as_points(b)
    _check_equal(a, b)
    if not len(a):
        return 0.0
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    return total / len(a) if normalized else total


def _same_multiset(a: np.ndarray, b: np.ndarray) -> bool:
    order_a = np.lexsort(a.T[::-1])
    order_b = np.lexsort(b.T[::-1])
    return bool(np.array_equal(a[order_a], b[order_b]))


def auction_matching(cost: np.ndarray, phases: int = 6, shrink: float = 0.2) -> np.ndarray:
    """
    Gauss-Seidel auction for a minimum-cost assignment with ε-scaling.
    Each phase reruns the auction from scratch with the prices of the previous one and a
    smaller ε; the final assignment is within m·ε of optimal.

    :param cost: (m, m) cost matrix.
    :param phases: number of ε-scaling phases, at least 1.
    :param shrink: ε factor between phases.

    :return: column assigned to every row.
    """
    if phases < 1:
        raise exceptions.InvalidArgumentError("iterations", phases, "must be at least 1")
    m = len(cost)
    value = -cost
    prices = np.zeros(m)
    eps = max(float(cost.max()) / 4.0, 1e-12)
    owner = np.full(m, -1, dtype=np.int64)
    assigned = np.full(m, -1, dtype=np.int64)
    for _ in range(phases):
        owner[:] = -1
        assigned[:] = -1
        unassigned = list(range(m - 1, -1, -1))
        while unassigned:
            bidder = unassigned.pop()
            net = value[bidder] - prices
            best = int(np.argmax(net))
            if m > 1:
                first = net[best]
                net[best] = -np.inf
                increment = first - net.max() + eps
            else:
                increment = eps
            prices[best] += increment
            previous = owner[best]
            if previous >= 0:
                assigned[previous] = -1
                unassigned.append(int(previous))
            owner[best] = bidder
            assigned[bidder] = best
        eps *= shrink
    return assigned


def emd_approx(a: np.ndarray, b: np.ndarray, iterations: int = 6, normalized: bool = True) -> float:
    """
    Earth Mover's Distance through an ε-scaled auction. Never below :func:`emd_exact`.

    :param iterations: number of ε-scaling phases.
    """
    a, b = as_points(a), as_points(b)
    _check_equal(a, b)
    if not len(a) or _same_multiset(a, b):
        return 0.0
    cost = cdist(a, b)
    match = auction_matching(cost, iterations)
    total = float(cost[np.arange(len(a)), match].sum())
    return total / len(a) if normalized else total


def _matched_distance(points: Tensor, target: np.ndarray, normalized: bool) -> Tensor:
    match = optimal_matching(points.values, target)
    distances = ops.norm(ops.sub(points, target[match]))
    return ops.mean(distances) if normalized else ops.sum(distances)


def reconstruction_loss(coarse: Tensor, refined: Tensor, target: np.ndarray, lam: float,
                        normalized: bool = True) -> Tensor:
    """
    ``EMD(coarse, target) + λ·EMD(refined, target)`` as a differentiable scalar. Each matching
    is solved on the current values and held fixed, so gradients flow through the point
    coordinates only.

    :param coarse: (rn, 3) coarse points.
    :param refined: (rn, 3) refined points.
    :param target: (rn, 3) ground truth.
    :param lam: weight of the refined term.
    :param normalized: average the matched distances instead of summing them.
    """
    coarse, refined = ops.as_tensor(coarse), ops.as_tensor(refined)
    target = as_points(target)
    for tensor in (coarse, refined):
        if tensor.shape != target.shape:
            raise exceptions.ShapeMismatchError("reconstruction_loss", tensor.shape, target.shape)
    if lam < 0:
        raise exceptions.InvalidArgumentError("lam", lam, "must be non-negative")
    first = _matched_distance(coarse, target, normalized)
    if lam == 0:
        return first
    return ops.add(first, ops.mul(lam, _matched_distance(refined, target, normalized)))


def lambda_schedule(epoch: float, total_epochs: int, start: float = LAMBDA_START, end: float = LAMBDA_END) -> float:
    """
    Weight of the refined term, rising linearly from ``start`` at epoch 0 to ``end`` at ``total_epochs``.
    """
    if total_epochs <= 0:
        raise exceptions.InvalidArgumentError("total_epochs", total_epochs, "must be positive")
    if not 0 <= epoch <= total_epochs:
        raise exceptions.InvalidArgumentError("epoch", epoch, f"must be in [0, {total_epochs}]")
    return start + (end - start) * epoch / total_epochs


def nearest_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    For every point of ``a``, the distance to its nearest point in ``b``.
    """
    a, b = as_points(a), as_points(b)
    if not len(a) or not len(b):
        raise exceptions.InvalidArgumentError("points", (len(a), len(b)), "point sets must be non-empty")
    if len(a) > BRUTE_FORCE_LIMIT and len(b) > BRUTE_FORCE_LIMIT:
        return cKDTree(b).query(a, k=1)[0]
    parts = [np.sqrt(pairwise_sq_distances(a[i:i + _CHUNK], b).min(axis=1)) for i in range(0, len(a), _CHUNK)]
    return np.concatenate(parts)


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """
    Chamfer distance with unsquared distances, each direction averaged.
    """
    return float(nearest_distances(a, b).mean() + nearest_distances(b, a).mean())


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return float(max(nearest_distances(a, b).max(), nearest_distances(b, a).max()))


def p2f_analytic(points: np.ndarray, shape: AnalyticShape) -> tuple[float, float]:
    """
    Mean and population standard deviation of the unsigned point-to-surface distances.
    """
    distances = shape.distance(as_points(points))
    return float(distances.mean()), float(distances.std())
