"""
Building blocks shared by the network stages. Every function takes tensors (or arrays)
and a weight mapping, and returns a tensor recorded on the inputs' tape.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..autodiff import Tensor, ops
from ..common import exceptions
from ..common.enums import Activations, PositionEncoders
from ..types import NeighborhoodIndex

Weights = Mapping[str, Tensor]


def _table(index: NeighborhoodIndex | np.ndarray) -> np.ndarray:
    return index.indices if isinstance(index, NeighborhoodIndex) else np.asarray(index, dtype=np.int64)


def dense(x, weights: Weights, name: str) -> Tensor:
    return ops.linear(x, weights[f"{name}.weight"], weights[f"{name}.bias"])


def perceptron(x, weights: Weights, name: str) -> Tensor:
    """
    Two-layer perceptron ``out(relu(hidden(x)))``.
    """
    return dense(ops.relu(dense(x, weights, f"{name}.hidden")), weights, f"{name}.out")


def _centers(points: Tensor, k: int) -> Tensor:
    m, width = points.shape
    return ops.broadcast_to(ops.reshape(points, (m, 1, width)), (m, k, width))


def lse_encode(points, index: NeighborhoodIndex | np.ndarray) -> Tensor:
    """
    Local position code, 10 channels per neighbour: ``[p_i, L_k, p_i - L_k, |p_i - L_k|]``.

    :param points: (m, 3) cloud the index was built over.
    :param index: (m, K) neighbour table.
    """
    points = ops.as_tensor(points)
    table = _table(index)
    neighbors = ops.gather(points, table)
    centers = _centers(points, table.shape[1])
    offset = ops.sub(centers, neighbors)
    return ops.concat([centers, neighbors, offset, ops.norm(offset)], axis=-1)


def spne_encode(points, union, local: NeighborhoodIndex | np.ndarray,
                cross: NeighborhoodIndex | np.ndarray) -> Tensor:
    """
    Cross-patch position code, 20 channels per neighbour::

        [p_i, L_k, p_i - L_k, |p_i - L_k|, L′_k - L_k + p_i, L′_k, p_i - L′_k, |p_i - L′_k|]

    :param points: (n, 3) patch P.
    :param union: (2n, 3) concatenation of P and its adjacent patch.
    :param local: (n, K) neighbours of P's points within P.
    :param cross: (n, K) neighbours of P's points within the union.
    """
    local, cross = _table(local), _table(cross)
    if local.shape != cross.shape:
        raise exceptions.ShapeMismatchError("spne_encode", local.shape, cross.shape)
    points, union = ops.as_tensor(points), ops.as_tensor(union)
    centers = _centers(points, local.shape[1])
    near = ops.gather(points, local)
    far = ops.gather(union, cross)
    offset = ops.sub(centers, near)
    cross_offset = ops.sub(centers, far)
    return ops.concat([centers, near, offset, ops.norm(offset),
                       ops.add(ops.sub(far, near), centers), far, cross_offset, ops.norm(cross_offset)], axis=-1)


def raw_encode(points, index: NeighborhoodIndex | np.ndarray) -> Tensor:
    """
    Relative coordinates ``p_i - L_k`` only, 3 channels.
    """
    points = ops.as_tensor(points)
    table = _table(index)
    return ops.sub(_centers(points, table.shape[1]), ops.gather(points, table))


def position_code(kind: PositionEncoders, points, index, union=None, cross=None) -> Tensor:
    if kind == PositionEncoders.SPNE:
        if union is None or cross is None:
            raise exceptions.InvalidArgumentError("union", None, "the cross-patch code needs the adjacent patch")
        return spne_encode(points, union, index, cross)
    if kind == PositionEncoders.LSE:
        return lse_encode(points, index)
    return raw_encode(points, index)


def edge_conv(features, index: NeighborhoodIndex | np.ndarray, weights: Weights, name: str) -> Tensor:
    """
    Graph layer: shared perceptron on ``[x_i, x_j - x_i]`` for every neighbour j, ReLU, max over neighbours.
    """
    features = ops.as_tensor(features)
    table = _table(index)
    centers = _centers(features, table.shape[1])
    edges = ops.concat([centers, ops.sub(ops.gather(features, table), centers)], axis=-1)
    return ops.max(ops.relu(dense(edges, weights, name)), axis=1)


def attention_block(features, neighbors, code, weights: Weights, name: str, activation: Activations) -> Tensor:
    """
    Residual vector attention over K neighbours.

    With ``δ = act(encoder(code))`` the logits are ``γ(φ(F_i) - ψ(X_ik) + δ_ik)``, normalized by a
    softmax over k; the output is ``F_i + Σ_k w_ik ⊙ (α(X_ik) + δ_ik)``.

    :param features: (m, C) query features F.
    :param neighbors: (m, K, C) gathered neighbour features X.
    :param code: (m, K, c_pos) position code built from the same neighbour table.
    :param name: weight prefix (``pacm`` or ``pocm``).
    :param activation: applied to the encoder output.
    """
    features, neighbors, code = ops.as_tensor(features), ops.as_tensor(neighbors), ops.as_tensor(code)
    m, width = features.shape
    if neighbors.shape[0] != m or neighbors.shape[2] != width:
        raise exceptions.ShapeMismatchError("attention_block", features.shape, neighbors.shape)
    if code.shape[:2] != neighbors.shape[:2]:
        raise exceptions.ShapeMismatchError("attention_block", neighbors.shape, code.shape)
    encoded = perceptron(code, weights, f"{name}.encoder")
    delta = ops.tanh(encoded) if activation == Activations.TANH else ops.relu(encoded)
    if delta.shape[-1] != width:
        raise exceptions.ShapeMismatchError("attention_block", features.shape, delta.shape)
    query = ops.reshape(dense(features, weights, f"{name}.phi"), (m, 1, width))
    logits = perceptron(ops.add(ops.sub(query, dense(neighbors, weights, f"{name}.psi")), delta),
                        weights, f"{name}.gamma")
    attention = ops.softmax(logits, axis=1)
    values = ops.add(dense(neighbors, weights, f"{name}.alpha"), delta)
    return ops.add(features, ops.sum(ops.mul(attention, values), axis=1))


def expand_features(features, index: NeighborhoodIndex | np.ndarray, weights: Weights, r: int,
                    name: str = "pacm.expand") -> Tensor:
    """
    Widens every point's features r-fold with a graph layer, then shuffles channel blocks into
    points: block j of point i becomes row ``i·r + j`` (all replicas of a point are contiguous).

    :return: (r·n, C′) tensor.
    """
    if r < 1:
        raise exceptions.InvalidArgumentError("r", r, "must be at least 1")
    wide = edge_conv(features, index, weights, name)
    n, width = wide.shape
    if width % r:
        raise exceptions.ShapeMismatchError("expand_features", (n, width), (r,))
    return ops.reshape(wide, (n * r, width // r))


def unshuffle(expanded: np.ndarray, r: int) -> np.ndarray:
    """
    Inverse of the point shuffle in :func:`expand_features`.
    """
    rows, width = expanded.shape
    return np.asarray(expanded).reshape(rows // r, r * width)


def reconstruct_coarse(expanded, weights: Weights, name: str = "pacm.reconstruct") -> Tensor:
    """
    Per-row two-layer perceptron from expanded features to 3D coordinates.
    """
    return perceptron(expanded, weights, name)
