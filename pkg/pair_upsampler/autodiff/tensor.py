"""
A dense float64 tensor with reverse-mode differentiation on a per-run tape.

Every op is a plain function. When at least one input belongs to a live tape the
result is recorded on that tape together with a closure that maps the output
gradient to input gradients; otherwise the result is a constant. Values are
computed identically in both cases.
"""
from __future__ import annotations

from typing import Callable, Dict, Iterable, Mapping, Sequence

import numpy as np

from ..common import exceptions
from ..common.enums import OpKinds

GradientMap = Dict[str, np.ndarray]
"""Parameter name -> gradient array of the parameter's shape."""

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Node:
    """
    A record on the tape.
    """
    __slots__ = ("tape", "index", "generation", "op_kind", "parents", "backward", "param_name")

    def __init__(self, tape: Tape, index: int, op_kind: OpKinds | None, parents: tuple[Tensor, ...],
                 backward: BackwardFn | None, param_name: str | None = None):
        self.tape = tape
        self.index = index
        self.generation = tape.generation
        self.op_kind = op_kind
        self.parents = parents
        self.backward = backward
        self.param_name = param_name

    @property
    def live(self) -> bool:
        return self.generation == self.tape.generation


class Tensor:
    """
    Dense n-dimensional float64 array, optionally attached to a tape.

    :param values: array-like values.
    :param node: tape record, :obj:`None` for constants.
    :param name: parameter name for watched leaves.
    """
    __slots__ = ("values", "node", "name")
    __array_ufunc__ = None

    def __init__(self, values, node: Node | None = None, name: str | None = None):
        self.values: np.ndarray = np.asarray(values, dtype=np.float64)
        self.node: Node | None = node
        self.name: str | None = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def recorded(self) -> bool:
        return self.node is not None and self.node.live

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def __repr__(self):
        kind = "recorded" if self.recorded else "constant"
        return f"Tensor(shape={self.shape}, {kind}{', name=' + self.name if self.name else ''})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """
    Records forward ops in execution order; backward walks them in reverse.

    A tape belongs to one thread of execution. It is cleared by :meth:`backward`.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.parameters: dict[str, Tensor] = {}
        self.generation: int = 0

    def watch(self, name: str, values) -> Tensor:
        """
        Registers a trainable parameter and returns its leaf tensor.
        """
        if name in self.parameters:
            raise exceptions.InvalidArgumentError("name", name, "parameter is already watched on this tape")
        tensor = Tensor(values, name=name)
        tensor.node = Node(self, len(self.nodes), None, (), None, param_name=name)
        self.nodes.append(tensor.node)
        self.parameters[name] = tensor
        return tensor

    def watch_all(self, params: Mapping[str, np.ndarray]) -> dict[str, Tensor]:
        return {name: self.watch(name, values) for name, values in params.items()}

    def record(self, op_kind: OpKinds, values: np.ndarray, parents: tuple[Tensor, ...],
               backward: BackwardFn) -> Tensor:
        node = Node(self, len(self.nodes), op_kind, parents, backward)
        self.nodes.append(node)
        return Tensor(values, node=node)

    def clear(self):
        self.nodes = []
        self.parameters = {}
        self.generation += 1

    def backward(self, loss: Tensor) -> GradientMap:
        """
        Computes d loss / d parameter for every watched parameter and clears the tape.

        :param loss: scalar tensor produced by ops recorded on this tape.

        :return: gradient map; parameters the loss does not depend on get zeros.
        """
        if loss.values.shape != ():
            raise exceptions.NonScalarLossError(loss.values.shape)
        if loss.node is None or not loss.node.live or loss.node.tape is not self:
            raise exceptions.GraphDisconnectedError()

        grads: dict[int, np.ndarray] = {loss.node.index: np.ones((), dtype=np.float64)}
        param_grads: dict[str, np.ndarray] = {}
        for index in range(loss.node.index, -1, -1):
            grad = grads.pop(index, None)
            if grad is None:
                continue
            node = self.nodes[index]
            if node.param_name is not None:
                param_grads[node.param_name] = grad
                continue
            for parent, parent_grad in zip(node.parents, node.backward(grad)):
                if parent_grad is None or not parent.recorded:
                    continue
                pi = parent.node.index
                grads[pi] = grads[pi] + parent_grad if pi in grads else parent_grad

        result = {name: np.array(param_grads[name], dtype=np.float64).reshape(tensor.shape)
                  if name in param_grads else np.zeros_like(tensor.values)
                  for name, tensor in self.parameters.items()}
        self.clear()
        return result


def backward(loss: Tensor) -> GradientMap:
    """
    Reverse-mode gradients of a scalar loss with respect to every parameter of its tape.
    """
    if loss.values.shape != ():
        raise exceptions.NonScalarLossError(loss.values.shape)
    if not loss.recorded:
        raise exceptions.GraphDisconnectedError()
    return loss.node.tape.backward(loss)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _tape_of(inputs: Iterable[Tensor]) -> Tape | None:
    tape = None
    for tensor in inputs:
        if tensor.recorded:
            if tape is None:
                tape = tensor.node.tape
            elif tensor.node.tape is not tape:
                raise exceptions.InvalidArgumentError("inputs", "tensors", "inputs belong to different tapes")
    return tape


def _result(op_kind: OpKinds, values: np.ndarray, inputs: tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    tape = _tape_of(inputs)
    if tape is None:
        return Tensor(values)
    return tape.record(op_kind, values, inputs, backward_fn)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op_kind: OpKinds, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise exceptions.ShapeMismatchError(op_kind.code, a.shape, b.shape) from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(OpKinds.ADD, a, b)
    return _result(OpKinds.ADD, a.values + b.values, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(OpKinds.SUB, a, b)
    return _result(OpKinds.SUB, a.values - b.values, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(OpKinds.MUL, a, b)
    return _result(OpKinds.MUL, a.values * b.values, (a, b),
                   lambda g: (_unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)))


def linear(x, weight, bias=None) -> Tensor:
    """
    Affine map over the last axis: ``x @ weight + bias``.

    :param x: (..., in) tensor.
    :param weight: (in, out) tensor.
    :param bias: (out,) tensor or :obj:`None`.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.ndim < 1 or x.shape[-1] != weight.shape[0]:
        raise exceptions.ShapeMismatchError(OpKinds.LINEAR.code, x.shape, weight.shape)
    out = x.values @ weight.values
    inputs: tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise exceptions.ShapeMismatchError(OpKinds.LINEAR.code, weight.shape, bias.shape)
        out = out + bias.values
        inputs = (x, weight, bias)

    def backward_fn(g):
        g2 = g.reshape(-1, weight.shape[1])
        x2 = x.values.reshape(-1, weight.shape[0])
        grads = [g @ weight.values.T, x2.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return _result(OpKinds.LINEAR, out, inputs, backward_fn)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.values)
    return _result(OpKinds.TANH, y, (x,), lambda g: (g * (1.0 - y * y),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.values > 0
    return _result(OpKinds.RELU, np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.values - x.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    return _result(OpKinds.SOFTMAX, y, (x,),
                   lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    return _result(OpKinds.SUM, x.values.sum(axis=axis, keepdims=keepdims), (x,),
                   lambda g: (_expand_reduced(g, x.shape, axis, keepdims),))


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.values.size if axis is None else x.shape[axis]
    return _result(OpKinds.MEAN, x.values.mean(axis=axis, keepdims=keepdims), (x,),
                   lambda g: (_expand_reduced(g, x.shape, axis, keepdims) / count,))


def max(x, axis: int) -> Tensor:  # noqa: A001
    """
    Max reduction over one axis; the gradient flows to the first maximal entry.
    """
    x = as_tensor(x)
    arg = np.expand_dims(np.argmax(x.values, axis=axis), axis)
    out = np.take_along_axis(x.values, arg, axis=axis).squeeze(axis)

    def backward_fn(g):
        grad = np.zeros_like(x.values)
        np.put_along_axis(grad, arg, np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _result(OpKinds.MAX, out, (x,), backward_fn)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    first = tensors[0]
    ax = axis % first.ndim
    for other in tensors[1:]:
        if other.ndim != first.ndim or any(a != b for i, (a, b) in enumerate(zip(first.shape, other.shape))
                                           if i != ax):
            raise exceptions.ShapeMismatchError(OpKinds.CONCAT.code, first.shape, other.shape)
    out = np.concatenate([t.values for t in tensors], axis=ax)
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    return _result(OpKinds.CONCAT, out, tensors, lambda g: np.split(g, bounds, axis=ax))


def gather(x, index) -> Tensor:
    """
    Row gather: ``out[...] = x[index[...]]``.

    :param x: (N, ...) tensor.
    :param index: integer array of any shape with entries in [0, N).
    """
    x = as_tensor(x)
    index = np.asarray(index)
    if index.size and not np.issubdtype(index.dtype, np.integer):
        raise exceptions.InvalidArgumentError("index", index.dtype, "gather indices must be integers")
    index = index.astype(np.int64)
    rows = x.shape[0]
    bad = (index < 0) | (index >= rows)
    if bad.any():
        raise exceptions.GatherIndexError(int(index[bad].flat[0]), rows)

    def backward_fn(g):
        grad = np.zeros_like(x.values)
        np.add.at(grad, index, g)
        return (grad,)

    return _result(OpKinds.GATHER, x.values[index], (x,), backward_fn)


def norm(x) -> Tensor:
    """
    Euclidean norm over the last axis, returned with a trailing axis of length 1.
    The gradient at the origin is taken as 0.
    """
    x = as_tensor(x)
    out = np.sqrt((x.values * x.values).sum(axis=-1, keepdims=True))
    positive = out > 0
    safe = np.where(positive, out, 1.0)
    return _result(OpKinds.NORM, out, (x,), lambda g: (g * x.values / safe * positive,))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.values.reshape(shape)
    except ValueError:
        raise exceptions.ShapeMismatchError(OpKinds.RESHAPE.code, x.shape, tuple(shape)) from None
    return _result(OpKinds.RESHAPE, out, (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.values, shape)
    except ValueError:
        raise exceptions.ShapeMismatchError(OpKinds.BROADCAST.code, x.shape, shape) from None
    return _result(OpKinds.BROADCAST, out, (x,), lambda g: (_unbroadcast(g, x.shape),))


_DISPATCH: dict[OpKinds, Callable[..., Tensor]] = {
    OpKinds.ADD: add,
    OpKinds.SUB: sub,
    OpKinds.MUL: mul,
    OpKinds.LINEAR: linear,
    OpKinds.TANH: tanh,
    OpKinds.RELU: relu,
    OpKinds.SOFTMAX: softmax,
    OpKinds.SUM: sum,
    OpKinds.MEAN: mean,
    OpKinds.MAX: max,
    OpKinds.CONCAT: lambda *tensors, axis=-1: concat(tensors, axis=axis),
    OpKinds.GATHER: gather,
    OpKinds.NORM: norm,
    OpKinds.RESHAPE: reshape,
    OpKinds.BROADCAST: broadcast_to,
}


def forward(op_kind: OpKinds, *inputs, **attributes) -> Tensor:
    """
    Applies an op by kind, e.g. ``forward(OpKinds.SOFTMAX, x, axis=1)``.
    """
    return _DISPATCH[op_kind](*inputs, **attributes)
