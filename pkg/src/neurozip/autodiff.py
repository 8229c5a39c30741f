"""Tape-based reverse-mode automatic differentiation over dense float64 matrices.

Every value is a 2-D ``numpy`` array (scalars are 1x1). Binary elementwise
ops accept operands of equal shape, or one 1x1 operand which is broadcast;
nothing else broadcasts.

    >>> tape = Tape()
    >>> w = tape.param(3.0)
    >>> loss = (w * w).sum()
    >>> backward(loss)[w]
    array([[6.]])

The module-level helpers (``tanh``, ``relu``, ``square``, ``mean`` ...) accept
either a :class:`Node` or a plain number/array, so model code can be written
once and run both on a tape and on raw ``numpy`` values.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Mapping

import numpy as np

from .errors import ContractError, DimensionError

# op name -> multiplier applied to that op's backward pass; test-only negative control
_GRAD_SCALE: dict[str, float] = {}


def _as_matrix(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim > 2:
        raise DimensionError(f"only scalars and matrices are supported, got shape {arr.shape}")
    return np.atleast_2d(arr)


class Node:
    """One recorded value on a :class:`Tape`."""

    __slots__ = ("value", "grad", "op", "parents", "tape", "requires_grad", "name", "_vjp")

    # make ``ndarray <op> Node`` dispatch to the reflected Node operator
    __array_ufunc__ = None

    def __init__(self, tape, value, op, parents=(), vjp=None, requires_grad=False, name=None):
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.requires_grad = requires_grad
        self.name = name
        self._vjp = vjp
        self.grad = np.zeros_like(value) if requires_grad else None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() needs a 1x1 node, got shape {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node({self.op}{label}, shape={self.value.shape})"

    # identity semantics: nodes key the gradient table
    __hash__ = object.__hash__

    def __add__(self, other):
        return self.tape.add(self, other)

    def __radd__(self, other):
        return self.tape.add(other, self)

    def __sub__(self, other):
        return self.tape.sub(self, other)

    def __rsub__(self, other):
        return self.tape.sub(other, self)

    def __mul__(self, other):
        return self.tape.mul(self, other)

    def __rmul__(self, other):
        return self.tape.mul(other, self)

    def __matmul__(self, other):
        return self.tape.matmul(self, other)

    def __rmatmul__(self, other):
        return self.tape.matmul(other, self)

    def __neg__(self):
        return self.tape.neg(self)

    def __truediv__(self, other):
        if isinstance(other, Node):
            raise ContractError("division is only supported by a nonzero constant")
        return self.tape.div_const(self, other)

    def __pow__(self, exponent):
        if exponent != 2:
            raise ContractError("only the square (power 2) is supported")
        return self.tape.square(self)

    def tanh(self):
        return self.tape.tanh(self)

    def relu(self):
        return self.tape.relu(self)

    def sin(self):
        return self.tape.sin(self)

    def cos(self):
        return self.tape.cos(self)

    def abs(self):
        return self.tape.abs(self)

    def square(self):
        return self.tape.square(self)

    def sum(self):
        return self.tape.sum(self)

    def mean(self):
        return self.tape.mean(self)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    return np.full(shape, grad.sum())


def _broadcast_shape(a, b, op):
    if a.shape == b.shape:
        return a.shape
    if a.shape == (1, 1):
        return b.shape
    if b.shape == (1, 1):
        return a.shape
    raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


class Tape:
    """Append-only record of nodes; creation order is a topological order.

    With ``requires_grad=False`` parameters are recorded as plain constants,
    which makes the tape a cheap forward-only evaluator.
    """

    def __init__(self, requires_grad: bool = True):
        self.nodes: list[Node] = []
        self.requires_grad = requires_grad
        self.backpropagated = False

    def __len__(self):
        return len(self.nodes)

    def _lift(self, x) -> Node:
        if isinstance(x, Node):
            if x.tape is not self:
                raise ContractError("cannot combine nodes from different tapes")
            return x
        return self.const(x)

    def _record(self, value, op, parents, vjp) -> Node:
        needs = any(p.requires_grad for p in parents)
        node = Node(self, value, op, parents, vjp if needs else None, needs)
        self.nodes.append(node)
        return node

    def param(self, value, name: str | None = None) -> Node:
        node = Node(self, _as_matrix(value), "param", requires_grad=self.requires_grad, name=name)
        self.nodes.append(node)
        return node

    def const(self, value) -> Node:
        node = Node(self, _as_matrix(value), "const")
        self.nodes.append(node)
        return node

    def zero_grad(self):
        for node in self.nodes:
            if node.requires_grad:
                node.grad.fill(0.0)
        self.backpropagated = False

    # primitives

    def add(self, a, b):
        a, b = self._lift(a), self._lift(b)
        _broadcast_shape(a.value, b.value, "add")
        return self._record(
            a.value + b.value, "add", (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

    def sub(self, a, b):
        a, b = self._lift(a), self._lift(b)
        _broadcast_shape(a.value, b.value, "sub")
        return self._record(
            a.value - b.value, "sub", (a, b),
            lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))

    def mul(self, a, b):
        a, b = self._lift(a), self._lift(b)
        _broadcast_shape(a.value, b.value, "mul")
        av, bv = a.value, b.value
        return self._record(
            av * bv, "mul", (a, b),
            lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))

    def matmul(self, a, b):
        a, b = self._lift(a), self._lift(b)
        if a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        av, bv = a.value, b.value
        return self._record(av @ bv, "matmul", (a, b), lambda g: (g @ bv.T, av.T @ g))

    def neg(self, a):
        a = self._lift(a)
        return self._record(-a.value, "neg", (a,), lambda g: (-g,))

    def square(self, a):
        a = self._lift(a)
        av = a.value
        return self._record(av * av, "square", (a,), lambda g: (2.0 * av * g,))

    def div_const(self, a, c):
        a = self._lift(a)
        c = float(c)
        if c == 0.0:
            raise ContractError("division by zero constant")
        return self._record(a.value / c, "div_const", (a,), lambda g: (g / c,))

    def tanh(self, a):
        a = self._lift(a)
        y = np.tanh(a.value)
        return self._record(y, "tanh", (a,), lambda g: ((1.0 - y * y) * g,))

    def relu(self, a):
        a = self._lift(a)
        av = a.value
        # derivative 0 at exactly 0
        return self._record(np.maximum(av, 0.0), "relu", (a,), lambda g: (g * (av > 0.0),))

    def sin(self, a):
        a = self._lift(a)
        av = a.value
        return self._record(np.sin(av), "sin", (a,), lambda g: (np.cos(av) * g,))

    def cos(self, a):
        a = self._lift(a)
        av = a.value
        return self._record(np.cos(av), "cos", (a,), lambda g: (-np.sin(av) * g,))

    def abs(self, a):
        a = self._lift(a)
        av = a.value
        return self._record(np.abs(av), "abs", (a,), lambda g: (np.sign(av) * g,))

    def sum(self, a):
        a = self._lift(a)
        shape = a.shape
        return self._record(
            np.array([[a.value.sum()]]), "sum", (a,), lambda g: (np.full(shape, g[0, 0]),))

    def mean(self, a):
        a = self._lift(a)
        shape, n = a.shape, a.value.size
        if n == 0:
            raise ContractError("mean of an empty matrix")
        return self._record(
            np.array([[a.value.mean()]]), "mean", (a,), lambda g: (np.full(shape, g[0, 0] / n),))


def backward(loss: Node) -> dict[Node, np.ndarray]:
    """Backpropagate from a 1x1 ``loss``; return ``{param node: gradient}``.

    Parameters that ``loss`` does not depend on get a zero gradient. A second
    call on the same tape raises unless :meth:`Tape.zero_grad` ran in between.
    """
    if loss.value.shape != (1, 1):
        raise ContractError(f"backward needs a scalar (1x1) loss, got shape {loss.value.shape}")
    tape = loss.tape
    if tape.backpropagated:
        raise ContractError("tape already backpropagated; call zero_grad() before reuse")
    tape.backpropagated = True
    if loss.requires_grad:
        loss.grad += 1.0
        for node in reversed(tape.nodes):
            if node._vjp is None:
                continue
            parent_grads = node._vjp(node.grad)
            scale = _GRAD_SCALE.get(node.op)
            for parent, g in zip(node.parents, parent_grads):
                if parent.requires_grad:
                    parent.grad += g if scale is None else scale * g
    return {n: n.grad.copy() for n in tape.nodes if n.op == "param" and n.requires_grad}


@contextlib.contextmanager
def corrupted(op: str, factor: float = 1.1):
    """Temporarily scale the backward pass of primitive ``op`` (negative control)."""
    previous = _GRAD_SCALE.get(op)
    _GRAD_SCALE[op] = factor
    try:
        yield
    finally:
        if previous is None:
            _GRAD_SCALE.pop(op, None)
        else:
            _GRAD_SCALE[op] = previous


# numpy-or-node helpers

def tanh(x):
    return x.tanh() if isinstance(x, Node) else np.tanh(x)


def relu(x):
    return x.relu() if isinstance(x, Node) else np.maximum(x, 0.0)


def sin(x):
    return x.sin() if isinstance(x, Node) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Node) else np.cos(x)


def absolute(x):
    return x.abs() if isinstance(x, Node) else np.abs(x)


def square(x):
    return x.square() if isinstance(x, Node) else x * x


def total(x):
    return x.sum() if isinstance(x, Node) else np.sum(x)


def mean(x):
    return x.mean() if isinstance(x, Node) else np.mean(x)


def value_of(x):
    """Float or array behind ``x`` (a node, number, or array)."""
    if isinstance(x, Node):
        return x.item() if x.value.size == 1 else x.value
    return x


LossFn = Callable[[Tape, Mapping[str, Node]], Node]


def _evaluate(fn: LossFn, params: Mapping[str, np.ndarray]) -> float:
    tape = Tape(requires_grad=False)
    leaves = {k: tape.param(v, name=k) for k, v in params.items()}
    return fn(tape, leaves).item()


def analytic_gradients(fn: LossFn, params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    tape = Tape()
    leaves = {k: tape.param(v, name=k) for k, v in params.items()}
    grads = backward(fn(tape, leaves))
    return {k: grads[leaf] for k, leaf in leaves.items()}


GRAD_SCALE_FLOOR = 1e-8


def gradient_errors(fn: LossFn, params: Mapping[str, np.ndarray], epsilon: float = 1e-5):
    """Per-parameter relative error of analytic vs central-difference gradients.

    Each named parameter is compared as a whole:
    ``max|analytic - fd| / max(max|fd|, 1e-8)``. For a 1x1 parameter this is the
    plain scalar relative error. The floor sits above central-difference
    rounding noise, so gradients that are zero up to rounding compare as equal.
    """
    if epsilon <= 0:
        raise ContractError("epsilon must be positive")
    base = {k: _as_matrix(v) for k, v in params.items()}
    analytic = analytic_gradients(fn, base)
    errors = {}
    for name, value in base.items():
        fd = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + epsilon
            f_plus = _evaluate(fn, base)
            value[idx] = orig - epsilon
            f_minus = _evaluate(fn, base)
            value[idx] = orig
            fd[idx] = (f_plus - f_minus) / (2.0 * epsilon)
        scale = max(float(np.max(np.abs(fd))), GRAD_SCALE_FLOOR)
        errors[name] = float(np.max(np.abs(analytic[name] - fd)) / scale)
    return errors


def finite_difference_check(fn: LossFn, params: Mapping[str, np.ndarray], epsilon: float = 1e-5) -> float:
    """Largest relative gradient error over all parameters (see :func:`gradient_errors`)."""
    errors = gradient_errors(fn, params, epsilon)
    return max(errors.values(), default=0.0)
