"""Reverse-mode differentiation over dense matrix operations.

Every value is a 2-D float64 array. Operations run eagerly, append a node
to the tape, and register the adjoint rule for that node. ``backward``
walks the nodes in descending id order, so each node is visited once
after all of its consumers.

>>> tape = Tape()
>>> x = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
>>> tape.backward(frobenius_sq(x))
>>> x.grad
array([[2., 4.],
       [6., 8.]])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .densemat import ContractError, ShapeError, as_matrix


class Var:
    """A matrix-valued node on a :class:`Tape`."""

    __slots__ = ("tape", "id", "value", "adjoint", "requires_grad")
    __array_priority__ = 1000  # keep numpy from hijacking mixed operators

    def __init__(self, tape: Tape, node_id: int, value: np.ndarray, requires_grad: bool):
        self.tape = tape
        self.id = node_id
        self.value = value
        self.adjoint: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self.adjoint is None:
            return np.zeros_like(self.value)
        return self.adjoint

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 value, got {self.value.shape}")
        return float(self.value[0, 0])

    @property
    def T(self) -> Var:
        return transpose(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self) -> str:
        return f"Var(id={self.id}, shape={self.value.shape})"


@dataclass
class _Node:
    kind: str
    parents: tuple[int, ...]
    backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]] | None


@dataclass
class Tape:
    """Append-only record of operations. Parents always precede children."""

    nodes: list[_Node] = field(default_factory=list)
    vars: list[Var] = field(default_factory=list)

    def _push(self, kind, value, parents=(), backward=None, requires_grad=False) -> Var:
        node_id = len(self.nodes)
        self.nodes.append(_Node(kind, tuple(p.id for p in parents), backward))
        v = Var(self, node_id, value, requires_grad)
        self.vars.append(v)
        return v

    def leaf(self, value, requires_grad: bool = True) -> Var:
        return self._push("leaf", as_matrix(value).copy(), requires_grad=requires_grad)

    def constant(self, value) -> Var:
        return self._push("constant", as_matrix(value))

    def record(self, kind: str, value: np.ndarray, parents: tuple[Var, ...], backward) -> Var:
        for p in parents:
            if p.tape is not self:
                raise ContractError("operands belong to different tapes")
        needs = any(p.requires_grad for p in parents)
        return self._push(kind, value, parents, backward if needs else None, needs)

    def backward(self, root: Var) -> None:
        """Populate ``adjoint`` on every node that ``root`` depends on."""
        if root.tape is not self:
            raise ContractError("root belongs to a different tape")
        if root.value.shape != (1, 1):
            raise ContractError(f"backward needs a scalar (1x1) root, got {root.value.shape}")
        for v in self.vars:
            v.adjoint = None
        root.adjoint = np.ones((1, 1))
        for node_id in range(root.id, -1, -1):
            v = self.vars[node_id]
            node = self.nodes[node_id]
            if v.adjoint is None or node.backward is None:
                continue
            contributions = node.backward(v.adjoint)
            for pid, c in zip(node.parents, contributions):
                parent = self.vars[pid]
                if c is None or not parent.requires_grad:
                    continue
                parent.adjoint = c if parent.adjoint is None else parent.adjoint + c


def _lift(tape: Tape, x) -> Var:
    if isinstance(x, Var):
        return x
    return tape.constant(x)


def _lift_pair(a, b) -> tuple[Tape, Var, Var]:
    """Lift both operands; a plain number is broadcast to the other's shape."""
    tape = _tape_of(a, b)
    if np.ndim(a) == 0 and not isinstance(a, Var):
        a = np.full(b.value.shape, float(a))
    if np.ndim(b) == 0 and not isinstance(b, Var):
        b = np.full(a.value.shape, float(b))
    return tape, _lift(tape, a), _lift(tape, b)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise ContractError("at least one operand must be a tape value")


def _same_shape(a: Var, b: Var, op: str) -> None:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


# ---------------------------------------------------------------------------
# recorded operations


def matmul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {av.shape} by {bv.shape}")

    def back(g):
        return (g @ bv.T if a.requires_grad else None,
                av.T @ g if b.requires_grad else None)

    return tape.record("matmul", av @ bv, (a, b), back)


def transpose(a: Var) -> Var:
    return a.tape.record("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def add(a, b) -> Var:
    tape, a, b = _lift_pair(a, b)
    _same_shape(a, b, "add")
    return tape.record("add", a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b) -> Var:
    tape, a, b = _lift_pair(a, b)
    _same_shape(a, b, "sub")
    return tape.record("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return a.tape.record("scale", a.value * c, (a,), lambda g: (g * c,))


def mul(a, b) -> Var:
    """Elementwise (Hadamard) product."""
    tape, a, b = _lift_pair(a, b)
    _same_shape(a, b, "mul")
    av, bv = a.value, b.value
    return tape.record("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scalar_mul(a: Var, s) -> Var:
    """Multiply matrix ``a`` by the 1x1 value ``s``."""
    tape = _tape_of(a, s)
    a, s = _lift(tape, a), _lift(tape, s)
    if s.value.shape != (1, 1):
        raise ShapeError(f"scalar_mul: expected 1x1 factor, got {s.value.shape}")
    av, sv = a.value, s.value[0, 0]

    def back(g):
        return g * sv, np.array([[np.sum(g * av)]])

    return tape.record("scalar_mul", av * sv, (a, s), back)


def power(a: Var, exponent: float) -> Var:
    """Elementwise power; used for scalar norms and their reciprocals."""
    exponent = float(exponent)
    av = a.value
    out = av ** exponent
    return a.tape.record("power", out, (a,), lambda g: (g * exponent * av ** (exponent - 1.0),))


def sum_all(a: Var) -> Var:
    shape = a.value.shape
    return a.tape.record("sum", np.array([[np.sum(a.value)]]), (a,),
                         lambda g: (np.full(shape, g[0, 0]),))


def mean(a: Var) -> Var:
    shape, n = a.value.shape, a.value.size
    return a.tape.record("mean", np.array([[np.mean(a.value)]]), (a,),
                         lambda g: (np.full(shape, g[0, 0] / n),))


def column_sums(a: Var) -> Var:
    """Sum over rows, giving a ``1 x cols`` row."""
    rows = a.value.shape[0]
    return a.tape.record("colsum", a.value.sum(axis=0, keepdims=True), (a,),
                         lambda g: (np.repeat(g, rows, axis=0),))


def frobenius_sq(a: Var) -> Var:
    av = a.value
    return a.tape.record("frobenius_sq", np.array([[np.sum(av * av)]]), (a,),
                         lambda g: (2.0 * g[0, 0] * av,))


def dot(u, v) -> Var:
    """Inner product of two same-shape values (vectors or matrices)."""
    tape = _tape_of(u, v)
    u, v = _lift(tape, u), _lift(tape, v)
    _same_shape(u, v, "dot")
    uv, vv = u.value, v.value
    return tape.record("dot", np.array([[np.sum(uv * vv)]]), (u, v),
                       lambda g: (g[0, 0] * vv, g[0, 0] * uv))


def pseudo_huber(a: Var, delta: float) -> Var:
    """Elementwise ``sqrt(x^2 + delta^2) - delta``."""
    if delta <= 0:
        raise ContractError("pseudo-Huber delta must be positive")
    av = a.value
    root = np.sqrt(av * av + delta * delta)
    return a.tape.record("pseudo_huber", root - delta, (a,), lambda g: (g * av / root,))


def gradient(f: Callable[[Var], Var], x) -> tuple[float, np.ndarray]:
    """Value and gradient of a scalar function of one matrix."""
    tape = Tape()
    leaf = tape.leaf(x)
    out = f(leaf)
    tape.backward(out)
    return out.item(), leaf.grad.copy()
