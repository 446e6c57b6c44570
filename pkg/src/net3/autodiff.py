"""Minimal reverse-mode differentiation over numpy arrays.

A :class:`GradientTape` records every primitive applied to the variables it
watches.  Each primitive stores its operands and a vector-Jacobian product;
:meth:`GradientTape.gradient` replays the record in reverse.

All primitives accept plain arrays as well as :class:`Var` objects.  With no
``Var`` among the inputs they simply return an array, so model code written
against these functions runs unchanged with or without a tape.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import mode_product as _mode_product
from .tensor import unfold

__all__ = [
    "Var",
    "GradientTape",
    "value_of",
    "add",
    "sub",
    "mul",
    "neg",
    "mode_product",
    "matmul",
    "transpose",
    "reshape",
    "einsum",
    "concat",
    "sigmoid",
    "tanh",
    "relu",
    "identity",
    "sum_squares",
    "activation",
]


class Var:
    """A value recorded on a tape."""

    __slots__ = ("value", "tape", "__weakref__")

    def __init__(self, value: np.ndarray, tape: "GradientTape"):
        self.value = value
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return take(self, index)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


class GradientTape:
    """Records primitives applied to watched arrays.

    >>> tape = GradientTape()
    >>> x = tape.watch(np.array([1.0, -2.0]))
    >>> tape.gradient(sum_squares(x), [x])[0]
    array([ 2., -4.])
    """

    def __init__(self):
        self._records: list[tuple[Var, tuple, Callable]] = []

    def watch(self, array) -> Var:
        return Var(np.asarray(array, dtype=np.float64), self)

    def record(self, value: np.ndarray, parents: tuple, vjp: Callable) -> Var:
        out = Var(value, self)
        self._records.append((out, parents, vjp))
        return out

    def __len__(self):
        return len(self._records)

    def gradient(self, target: Var, sources: Sequence[Var]) -> list[np.ndarray]:
        """Gradients of scalar ``target`` with respect to each source.

        Sources that ``target`` does not depend on receive zeros.
        """
        if not isinstance(target, Var) or target.tape is not self:
            raise ValueError("target was not recorded on this tape")
        if target.value.size != 1:
            raise ValueError("gradient target must be a scalar")
        for s in sources:
            if s.tape is not self:
                raise ValueError("source variable belongs to a different tape")
        grads: dict[int, np.ndarray] = {id(target): np.ones_like(target.value)}
        for out, parents, vjp in reversed(self._records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for parent, pg in zip(parents, vjp(g)):
                if pg is None or not isinstance(parent, Var):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        return [grads.get(id(s), np.zeros_like(s.value)) for s in sources]


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _tape_of(*args) -> GradientTape | None:
    tape = None
    for a in args:
        if isinstance(a, Var):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ValueError("operands recorded on different tapes")
    return tape


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    av, bv = value_of(a), value_of(b)
    out = av + bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(
        out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape))
    )


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    out = av - bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(
        out, (a, b), lambda g: (_unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape))
    )


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    out = av * bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def neg(a):
    return mul(a, -1.0)


def take(a, index):
    av = value_of(a)
    out = av[index]
    tape = _tape_of(a)
    if tape is None:
        return out

    def vjp(g):
        full = np.zeros_like(av)
        full[index] += g
        return (full,)

    return tape.record(np.array(out, dtype=np.float64), (a,), vjp)


def mode_product(x, u, m: int):
    xv, uv = value_of(x), value_of(u)
    out = _mode_product(xv, uv, m)
    tape = _tape_of(x, u)
    if tape is None:
        return out
    axis = m % xv.ndim
    return tape.record(
        out,
        (x, u),
        lambda g: (
            _mode_product(g, uv.T, axis) if isinstance(x, Var) else None,
            unfold(xv, axis) @ unfold(g, axis).T if isinstance(u, Var) else None,
        ),
    )


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    out = av @ bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a, axes=None):
    av = value_of(a)
    out = np.ascontiguousarray(np.transpose(av, axes))
    tape = _tape_of(a)
    if tape is None:
        return out
    inverse = None if axes is None else np.argsort(axes)
    return tape.record(out, (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a, shape):
    av = value_of(a)
    out = av.reshape(shape)
    tape = _tape_of(a)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g.reshape(av.shape),))


def einsum(subscripts: str, a, b):
    """Two-operand einsum ``'ab,bc->ac'``; every operand index must survive
    in the output or the other operand."""
    ins, out_sub = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    for s, other in ((sa, sb), (sb, sa)):
        if set(s) - set(out_sub) - set(other):
            raise ValueError(f"einsum '{subscripts}': index reduced within one operand")
    av, bv = value_of(a), value_of(b)
    out = np.einsum(subscripts, av, bv)
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(
        out,
        (a, b),
        lambda g: (
            np.einsum(f"{out_sub},{sb}->{sa}", g, bv) if isinstance(a, Var) else None,
            np.einsum(f"{out_sub},{sa}->{sb}", g, av) if isinstance(b, Var) else None,
        ),
    )


def concat(parts, axis: int = -1):
    values = [value_of(p) for p in parts]
    out = np.concatenate(values, axis=axis)
    tape = _tape_of(*parts)
    if tape is None:
        return out
    splits = np.cumsum([v.shape[axis] for v in values])[:-1]
    return tape.record(out, tuple(parts), lambda g: tuple(np.split(g, splits, axis=axis)))


def _logistic(v):
    # split by sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a):
    out = _logistic(value_of(a))
    tape = _tape_of(a)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(value_of(a))
    tape = _tape_of(a)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a):
    av = value_of(a)
    out = np.maximum(av, 0.0)
    tape = _tape_of(a)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (g * (av > 0),))


def identity(a):
    return a


_ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid, "identity": identity}


def activation(name: str):
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


def sum_squares(a):
    av = value_of(a)
    out = np.asarray(np.sum(av * av))
    tape = _tape_of(a)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (2.0 * g * av,))
