"""A small reverse-mode gradient tape for the fixed set of ops the model uses.

Usage::

    tape = GradTape()
    w = tape.param("w", np.ones(3))
    loss = tsum(w * w)
    grads = backprop(tape, loss)   # {"w": 2 * w.value}

Each op records its output together with a closure mapping the output adjoint
to parent adjoints. ``backprop`` replays the record in reverse.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DegenerateError, ShapeError, UsageError
from . import numkernel as nk

_GELU_C = math.sqrt(2.0 / math.pi)


class Var:
    """A value living on a tape."""

    __slots__ = ("value", "tape", "index", "name")

    def __init__(self, value: np.ndarray, tape: "GradTape", index: int, name: str | None = None):
        self.value = value
        self.tape = tape
        self.index = index
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(_lift(self.tape, other)))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Var{tag}(shape={self.value.shape})"


class GradTape:
    """Ordered record of op applications for one forward computation."""

    def __init__(self):
        self.clear()

    def clear(self):
        self.values: list[Var] = []
        self.parents: list[tuple[int, ...]] = []
        self.backward: list[Callable | None] = []
        self.params: dict[str, Var] = {}

    def __len__(self):
        return len(self.values)

    def _push(self, value, parents, backward, name=None) -> Var:
        v = Var(value, self, len(self.values), name)
        self.values.append(v)
        self.parents.append(parents)
        self.backward.append(backward)
        return v

    def param(self, name: str, value) -> Var:
        if name in self.params:
            raise UsageError(f"parameter {name!r} already on tape")
        v = self._push(np.asarray(value, dtype=np.float64), (), None, name)
        self.params[name] = v
        return v

    def constant(self, value) -> Var:
        return self._push(np.asarray(value, dtype=np.float64), (), None)

    def record(self, value, parents: tuple[Var, ...], backward) -> Var:
        for p in parents:
            if p.tape is not self:
                raise UsageError("operands come from different tapes")
        return self._push(value, tuple(p.index for p in parents), backward)


def backprop(tape: GradTape, loss: Var) -> dict[str, np.ndarray]:
    """Adjoints of a scalar ``loss`` with respect to every parameter on ``tape``.

    Parameters the loss does not depend on get all-zero adjoints.
    """
    if not isinstance(loss, Var) or loss.tape is not tape or loss.index >= len(tape) \
            or tape.values[loss.index] is not loss:
        raise UsageError("loss is not recorded on this tape")
    if loss.value.size != 1:
        raise UsageError(f"loss must be scalar, got shape {loss.value.shape}")
    adj: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
    for i in range(loss.index, -1, -1):
        g = adj.pop(i, None)
        if g is None or tape.backward[i] is None:
            if g is not None:
                adj[i] = g  # leaf: keep for collection
            continue
        grads = tape.backward[i](g)
        for pi, pg in zip(tape.parents[i], grads):
            if pg is None:
                continue
            if pi in adj:
                adj[pi] = adj[pi] + pg
            else:
                adj[pi] = pg
    out = {}
    for name, v in tape.params.items():
        g = adj.get(v.index)
        out[name] = np.zeros_like(v.value) if g is None else np.asarray(g, dtype=np.float64).reshape(v.value.shape)
    return out


def _lift(tape: GradTape, x) -> Var:
    return x if isinstance(x, Var) else tape.constant(x)


def _tape_of(*xs) -> GradTape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise UsageError("at least one operand must be a tape variable")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    sa, sb = a.shape, b.shape
    return tape.record(a.value + b.value, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Var) -> Var:
    return a.tape.record(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value

    def back(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return tape.record(av * bv, (a, b), back)


def scale(a: Var, c: float) -> Var:
    return a.tape.record(a.value * c, (a,), lambda g: (g * c,))


def tsum(a: Var) -> Var:
    shape = a.shape
    return a.tape.record(np.asarray(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def gelu(a: Var) -> Var:
    x = a.value
    x2 = x * x
    inner = _GELU_C * x * (1.0 + 0.044715 * x2)
    th = np.tanh(inner)
    y = 0.5 * x * (1.0 + th)

    def back(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * dinner),)

    return a.tape.record(y, (a,), back)


# ---------------------------------------------------------------- structural

def reshape(a: Var, shape) -> Var:
    old = a.shape
    return a.tape.record(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Var, axes) -> Var:
    inv = np.argsort(axes)
    return a.tape.record(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inv),))


def take_rows(table: Var, ids) -> Var:
    """Embedding lookup ``table[ids]`` for an integer index array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    shape = table.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, shape[-1]))
        return (out,)

    return table.tape.record(table.value[ids], (table,), back)


def gather(h: Var, batch_idx, pos_idx) -> Var:
    """Rows ``h[batch_idx[k], pos_idx[k], :]`` stacked into a ``(K, d)`` matrix."""
    bi = np.asarray(batch_idx, dtype=np.int64)
    pi = np.asarray(pos_idx, dtype=np.int64)
    shape = h.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, (bi, pi), g)
        return (out,)

    return h.tape.record(h.value[bi, pi], (h,), back)


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"cannot multiply {av.shape} by {bv.shape}")

    def back(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        if bv.ndim == 2 and av.ndim > 2:
            gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape)
        return _unbroadcast(ga, av.shape), gb

    return tape.record(av @ bv, (a, b), back)


def masked_softmax(a: Var, mask) -> Var:
    y = nk.masked_softmax(a.value, mask)

    def back(g):
        return (y * (g - np.sum(g * y, axis=-1, keepdims=True)),)

    return a.tape.record(y, (a,), back)


def rms_norm(x: Var, gain: Var, eps: float = nk.RMS_EPS) -> Var:
    xv, gv = x.value, gain.value
    if gv.shape != (xv.shape[-1],):
        raise ShapeError(f"gain {gv.shape} does not match row width {xv.shape[-1]}")
    inv = 1.0 / np.sqrt(np.mean(xv * xv, axis=-1, keepdims=True) + eps)
    normed = xv * inv

    def back(g):
        gy = g * gv
        gx = inv * (gy - normed * np.mean(gy * normed, axis=-1, keepdims=True))
        ggain = (g * normed).reshape(-1, gv.shape[0]).sum(axis=0)
        return gx, ggain

    return x.tape.record(normed * gv, (x, gain), back)


def l2_normalize(a: Var) -> Var:
    """Scale each row to unit Euclidean norm."""
    av = a.value
    norm = np.sqrt(np.sum(av * av, axis=-1, keepdims=True))
    if np.any(norm == 0.0):
        raise DegenerateError("cannot normalise a zero-norm row")
    y = av / norm

    def back(g):
        return ((g - y * np.sum(g * y, axis=-1, keepdims=True)) / norm,)

    return a.tape.record(y, (a,), back)


# ---------------------------------------------------------------- losses

def log_softmax_rows(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Var, targets, weights) -> Var:
    """``sum_r weights[r] * -log softmax(logits[r])[targets[r]]`` for 2-d logits."""
    z = logits.value
    if z.ndim != 2:
        raise ShapeError(f"cross_entropy expects 2-d logits, got {z.shape}")
    t = np.asarray(targets, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if t.shape != (z.shape[0],) or w.shape != (z.shape[0],):
        raise ShapeError(f"targets {t.shape} / weights {w.shape} do not match {z.shape[0]} rows")
    logp = log_softmax_rows(z)
    rows = np.arange(z.shape[0])
    loss = -np.sum(w * logp[rows, t])

    def back(g):
        p = np.exp(logp)
        p[rows, t] -= 1.0
        return (g * w[:, None] * p,)

    return logits.tape.record(np.asarray(loss), (logits,), back)
