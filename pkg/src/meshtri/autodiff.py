"""Minimal reverse-mode automatic differentiation over numpy arrays.

Supports exactly the operations the body model and fitting cost are built
from: broadcast arithmetic, (batched) matmul, reshape/indexing/stacking,
reductions, exp/sqrt, cross products, and the two analytic coefficient
functions of the axis-angle rotation formula. Graphs are built define-by-run;
:func:`backward` accumulates gradients into every reachable leaf.

A tape (graph) belongs to one evaluation; Vars are not thread-safe, but
independent graphs may be built and differentiated concurrently.
"""

from __future__ import annotations

import numpy as np


class Var:
    """One node of the computation graph: a value plus its backward closure."""

    __slots__ = ("value", "parents", "vjp", "grad")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value + b.value, (a, b))
    out.vjp = lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape))
    return out


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value - b.value, (a, b))
    out.vjp = lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape))
    return out


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value * b.value, (a, b))
    out.vjp = lambda g: (
        _unbroadcast(g * b.value, a.value.shape),
        _unbroadcast(g * a.value, b.value.shape),
    )
    return out


def div(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value / b.value, (a, b))
    out.vjp = lambda g: (
        _unbroadcast(g / b.value, a.value.shape),
        _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape),
    )
    return out


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    out = Var(av @ bv, (a, b))
    if av.ndim == 1 and bv.ndim >= 2:
        # (n,) @ (..., n, m)
        out.vjp = lambda g: (
            _unbroadcast((np.expand_dims(g, -2) @ np.swapaxes(bv, -1, -2)).squeeze(-2), av.shape),
            _unbroadcast(av[:, None] * np.expand_dims(g, -2), bv.shape),
        )
    elif bv.ndim == 1 and av.ndim >= 2:
        # (..., n, m) @ (m,)
        out.vjp = lambda g: (
            _unbroadcast(np.expand_dims(g, -1) * np.expand_dims(bv, -2), av.shape),
            _unbroadcast(np.swapaxes(av, -1, -2) @ g if av.ndim == 2 else
                         (np.swapaxes(av, -1, -2) @ np.expand_dims(g, -1)).squeeze(-1), bv.shape),
        )
    else:
        out.vjp = lambda g: (
            _unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape),
            _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape),
        )
    return out


def reshape(a, shape) -> Var:
    a = as_var(a)
    out = Var(a.value.reshape(shape), (a,))
    out.vjp = lambda g: (g.reshape(a.value.shape),)
    return out


def _is_fancy(idx) -> bool:
    if isinstance(idx, (np.ndarray, list)):
        return True
    if isinstance(idx, tuple):
        return any(isinstance(i, (np.ndarray, list)) for i in idx)
    return False


def getitem(a, idx) -> Var:
    a = as_var(a)
    out = Var(a.value[idx], (a,))
    fancy = _is_fancy(idx)  # fancy indices may repeat: scatter must accumulate

    def vjp(g):
        full = np.zeros_like(a.value)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] += g
        return (full,)

    out.vjp = vjp
    return out


def concat(vars_, axis=0) -> Var:
    vars_ = [as_var(v) for v in vars_]
    out = Var(np.concatenate([v.value for v in vars_], axis=axis), tuple(vars_))
    sizes = [v.value.shape[axis] for v in vars_]
    splits = np.cumsum(sizes)[:-1]
    out.vjp = lambda g: tuple(np.split(g, splits, axis=axis))
    return out


def stack(vars_, axis=0) -> Var:
    vars_ = [as_var(v) for v in vars_]
    out = Var(np.stack([v.value for v in vars_], axis=axis), tuple(vars_))
    out.vjp = lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(vars_)))
    return out


def sum_(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    out = Var(a.value.sum(axis=axis, keepdims=keepdims), (a,))

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.value.shape).copy(),)

    out.vjp = vjp
    return out


def exp(a) -> Var:
    a = as_var(a)
    ev = np.exp(a.value)
    out = Var(ev, (a,))
    out.vjp = lambda g: (g * ev,)
    return out


def sqrt(a) -> Var:
    a = as_var(a)
    sv = np.sqrt(a.value)
    out = Var(sv, (a,))
    out.vjp = lambda g: (g * 0.5 / sv,)
    return out


def square(a) -> Var:
    a = as_var(a)
    out = Var(a.value * a.value, (a,))
    out.vjp = lambda g: (g * 2.0 * a.value,)
    return out


def dot(a, b) -> Var:
    """Full contraction of two same-shape arrays."""
    return sum_(mul(a, b))


def cross3(a, b) -> Var:
    """Cross product of two 3-vectors."""
    a, b = as_var(a), as_var(b)
    out = Var(np.cross(a.value, b.value), (a, b))
    out.vjp = lambda g: (np.cross(b.value, g), np.cross(g, a.value))
    return out


def normalize3(a) -> Var:
    """a / ||a|| for a 3-vector."""
    return div(a, sqrt(sum_(square(a))))


# Analytic coefficients of the axis-angle rotation formula
#   R = I + f_a(s) * K + f_b(s) * K @ K,   s = ||aa||^2, K = skew(aa).
# Both are entire functions of s, so the series branch keeps them (and their
# derivatives) smooth through s = 0.
_SERIES_CUTOFF = 1e-2


def _coeff_a_value(s: np.ndarray) -> np.ndarray:
    u = np.sqrt(np.maximum(s, _SERIES_CUTOFF))
    closed = np.sin(u) / u
    series = 1.0 - s / 6.0 + s**2 / 120.0 - s**3 / 5040.0 + s**4 / 362880.0
    return np.where(s < _SERIES_CUTOFF, series, closed)


def _coeff_a_deriv(s: np.ndarray) -> np.ndarray:
    u = np.sqrt(np.maximum(s, _SERIES_CUTOFF))
    closed = (u * np.cos(u) - np.sin(u)) / (2.0 * u**3)
    series = -1.0 / 6.0 + s / 60.0 - s**2 / 1680.0 + s**3 / 90720.0
    return np.where(s < _SERIES_CUTOFF, series, closed)


def _coeff_b_value(s: np.ndarray) -> np.ndarray:
    u = np.sqrt(np.maximum(s, _SERIES_CUTOFF))
    closed = (1.0 - np.cos(u)) / (u * u)
    series = 0.5 - s / 24.0 + s**2 / 720.0 - s**3 / 40320.0 + s**4 / 3628800.0
    return np.where(s < _SERIES_CUTOFF, series, closed)


def _coeff_b_deriv(s: np.ndarray) -> np.ndarray:
    u = np.sqrt(np.maximum(s, _SERIES_CUTOFF))
    closed = (u * np.sin(u) - 2.0 * (1.0 - np.cos(u))) / (2.0 * u**4)
    series = -1.0 / 24.0 + s / 360.0 - s**2 / 13440.0 + s**3 / 907200.0
    return np.where(s < _SERIES_CUTOFF, series, closed)


def rot_coeff_a(s) -> Var:
    s = as_var(s)
    out = Var(_coeff_a_value(s.value), (s,))
    out.vjp = lambda g: (g * _coeff_a_deriv(s.value),)
    return out


def rot_coeff_b(s) -> Var:
    s = as_var(s)
    out = Var(_coeff_b_value(s.value), (s,))
    out.vjp = lambda g: (g * _coeff_b_deriv(s.value),)
    return out


def skew3(a) -> Var:
    """Skew-symmetric 3x3 matrix of a 3-vector (linear map)."""
    a = as_var(a)
    x, y, z = a.value[0], a.value[1], a.value[2]
    m = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    out = Var(m, (a,))
    out.vjp = lambda g: (
        np.array([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]]),
    )
    return out


def _topo_order(root: Var) -> list[Var]:
    order: list[Var] = []
    visited: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(root: Var, seed: np.ndarray | None = None) -> None:
    """Accumulate d(root)/d(leaf) into .grad of every node reachable from root."""
    order = _topo_order(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.value) if seed is None else np.asarray(seed, dtype=np.float64)
    for node in reversed(order):
        if node.grad is None or node.vjp is None:
            continue
        grads = node.vjp(node.grad)
        for parent, g in zip(node.parents, grads):
            if g is None:
                continue
            if parent.grad is None:
                parent.grad = np.array(g, dtype=np.float64, copy=True)
            else:
                parent.grad = parent.grad + g
