"""Forward-mode multi-dual numbers.

A :class:`Dual` is a truncated Taylor expansion in one or more independent
*groups* of infinitesimals.  Inside a group products vanish (first order in
that group); products across groups survive.  A number with two groups
therefore carries its value, one directional-derivative block per group and
the mixed second-derivative block, which is exactly what nesting two dual
numbers gives.  Seeding both groups with the same coordinate directions
yields the full Hessian.

Storage is array-like: every part holds the group axes first, followed by the
batch axes, so ``d[..., i, j]`` indexes a Dual the same way it would index a
plain ``ndarray``.  Tensor code written with indexing, broadcasting and
``sum`` runs unchanged on both.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


@lru_cache(maxsize=None)
def _submasks(mask: int) -> tuple[int, ...]:
    out = []
    sub = mask
    while True:
        out.append(sub)
        if sub == 0:
            break
        sub = (sub - 1) & mask
    return tuple(out)


@lru_cache(maxsize=None)
def _partitions(mask: int) -> tuple[tuple[int, ...], ...]:
    """All set partitions of the groups in ``mask``, as tuples of block masks."""
    if mask == 0:
        return ((),)
    low = mask & -mask
    rest = mask ^ low
    out = []
    for sub in _submasks(rest):
        block = low | sub
        for tail in _partitions(mask ^ block):
            out.append((block,) + tail)
    return tuple(out)


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


class Dual:
    """Array of multi-dual numbers.

    ``parts[mask]`` is the derivative block for the set of groups encoded by
    the bit ``mask``; ``None`` means an identically zero block.
    """

    __slots__ = ("parts", "sizes")
    __array_ufunc__ = None  # make ndarray defer to the reflected operators

    def __init__(self, parts: Sequence[np.ndarray | None], sizes: Sequence[int]):
        self.sizes = tuple(int(s) for s in sizes)
        if len(parts) != 1 << len(self.sizes):
            raise ValueError("number of parts does not match number of groups")
        value = np.asarray(parts[0], dtype=float)
        batch = value.shape
        fixed: list[np.ndarray | None] = [value]
        for mask in range(1, len(parts)):
            p = parts[mask]
            if p is not None:
                p = np.asarray(p, dtype=float)
                gs = self.gshape(mask)
                if p.shape != gs + batch:
                    p = np.broadcast_to(p, gs + batch)
            fixed.append(p)
        self.parts = fixed

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, sizes: Sequence[int]) -> "Dual":
        return cls([value] + [None] * ((1 << len(sizes)) - 1), sizes)

    @classmethod
    def seeded(cls, value, sizes: Sequence[int], firsts: dict[int, np.ndarray]) -> "Dual":
        """Dual with the given first-order blocks; all mixed blocks are zero."""
        parts: list = [value] + [None] * ((1 << len(sizes)) - 1)
        for group, block in firsts.items():
            parts[1 << group] = block
        return cls(parts, sizes)

    def gshape(self, mask: int) -> tuple[int, ...]:
        return tuple(s for g, s in enumerate(self.sizes) if mask >> g & 1)

    # -- array protocol ---------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.parts[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.parts[0].shape

    @property
    def ndim(self) -> int:
        return self.parts[0].ndim

    def part(self, mask: int) -> np.ndarray:
        p = self.parts[mask]
        if p is None:
            return np.zeros(self.gshape(mask) + self.shape)
        return p

    def __repr__(self) -> str:
        return f"Dual(value={self.value!r}, sizes={self.sizes})"

    def _map(self, fn) -> "Dual":
        out = []
        for mask, p in enumerate(self.parts):
            if p is None:
                out.append(None)
            else:
                k = _popcount(mask)
                out.append(fn(p, k))
        return Dual(out, self.sizes)

    def __getitem__(self, key) -> "Dual":
        if not isinstance(key, tuple):
            key = (key,)
        return self._map(lambda p, k: p[(slice(None),) * k + key])

    def sum(self, axis=None) -> "Dual":
        nd = self.ndim
        if axis is None:
            axis = tuple(range(-nd, 0))
        if isinstance(axis, int):
            axis = (axis,)
        axis = tuple(a - nd if a >= 0 else a for a in axis)
        return self._map(lambda p, k: p.sum(axis=axis))

    def swapaxes(self, a1: int, a2: int) -> "Dual":
        nd = self.ndim
        a1 = a1 - nd if a1 >= 0 else a1
        a2 = a2 - nd if a2 >= 0 else a2
        return self._map(lambda p, k: np.swapaxes(p, a1, a2))

    def linear(self, fn) -> "Dual":
        """Apply a linear map acting on the trailing batch axes to every part."""
        return self._map(lambda p, k: fn(p))

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "Dual":
        if isinstance(other, Dual):
            if other.sizes != self.sizes:
                raise ValueError(f"incompatible dual groups {self.sizes} vs {other.sizes}")
            return other
        return Dual.constant(other, self.sizes)

    def _lift(self, mask: int, target: int, nb: int) -> np.ndarray:
        p = self.parts[mask]
        k = _popcount(mask)
        batch = p.shape[k:]
        gs = tuple(
            self.sizes[g] if mask >> g & 1 else 1
            for g in range(len(self.sizes))
            if target >> g & 1
        )
        return p.reshape(gs + (1,) * (nb - len(batch)) + batch)

    def __add__(self, other) -> "Dual":
        if not isinstance(other, Dual):
            other = np.asarray(other, dtype=float)
            return Dual([self.parts[0] + other] + self.parts[1:], self.sizes)
        other = self._coerce(other)
        nb = max(self.ndim, other.ndim)
        out = []
        for mask in range(len(self.parts)):
            a, b = self.parts[mask], other.parts[mask]
            if a is None and b is None:
                out.append(None)
            elif a is None:
                out.append(b)
            elif b is None:
                out.append(a)
            else:
                out.append(self._lift(mask, mask, nb) + other._lift(mask, mask, nb))
        return Dual(out, self.sizes)

    __radd__ = __add__

    def __neg__(self) -> "Dual":
        return self._map(lambda p, k: -p)

    def __pos__(self) -> "Dual":
        return self

    def __sub__(self, other) -> "Dual":
        return self + (-other)

    def __rsub__(self, other) -> "Dual":
        return (-self) + other

    def __mul__(self, other) -> "Dual":
        if not isinstance(other, Dual):
            c = np.asarray(other, dtype=float)
            nb = max(self.ndim, c.ndim)
            out = []
            for mask, p in enumerate(self.parts):
                out.append(None if p is None else self._lift(mask, mask, nb) * c)
            return Dual(out, self.sizes)
        other = self._coerce(other)
        nb = max(self.ndim, other.ndim)
        out = []
        for mask in range(len(self.parts)):
            acc = None
            for t in _submasks(mask):
                a, b = self.parts[t], other.parts[mask ^ t]
                if a is None or b is None:
                    continue
                term = self._lift(t, mask, nb) * other._lift(mask ^ t, mask, nb)
                acc = term if acc is None else acc + term
            out.append(acc)
        return Dual(out, self.sizes)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Dual":
        if not isinstance(other, Dual):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0.0):
                raise DomainError("division by zero")
            return self * (1.0 / c)
        return self * power(other, -1.0)

    def __rtruediv__(self, other) -> "Dual":
        return power(self, -1.0) * other

    def __pow__(self, other) -> "Dual":
        if isinstance(other, Dual):
            return exp(other * log(self))
        return power(self, float(other))

    def __rpow__(self, other) -> "Dual":
        base = np.asarray(other, dtype=float)
        if np.any(base <= 0.0):
            raise DomainError("non-positive base with variable exponent")
        return exp(self * np.log(base))

    # -- elementary functions ---------------------------------------------

    def apply(self, derivs: Sequence[np.ndarray]) -> "Dual":
        """Compose with a scalar function given its derivatives at the value.

        ``derivs[k]`` is the k-th derivative evaluated at ``self.value``; one
        entry per order up to the number of groups is required.
        """
        nb = self.ndim
        out: list = [np.asarray(derivs[0], dtype=float)]
        for mask in range(1, len(self.parts)):
            acc = None
            for blocks in _partitions(mask):
                if any(self.parts[b] is None for b in blocks):
                    continue
                term = derivs[len(blocks)]
                for b in blocks:
                    term = term * self._lift(b, mask, nb)
                acc = term if acc is None else acc + term
            out.append(acc)
        return Dual(out, self.sizes)

    @property
    def order(self) -> int:
        return len(self.sizes)


# -- scalar function dispatch ----------------------------------------------


def _sin_derivs(v, n):
    s, c = np.sin(v), np.cos(v)
    cyc = (s, c, -s, -c)
    return [cyc[k % 4] for k in range(n + 1)]


def _cos_derivs(v, n):
    s, c = np.sin(v), np.cos(v)
    cyc = (c, -s, -c, s)
    return [cyc[k % 4] for k in range(n + 1)]


def _exp_derivs(v, n):
    e = np.exp(v)
    return [e] * (n + 1)


def _log_derivs(v, n):
    out = [np.log(v)]
    for k in range(1, n + 1):
        out.append((-1.0) ** (k - 1) * math.factorial(k - 1) / v**k)
    return out


def _tanh_derivs(v, n):
    t = np.tanh(v)
    poly = np.polynomial.Polynomial([0.0, 1.0])
    one_minus_sq = np.polynomial.Polynomial([1.0, 0.0, -1.0])
    out = []
    for _ in range(n + 1):
        out.append(poly(t))
        poly = poly.deriv() * one_minus_sq
    return out


def _power_derivs(v, c, n):
    out = []
    coef = 1.0
    integral = float(c).is_integer() and c >= 0
    for k in range(n + 1):
        if integral and k > c:
            out.append(np.zeros_like(v))
        else:
            out.append(coef * v ** (c - k))
        coef *= c - k
    return out


def _check_domain(name: str, v: np.ndarray, strict: bool) -> None:
    if name == "log" and np.any(v <= 0.0):
        raise DomainError("log of non-positive argument")
    if name == "sqrt":
        if np.any(v < 0.0):
            raise DomainError("sqrt of negative argument")
        if strict and np.any(v == 0.0):
            raise DomainError("sqrt is not differentiable at 0")


def _unary(name: str, derivs_fn, npfn):
    def fn(x):
        if isinstance(x, Dual):
            v = x.value
            _check_domain(name, v, strict=True)
            return x.apply(derivs_fn(v, x.order))
        v = np.asarray(x, dtype=float)
        _check_domain(name, v, strict=False)
        return npfn(v)

    fn.__name__ = name
    return fn


sin = _unary("sin", _sin_derivs, np.sin)
cos = _unary("cos", _cos_derivs, np.cos)
exp = _unary("exp", _exp_derivs, np.exp)
log = _unary("log", _log_derivs, np.log)
tanh = _unary("tanh", _tanh_derivs, np.tanh)
sqrt = _unary("sqrt", lambda v, n: _power_derivs(v, 0.5, n), np.sqrt)


def power(x, c: float):
    """``x ** c`` for a constant exponent."""
    c = float(c)
    v = x.value if isinstance(x, Dual) else np.asarray(x, dtype=float)
    if not c.is_integer() and np.any(v < 0.0):
        raise DomainError("negative base with non-integer exponent")
    if c < 0 and np.any(v == 0.0):
        raise DomainError("division by zero")
    if isinstance(x, Dual):
        if not c.is_integer() and c < x.order and np.any(v == 0.0):
            raise DomainError("power is not differentiable at 0")
        return x.apply(_power_derivs(v, c, x.order))
    return v**c


FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt, "tanh": tanh}


# -- array helpers ---------------------------------------------------------


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Dual) else np.asarray(x, dtype=float)


def stack(items: Sequence, axis: int = -1):
    """``np.stack`` that accepts Duals; ``axis`` counts batch axes from the end."""
    duals = [it for it in items if isinstance(it, Dual)]
    if not duals:
        return np.stack([np.asarray(it, dtype=float) for it in items], axis=axis)
    if axis >= 0:
        raise ValueError("stack axis must be negative")
    sizes = duals[0].sizes
    items = [it if isinstance(it, Dual) else Dual.constant(it, sizes) for it in items]
    for it in items:
        if it.sizes != sizes:
            raise ValueError("incompatible dual groups in stack")
    batch = np.broadcast_shapes(*(it.shape for it in items))
    out = []
    for mask in range(1 << len(sizes)):
        if all(it.parts[mask] is None for it in items):
            out.append(None)
            continue
        gs = items[0].gshape(mask)
        blocks = [np.broadcast_to(it.part(mask), gs + batch) for it in items]
        out.append(np.stack(blocks, axis=axis))
    return Dual(out, sizes)


def pullback(fn, inputs: Sequence, group: int = 0):
    """Evaluate ``fn(*inputs)`` with the derivative group ``group`` compressed.

    Instead of carrying ``group`` at its full width through ``fn``, every
    input gets a fresh unit seed in that group; the result is mapped back
    with the chain rule.  This is exact and pays off when ``fn`` is costly
    and has fewer inputs than the group has directions.  ``fn`` returns a
    sequence of Duals (or constants).
    """
    duals = [w for w in inputs if isinstance(w, Dual)]
    if not duals:
        return list(fn(*inputs))
    sizes = duals[0].sizes
    n = len(inputs)
    bit = 1 << group
    small = list(sizes)
    small[group] = n
    hats = []
    for k, w in enumerate(inputs):
        w = w if isinstance(w, Dual) else Dual.constant(w, sizes)
        parts: list = []
        for mask in range(1 << len(sizes)):
            if mask == bit:
                seed = np.zeros((n,) + w.shape)
                seed[k] = 1.0
                parts.append(seed)
            elif mask & bit:
                parts.append(None)
            else:
                parts.append(w.parts[mask])
        hats.append(Dual(parts, small))
    wide = [w if isinstance(w, Dual) else Dual.constant(w, sizes) for w in inputs]
    results = []
    for out in fn(*hats):
        if not isinstance(out, Dual):
            results.append(out)
            continue
        parts = []
        for mask in range(1 << len(sizes)):
            if not mask & bit:
                parts.append(out.parts[mask])
                continue
            rest = mask ^ bit
            acc = None
            for t in _submasks(rest):
                o = out.parts[bit | (rest ^ t)]
                if o is None:
                    continue
                for k, w in enumerate(wide):
                    wp = w.parts[bit | t]
                    if wp is None:
                        continue
                    # o: (n, dims of rest^t, batch); wp: (size, dims of t, batch)
                    ok = _relayout(o[k], sizes, rest ^ t, mask, group, absent=True)
                    wk = _relayout(wp, sizes, bit | t, mask, group, absent=False)
                    term = ok * wk
                    acc = term if acc is None else acc + term
            parts.append(acc)
        results.append(Dual(parts, sizes))
    return results


def _relayout(p: np.ndarray, sizes, have: int, target: int, group: int, absent: bool) -> np.ndarray:
    """Reshape a block holding groups ``have`` to the axis layout of ``target``."""
    k = _popcount(have)
    batch = p.shape[k:]
    gs = tuple(sizes[g] if have >> g & 1 else 1 for g in range(len(sizes)) if target >> g & 1)
    return p.reshape(gs + batch)
