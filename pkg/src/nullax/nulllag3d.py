"""Null Lagrangians for three-dimensional Cosserat bodies.

Thirty-six potentials of (x, y, theta) generate 84 coefficient functions.
Contracting those with the minors of F = grad chi and G = grad theta gives a
Lagrangian whose Euler-Lagrange equations hold identically; it is the
divergence of an explicit vector field P.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Callable, Mapping

import numpy as np

from . import tensor as T
from .dual import Dual, stack
from .expr import (
    STATE_VARS,
    T_VARS,
    X_VARS,
    Y_VARS,
    ExprSyntaxError,
    FieldSpec,
    ScalarField,
    as_field,
    broadcast_result,
    eval_jet,
    field_jet,
    parse,
)

PERMS = ((0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0), (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0))


def _eps_pairs(a: int):
    """(b, c, sign) with eps_abc = sign != 0."""
    return [(j, k, s) for i, j, k, s in PERMS if i == a]


_ZERO = ScalarField.constant(0.0)


def _vec(items, n=3):
    items = list(items) if items is not None else []
    items += [0.0] * (n - len(items))
    return tuple(as_field(f) for f in items)


def _mat(rows):
    rows = list(rows) if rows is not None else []
    rows += [[]] * (3 - len(rows))
    return tuple(_vec(r) for r in rows)


@dataclass(frozen=True)
class PotentialSet3D:
    """The 36 potentials L_A, M_i, Mt_a, K_iA, Kt_aA, H_aj (0-based storage)."""

    L: tuple = ()
    M: tuple = ()
    Mt: tuple = ()
    K: tuple = ()
    Kt: tuple = ()
    H: tuple = ()

    def __post_init__(self):
        for name in ("L", "M", "Mt"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        for name in ("K", "Kt", "H"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        for f in self.all_fields():
            bad = f.variables - set(STATE_VARS)
            if bad:
                raise ValueError(f"potentials may only depend on x, y, t variables; got {sorted(bad)}")

    def all_fields(self):
        out = list(self.L) + list(self.M) + list(self.Mt)
        for m in (self.K, self.Kt, self.H):
            out += [f for row in m for f in row]
        return out

    @classmethod
    def zero(cls) -> "PotentialSet3D":
        return cls()

    @classmethod
    def from_text(cls, text: str) -> "PotentialSet3D":
        entries = parse_assignments(text, {"L": 1, "M": 1, "Mt": 1, "K": 2, "Kt": 2, "H": 2}, STATE_VARS)
        vecs = {n: [0.0] * 3 for n in ("L", "M", "Mt")}
        mats = {n: [[0.0] * 3 for _ in range(3)] for n in ("K", "Kt", "H")}
        for (name, idx), f in entries.items():
            if len(idx) == 1:
                vecs[name][idx[0]] = f
            else:
                mats[name][idx[0]][idx[1]] = f
        return cls(**vecs, **mats)

    def evaluate(self, env: Mapping[str, object], batch: tuple, sizes=None) -> dict:
        """Potential values as arrays (or Duals) keyed by name."""

        def ev(f):
            return broadcast_result(f.evaluate(env), batch, sizes)

        out = {n: stack([ev(f) for f in getattr(self, n)], axis=-1) for n in ("L", "M", "Mt")}
        for n in ("K", "Kt", "H"):
            out[n] = T.matrix([[ev(f) for f in row] for row in getattr(self, n)])
        return out


_ASSIGN = re.compile(r"^\s*([A-Za-z]+)\s*\[\s*([0-9\s,]+)\]\s*=(.*)$")


def parse_assignments(text: str, shapes: Mapping[str, int], variables, index_max: int | Mapping[str, int] = 3) -> dict:
    """Parse ``Name[i] = expr`` / ``Name[i,j] = expr`` lines (1-based indices).

    Returns ``{(name, zero_based_index_tuple): ScalarField}``.  ``#`` starts a
    comment; blank lines are ignored.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _ASSIGN.match(line)
        if not m:
            raise ExprSyntaxError(f"line {lineno}: expected 'Name[index] = expression'", line, 0)
        name, idx_text, rhs = m.group(1), m.group(2), m.group(3)
        if name not in shapes:
            raise ExprSyntaxError(f"line {lineno}: unknown potential {name!r}", line, m.start(1))
        try:
            idx = tuple(int(s) - 1 for s in idx_text.split(","))
        except ValueError:
            raise ExprSyntaxError(f"line {lineno}: bad index {idx_text!r}", line, m.start(2)) from None
        hi = index_max[name] if isinstance(index_max, Mapping) else index_max
        if len(idx) != shapes[name] or any(not 0 <= i < hi for i in idx):
            raise ExprSyntaxError(f"line {lineno}: index out of range for {name}", line, m.start(2))
        try:
            out[(name, idx)] = parse(rhs, variables)
        except ExprSyntaxError as e:
            raise type(e)(f"line {lineno}: {e.message}", line, m.start(3) + e.offset) from None
    return out


# -- coefficient relations ---------------------------------------------------


@dataclass
class CoefficientSet3D:
    A: object
    D: object
    Dt: object
    B: object
    C: object
    Bt: object
    Ct: object
    Bh: object
    Ch: object
    J: object

    @classmethod
    def zero(cls, batch=()) -> "CoefficientSet3D":
        s = np.zeros(tuple(batch))
        m = np.zeros(tuple(batch) + (3, 3))
        return cls(s, s, s, m, m, m, m, m, m, np.zeros(tuple(batch) + (3, 3, 3)))

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def _relations(p: PotentialSet3D, d: Callable, zero):
    """The coefficient relations, written once for any partial-derivative rule.

    ``d(f, var)`` returns the partial derivative of potential ``f`` with
    respect to the named variable.  Results are nested lists.
    """
    x, y, t = X_VARS, Y_VARS, T_VARS
    L, M, Mt, K, Kt, H = p.L, p.M, p.Mt, p.K, p.Kt, p.H

    def total(terms):
        acc = zero
        for sign, val in terms:
            acc = acc + val if sign > 0 else acc - val
        return acc

    A = total((1, d(L[a], x[a])) for a in range(3))
    D = total((1, d(M[i], y[i])) for i in range(3))
    Dt = total((1, d(Mt[a], t[a])) for a in range(3))
    J = [
        [
            [total([(1, d(K[j][c], t[a])), (-1, d(Kt[a][c], y[j])), (1, d(H[a][j], x[c]))]) for c in range(3)]
            for j in range(3)
        ]
        for a in range(3)
    ]
    B = [
        [total([(1, d(L[a], y[i]))] + [(-s, d(K[i][c], x[b])) for b, c, s in _eps_pairs(a)]) for i in range(3)]
        for a in range(3)
    ]
    C = [
        [total([(s, d(K[k][a], y[j])) for j, k, s in _eps_pairs(i)] + [(1, d(M[i], x[a]))]) for a in range(3)]
        for i in range(3)
    ]
    Bt = [
        [total([(1, d(L[a], t[al]))] + [(-s, d(Kt[al][c], x[b])) for b, c, s in _eps_pairs(a)]) for al in range(3)]
        for a in range(3)
    ]
    Ct = [
        [total([(s, d(Kt[g][a], t[b])) for b, g, s in _eps_pairs(i)] + [(1, d(Mt[i], x[a]))]) for a in range(3)]
        for i in range(3)
    ]
    Bh = [
        [total([(1, d(Mt[al], y[i]))] + [(s, d(H[g][i], t[b])) for b, g, s in _eps_pairs(al)]) for i in range(3)]
        for al in range(3)
    ]
    Ch = [
        [total([(1, d(M[i], t[al]))] + [(s, d(H[al][j], y[k])) for j, k, s in _eps_pairs(i)]) for al in range(3)]
        for i in range(3)
    ]
    return dict(A=A, D=D, Dt=Dt, B=B, C=C, Bt=Bt, Ct=Ct, Bh=Bh, Ch=Ch, J=J)


def _depth(v) -> int:
    return 1 + _depth(v[0]) if isinstance(v, list) else 0


def _nest(v, leaf):
    """Stack a nested list of scalars into an array with the list indices trailing."""
    if isinstance(v, list):
        return stack([_nest(u, leaf) for u in v], axis=-(_depth(v[0]) + 1))
    return leaf(v)


def build_coefficients(p: PotentialSet3D, x, y, theta) -> CoefficientSet3D:
    """Evaluate the 84 coefficients at (x, y, theta); points may be batched."""
    grads = {}

    def d(f: ScalarField, var: str):
        key = id(f)
        if key not in grads:
            grads[key] = eval_jet(f, x, y, theta, order=1).grad
        return grads[key][..., STATE_VARS.index(var)]

    rel = _relations(p, d, 0.0)
    batch = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1], np.shape(theta)[:-1])

    def conv(v):
        return _nest(v, lambda u: np.broadcast_to(np.asarray(u, dtype=float), batch).copy())

    return CoefficientSet3D(**{k: conv(v) for k, v in rel.items()})


@dataclass(frozen=True)
class CoefficientFields3D:
    """Coefficient functions as expressions, obtained by symbolic differentiation."""

    entries: dict

    @classmethod
    def from_potentials(cls, p: PotentialSet3D) -> "CoefficientFields3D":
        return cls(_relations(p, lambda f, v: f.derivative(v), _ZERO))

    def evaluate(self, env: Mapping[str, object], batch: tuple, sizes=None) -> CoefficientSet3D:
        def conv(v):
            return _nest(v, lambda f: broadcast_result(f.evaluate(env), batch, sizes))

        return CoefficientSet3D(**{k: conv(v) for k, v in self.entries.items()})

    def items(self):
        def flat(v, idx=()):
            if isinstance(v, list):
                for i, u in enumerate(v):
                    yield from flat(u, idx + (i,))
            else:
                yield idx, v

        for k, v in self.entries.items():
            for idx, f in flat(v):
                yield k, idx, f


# -- states and assembly -----------------------------------------------------


@dataclass
class StatePoint3D:
    x: object
    y: object
    theta: object
    F: object
    G: object

    @classmethod
    def from_jet(cls, x, jet) -> "StatePoint3D":
        return cls(np.asarray(x, dtype=float), jet.chi, jet.theta, jet.F, jet.G)


def wedge_rows(G, F):
    """T[..., a, j, C] = (G^T e_a ^ F^T e_j)_C, i.e. rows of G crossed with rows of F."""
    return T.wedge(G[..., :, None, :], F[..., None, :, :])


def assemble_lagrangian(c: CoefficientSet3D, s: StatePoint3D):
    F, G = s.F, s.G
    cofF, cofG = T.cof(F), T.cof(G)
    return (
        c.A
        + T.ddot(c.B, T.transpose(F))
        + T.ddot(c.C, cofF)
        + c.D * T.det3(F)
        + T.ddot(c.Bt, T.transpose(G))
        + T.ddot(c.Ct, cofG)
        + c.Dt * T.det3(G)
        + T.ddot(c.Bh, T.matmul(cofG, T.transpose(F)))
        + T.ddot(c.Ch, T.matmul(cofF, T.transpose(G)))
        + (c.J * wedge_rows(G, F)).sum(axis=(-3, -2, -1))
    )


def _env(x, y, theta):
    env = {}
    for vars_, arr in ((X_VARS, x), (Y_VARS, y), (T_VARS, theta)):
        for k, name in enumerate(vars_):
            env[name] = arr[..., k]
    return env


def _batch_of(s: StatePoint3D) -> tuple:
    def sh(a, k):
        return a.shape[: len(a.shape) - k]

    return np.broadcast_shapes(sh(s.x, 1), sh(s.y, 1), sh(s.theta, 1), sh(s.F, 2), sh(s.G, 2))


def _sizes_of(*items):
    for it in items:
        if isinstance(it, Dual):
            return it.sizes
    return None


def assemble_P(p: PotentialSet3D, s: StatePoint3D):
    """Divergence vector, summed index by index."""
    pot = p.evaluate(_env(s.x, s.y, s.theta), _batch_of(s), _sizes_of(s.x, s.y, s.theta, s.F, s.G))
    F, G = s.F, s.G
    H = pot["H"]
    hgf = (H[..., :, :, None] * T.wedge(G[..., :, None, :], F[..., None, :, :])).sum(axis=(-3, -2))
    return (
        pot["L"]
        + T.wedge(F, pot["K"]).sum(axis=-2)
        + T.matvec(T.transpose(T.cof(F)), pot["M"])
        + T.wedge(G, pot["Kt"]).sum(axis=-2)
        + T.matvec(T.transpose(T.cof(G)), pot["Mt"])
        + hgf
    )


def assemble_P_direct(p: PotentialSet3D, s: StatePoint3D):
    """Divergence vector in tensor notation, via Gibbsian crosses."""
    pot = p.evaluate(_env(s.x, s.y, s.theta), _batch_of(s), _sizes_of(s.x, s.y, s.theta, s.F, s.G))
    F, G, H = s.F, s.G, pot["H"]
    Ft, Gt = T.transpose(F), T.transpose(G)
    mixed = T.matmul(T.matmul(Ft, T.transpose(H)), G) - T.matmul(T.matmul(Gt, H), F)
    return (
        pot["L"]
        + T.gibbs_cross(T.matmul(Ft, pot["K"]))
        + T.matvec(T.transpose(T.cof(F)), pot["M"])
        + T.gibbs_cross(T.matmul(Gt, pot["Kt"]))
        + T.matvec(T.transpose(T.cof(G)), pot["Mt"])
        - 0.5 * T.gibbs_cross(mixed)
    )


def total_derivative_state(spec: FieldSpec, x):
    """State along a field with one dual group carrying d/dx_t, t = 1..dim.

    Returns ``(state, jet)`` where every state entry is a Dual whose first
    group holds its total x-derivatives.
    """
    x = np.asarray(x, dtype=float)
    jet = field_jet(spec, x)
    n = spec.dim
    sizes = (n,)
    eye = np.eye(n)
    batch = x.shape[:-1]

    def seed(val, d):
        # d has the x-direction on the last axis; move it to the front
        return Dual([val, np.moveaxis(d, -1, 0)], sizes)

    xs = Dual([x, np.broadcast_to(eye.reshape((n,) + (1,) * len(batch) + (n,)), (n,) + x.shape)], sizes)
    return (
        StatePoint3D(
            xs,
            seed(jet.chi, jet.F),
            seed(jet.theta, jet.G),
            seed(jet.F, jet.d2chi),
            seed(jet.G, jet.d2theta),
        ),
        jet,
    )


def total_divergence_P(p: PotentialSet3D, spec: FieldSpec, x):
    """d/dx_A of P_A along the fields chi, theta (chain rule, exact)."""
    state, _ = total_derivative_state(spec, x)
    P = assemble_P(p, state)
    dP = P.part(1)  # (direction t, batch..., A)
    return sum(dP[a, ..., a] for a in range(3))


def divergence_P_fd(p: PotentialSet3D, spec: FieldSpec, x, h: float = 1e-5):
    """Central-difference divergence of P along the fields (cross-check only)."""
    x = np.asarray(x, dtype=float)
    out = 0.0
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        vals = []
        for xx in (x + e, x - e):
            jet = field_jet(spec, xx)
            vals.append(assemble_P(p, StatePoint3D.from_jet(xx, jet))[..., a])
        out = out + (vals[0] - vals[1]) / (2 * h)
    return out


class NullLagrangian3D:
    """Lagrangian built from a potential set; callable on (possibly dual) states."""

    def __init__(self, p: PotentialSet3D):
        self.potentials = p
        self.coefficients = CoefficientFields3D.from_potentials(p)

    def __call__(self, s: StatePoint3D):
        batch = _batch_of(s)
        c = self.coefficients.evaluate(_env(s.x, s.y, s.theta), batch, _sizes_of(s.x, s.y, s.theta, s.F, s.G))
        return assemble_lagrangian(c, s)


# -- polyconvexity arguments -------------------------------------------------

POLYCONVEX_NAMES_3D = ("F", "cofF", "detF", "G", "cofG", "detG", "cofG_Ft", "cofF_Gt", "T")


def polyconvex_args3d(s: StatePoint3D) -> dict:
    F, G = np.asarray(s.F, dtype=float), np.asarray(s.G, dtype=float)
    cofF, cofG = T.cof(F), T.cof(G)
    vals = (
        F,
        cofF,
        T.det3(F),
        G,
        cofG,
        T.det3(G),
        cofG @ np.swapaxes(F, -1, -2),
        cofF @ np.swapaxes(G, -1, -2),
        wedge_rows(G, F),
    )
    return dict(zip(POLYCONVEX_NAMES_3D, vals))


def flatten_args(args: dict) -> np.ndarray:
    return np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in args.values()])
