"""Null Lagrangians for micropolar shells on a two-dimensional parameter domain.

Eight potentials (Pbar_A, Phat_k, Ptil_a) of (x1, x2, y, theta) give 28
coefficients.  F and G are 3x2: column A holds the derivative along x^A.

Sign convention: with eps^12 = +1 the divergence vector is
P_A = eps^AB (Pbar_B + Ptil_a G_aB + Phat_k F_kB), so P = (Q_2, -Q_1).  The
scalar coefficient is then A = dPbar_2/dx1 - dPbar_1/dx2, and the linear
terms enter with a minus sign: L = A - eps[B F] - eps[Bt G] + ...
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Mapping

import numpy as np

from . import tensor as T
from .dual import stack
from .expr import T_VARS, X_VARS, Y_VARS, FieldSpec, ScalarField, as_field, broadcast_result, eval_jet
from .nulllag3d import PERMS, StatePoint3D, _nest, parse_assignments, total_derivative_state

SHELL_VARS = X_VARS[:2] + Y_VARS + T_VARS
_ZERO = ScalarField.constant(0.0)


def _eps_pairs(a: int):
    return [(j, k, s) for i, j, k, s in PERMS if i == a]


class StatePointShell(StatePoint3D):
    """Shell state: x has 2 entries, F and G are 3x2."""


def _vec(items, n):
    items = list(items) if items is not None else []
    items += [0.0] * (n - len(items))
    return tuple(as_field(f) for f in items)


@dataclass(frozen=True)
class PotentialSetShell:
    Pbar: tuple = ()
    Phat: tuple = ()
    Ptil: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "Pbar", _vec(self.Pbar, 2))
        object.__setattr__(self, "Phat", _vec(self.Phat, 3))
        object.__setattr__(self, "Ptil", _vec(self.Ptil, 3))
        for f in self.Pbar + self.Phat + self.Ptil:
            bad = f.variables - set(SHELL_VARS)
            if bad:
                raise ValueError(f"shell potentials may only use {SHELL_VARS}; got {sorted(bad)}")

    @classmethod
    def from_text(cls, text: str) -> "PotentialSetShell":
        entries = parse_assignments(
            text, {"Pbar": 1, "Phat": 1, "Ptil": 1}, SHELL_VARS, index_max={"Pbar": 2, "Phat": 3, "Ptil": 3}
        )
        vals = {"Pbar": [0.0] * 2, "Phat": [0.0] * 3, "Ptil": [0.0] * 3}
        for (name, idx), f in entries.items():
            vals[name][idx[0]] = f
        return cls(**vals)

    def evaluate(self, env: Mapping[str, object], batch: tuple, sizes=None) -> dict:
        def ev(f):
            return broadcast_result(f.evaluate(env), batch, sizes)

        return {n: stack([ev(f) for f in getattr(self, n)], axis=-1) for n in ("Pbar", "Phat", "Ptil")}


@dataclass
class CoefficientSetShell:
    A: object
    B: object
    Bt: object
    Bh: object
    C: object
    Ct: object

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def _relations(p: PotentialSetShell, d: Callable, zero):
    x, y, t = X_VARS, Y_VARS, T_VARS
    Pb, Ph, Pt = p.Pbar, p.Phat, p.Ptil

    def total(terms):
        acc = zero
        for sign, val in terms:
            acc = acc + val if sign > 0 else acc - val
        return acc

    A = total([(1, d(Pb[1], x[0])), (-1, d(Pb[0], x[1]))])
    B = [[total([(1, d(Pb[a], y[i])), (-1, d(Ph[i], x[a]))]) for i in range(3)] for a in range(2)]
    Bt = [[total([(1, d(Pb[a], t[al])), (-1, d(Pt[al], x[a]))]) for al in range(3)] for a in range(2)]
    C = [total([(s, d(Ph[k], y[j])) for j, k, s in _eps_pairs(i)]) for i in range(3)]
    Ct = [total([(s, d(Pt[g], t[b])) for b, g, s in _eps_pairs(al)]) for al in range(3)]
    Bh = [[total([(1, d(Pt[al], y[i])), (-1, d(Ph[i], t[al]))]) for i in range(3)] for al in range(3)]
    return dict(A=A, B=B, Bt=Bt, Bh=Bh, C=C, Ct=Ct)


def _point(x, y, theta):
    x = np.asarray(x, dtype=float)
    x3 = np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)
    return x3, np.asarray(y, dtype=float), np.asarray(theta, dtype=float)


def build_coefficients_shell(p: PotentialSetShell, x, y, theta) -> CoefficientSetShell:
    x3, y, theta = _point(x, y, theta)
    grads = {}
    names = X_VARS + Y_VARS + T_VARS

    def d(f, var):
        if id(f) not in grads:
            grads[id(f)] = eval_jet(f, x3, y, theta, order=1).grad
        return grads[id(f)][..., names.index(var)]

    rel = _relations(p, d, 0.0)
    batch = np.broadcast_shapes(x3.shape[:-1], y.shape[:-1], theta.shape[:-1])
    return CoefficientSetShell(
        **{k: _nest(v, lambda u: np.broadcast_to(np.asarray(u, dtype=float), batch).copy()) for k, v in rel.items()}
    )


def eps_bracket(m):
    """eps[M] = M_12 - M_21 for a matrix with at least two rows and columns."""
    return m[..., 0, 1] - m[..., 1, 0]


def _col(m, a):
    return m[..., :, a]


def _mixed(F, G):
    """F e1 (x) G e2 - F e2 (x) G e1, indexed [i, a]."""
    return T.outer(_col(F, 0), _col(G, 1)) - T.outer(_col(F, 1), _col(G, 0))


def assemble_lagrangian_shell(c: CoefficientSetShell, s) -> object:
    F, G = s.F, s.G
    mixed = _mixed(F, G)
    return (
        c.A
        - eps_bracket(T.matmul(c.B, F))
        - eps_bracket(T.matmul(c.Bt, G))
        + T.dot(c.C, T.wedge(_col(F, 0), _col(F, 1)))
        + T.dot(c.Ct, T.wedge(_col(G, 0), _col(G, 1)))
        + T.ddot(c.Bh, T.transpose(mixed))
    )


def _env(x, y, theta):
    env = {}
    for k in range(2):
        env[X_VARS[k]] = x[..., k]
    for k in range(3):
        env[Y_VARS[k]] = y[..., k]
        env[T_VARS[k]] = theta[..., k]
    return env


def _batch(s) -> tuple:
    shapes = [np.shape(v.value if hasattr(v, "parts") else v) for v in (s.x, s.y, s.theta)]
    fshapes = [np.shape(v.value if hasattr(v, "parts") else v) for v in (s.F, s.G)]
    return np.broadcast_shapes(*(sh[:-1] for sh in shapes), *(sh[:-2] for sh in fshapes))


def _sizes(s):
    for v in (s.x, s.y, s.theta, s.F, s.G):
        if hasattr(v, "sizes"):
            return v.sizes
    return None


def assemble_P_shell(p: PotentialSetShell, s):
    """P = (Q_2, -Q_1) with Q_B = Pbar_B + Ptil_a G_aB + Phat_k F_kB."""
    pot = p.evaluate(_env(s.x, s.y, s.theta), _batch(s), _sizes(s))
    Q = pot["Pbar"] + (pot["Ptil"][..., :, None] * s.G).sum(axis=-2) + (pot["Phat"][..., :, None] * s.F).sum(axis=-2)
    return stack([Q[..., 1], -Q[..., 0]], axis=-1)


def total_divergence_P_shell(p: PotentialSetShell, spec: FieldSpec, x):
    state, _ = total_derivative_state(spec, x)
    dP = assemble_P_shell(p, state).part(1)
    return dP[0, ..., 0] + dP[1, ..., 1]


class NullLagrangianShell:
    def __init__(self, p: PotentialSetShell):
        self.potentials = p
        self.coefficients = _relations(p, lambda f, v: f.derivative(v), _ZERO)

    def __call__(self, s):
        env = _env(s.x, s.y, s.theta)
        batch, sizes = _batch(s), _sizes(s)
        c = CoefficientSetShell(
            **{
                k: _nest(v, lambda f: broadcast_result(f.evaluate(env), batch, sizes))
                for k, v in self.coefficients.items()
            }
        )
        return assemble_lagrangian_shell(c, s)


POLYCONVEX_NAMES_SHELL = ("F", "G", "Fe1^Fe2", "Ge1^Fe2", "Fe1(x)Ge2-Fe2(x)Ge1")


def polyconvex_args_shell(s) -> dict:
    F, G = np.asarray(s.F, dtype=float), np.asarray(s.G, dtype=float)
    vals = (
        F,
        G,
        T.wedge(F[..., :, 0], F[..., :, 1]),
        T.wedge(G[..., :, 0], F[..., :, 1]),
        _mixed(F, G),
    )
    return dict(zip(POLYCONVEX_NAMES_SHELL, vals))
