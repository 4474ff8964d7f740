"""Quadratic Lagrangians of linearized micropolar elasticity.

L = 1/2 e:A:e + 1/2 k:B:k + e:D:k with e_ij = u_i,j + eps_ijs phi_s and
k = grad phi.  The quadratic form is null exactly when

    1. A = 0
    2. B_ijkl = -B_ilkj
    3. D_ijkl = -D_ilkj
    4. D_ijji = -D_ikki            (i, j, k distinct, no sum)
    5. D_ijjk =  D_kikk + D_jijk   (i, j, k distinct, no sum)
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .dual import Dual
from .expr import FieldSpec
from .variational import el_residual

SYM_TOL = 1e-12
NULL_TOL = 1e-12
FAMILIES = {
    1: "A = 0",
    2: "B_ijkl = -B_ilkj",
    3: "D_ijkl = -D_ilkj",
    4: "D_ijji = -D_ikki",
    5: "D_ijjk = D_kikk + D_jijk",
}
TRIPLES = tuple(itertools.permutations(range(3), 3))


class SymmetryWarning(UserWarning):
    pass


def _major(t: np.ndarray) -> np.ndarray:
    return t.transpose(2, 3, 0, 1)


def _swap_jl(t: np.ndarray) -> np.ndarray:
    return t.transpose(0, 3, 2, 1)


@dataclass(frozen=True)
class LinearTensors:
    """Constant moduli; A and B are made major-symmetric on construction."""

    A: np.ndarray = field(default_factory=lambda: np.zeros((3, 3, 3, 3)))
    B: np.ndarray = field(default_factory=lambda: np.zeros((3, 3, 3, 3)))
    D: np.ndarray = field(default_factory=lambda: np.zeros((3, 3, 3, 3)))

    def __post_init__(self):
        for name in ("A", "B", "D"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (3, 3, 3, 3):
                raise ValueError(f"{name} must have shape (3, 3, 3, 3)")
            if name != "D":
                sym = 0.5 * (arr + _major(arr))
                gap = np.abs(sym - arr).max()
                if gap > SYM_TOL:
                    warnings.warn(f"{name} was not major-symmetric (max correction {gap:.3g})", SymmetryWarning, stacklevel=3)
                arr = sym
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_json(cls, data) -> "LinearTensors":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, dict):
            raise ValueError("tensor file must hold a JSON object")
        unknown = set(data) - {"A", "B", "D"}
        if unknown:
            raise ValueError(f"unknown tensor keys {sorted(unknown)}")
        arrays = {}
        for name in ("A", "B", "D"):
            arr = np.zeros((3, 3, 3, 3))
            for entry in data.get(name, []):
                try:
                    idx = tuple(int(entry[k]) - 1 for k in "ijkl")
                    value = float(entry["value"])
                except (KeyError, TypeError, ValueError):
                    raise ValueError(f"malformed entry in {name}: {entry!r}") from None
                if any(not 0 <= i < 3 for i in idx):
                    raise ValueError(f"index out of range in {name}: {entry!r}")
                arr[idx] = value
            arrays[name] = arr
        return cls(**arrays)

    def to_json(self) -> dict:
        out = {}
        for name in ("A", "B", "D"):
            arr = getattr(self, name)
            out[name] = [
                {"i": int(i) + 1, "j": int(j) + 1, "k": int(k) + 1, "l": int(l) + 1, "value": float(arr[i, j, k, l])}
                for i, j, k, l in zip(*np.nonzero(arr))
            ]
        return out


@dataclass
class LinearState:
    u: object
    phi: object
    gradU: object
    gradPhi: object


def _apply(t4: np.ndarray, m):
    """(t4 : m)_ij = t4_ijkl m_kl."""
    fn = lambda p: np.einsum("ijkl,...kl->...ij", t4, p)
    return m.linear(fn) if isinstance(m, Dual) else fn(np.asarray(m, dtype=float))


def linear_lagrangian(t: LinearTensors, s: LinearState):
    e = s.gradU - T.skew(s.phi)  # eps_ijs phi_s = -skew(phi)_ij
    k = s.gradPhi
    return 0.5 * T.ddot(e, _apply(t.A, e)) + 0.5 * T.ddot(k, _apply(t.B, k)) + T.ddot(e, _apply(t.D, k))


class LinearLagrangian:
    """Adapter reading a Cosserat state as (u, phi, grad u, grad phi)."""

    def __init__(self, t: LinearTensors):
        self.tensors = t

    def __call__(self, s):
        return linear_lagrangian(self.tensors, LinearState(s.y, s.theta, s.F, s.G))


def el_residual_linear(t: LinearTensors, fields: FieldSpec, x) -> np.ndarray:
    """Euler operator of the quadratic Lagrangian along (u, phi); shape (..., 6)."""
    return el_residual(LinearLagrangian(t), fields, x).values


# -- conditions ----------------------------------------------------------------


@dataclass
class NullCheck:
    violations: list

    @property
    def null(self) -> bool:
        return not self.violations

    @property
    def max_residual(self) -> float:
        return max((abs(v[2]) for v in self.violations), default=0.0)


def condition_residuals(t: LinearTensors):
    """Yield (family, 1-based index tuple, residual) for every condition."""
    A, B, D = t.A, t.B, t.D
    for idx in itertools.product(range(3), repeat=4):
        yield 1, idx, A[idx]
    rb = B + _swap_jl(B)
    rd = D + _swap_jl(D)
    for idx in itertools.product(range(3), repeat=4):
        yield 2, idx, rb[idx]
    for idx in itertools.product(range(3), repeat=4):
        yield 3, idx, rd[idx]
    for i, j, k in TRIPLES:
        yield 4, (i, j, k), D[i, j, j, i] + D[i, k, k, i]
    for i, j, k in TRIPLES:
        yield 5, (i, j, k), D[i, j, j, k] - D[k, i, k, k] - D[j, i, j, k]


def check_null_conditions(t: LinearTensors, tol: float = NULL_TOL) -> NullCheck:
    out = []
    for fam, idx, r in condition_residuals(t):
        if abs(r) > tol:
            out.append((fam, tuple(i + 1 for i in idx), float(r)))
    return NullCheck(out)


def max_condition_residual(t: LinearTensors) -> float:
    return max(abs(r) for _, _, r in condition_residuals(t))


# -- sampling ------------------------------------------------------------------


def generate_admissible(seed: int) -> LinearTensors:
    """Random tensors satisfying all five families exactly."""
    rng = np.random.default_rng(seed)
    B = rng.uniform(-1.0, 1.0, (3, 3, 3, 3))
    B = 0.5 * (B - _swap_jl(B))
    B = 0.5 * (B + _major(B))
    D = rng.uniform(-1.0, 1.0, (3, 3, 3, 3))
    D = 0.5 * (D - _swap_jl(D))
    # family 5 fixes D_ijjk and, through family 3, D_ikjj
    for i, j, k in TRIPLES:
        D[i, j, j, k] = D[k, i, k, k] + D[j, i, j, k]
        D[i, k, j, j] = -D[i, j, j, k]
    # family 4 fixes D_ikki from D_ijji and, through family 3, D_iikk
    for i, j, k in TRIPLES:
        if j < k:
            D[i, k, k, i] = -D[i, j, j, i]
            D[i, i, k, k] = -D[i, k, k, i]
    return LinearTensors(np.zeros((3, 3, 3, 3)), B, D)


def jacobian_minor() -> LinearTensors:
    """B encoding phi_1,1 phi_2,2 - phi_1,2 phi_2,1."""
    B = np.zeros((3, 3, 3, 3))
    B[0, 0, 1, 1] = B[1, 1, 0, 0] = 1.0
    B[0, 1, 1, 0] = B[1, 0, 0, 1] = -1.0
    return LinearTensors(B=B)


def violate(t: LinearTensors, family: int, delta: float = 1e-2) -> LinearTensors:
    """Copy of ``t`` with one condition family broken by ``delta``."""
    A, B, D = (np.array(a) for a in (t.A, t.B, t.D))
    if family == 1:
        A[0, 0, 0, 0] += delta
    elif family == 2:
        B[0, 0, 1, 1] += delta
        B[1, 1, 0, 0] += delta
    elif family == 3:
        D[0, 0, 1, 2] += delta
        D[0, 2, 1, 0] += delta
    elif family == 4:
        D[0, 1, 1, 0] += delta
        D[0, 0, 1, 1] -= delta
    elif family == 5:
        D[0, 1, 1, 2] += delta
        D[0, 2, 1, 1] -= delta
    else:
        raise ValueError("family must be 1..5")
    return LinearTensors(A, B, D)


CUBIC_MONOMIALS = tuple(
    "*".join(v for v, p in zip(("x1", "x2", "x3"), powers) for _ in range(p)) or "1"
    for d in range(4)
    for powers in sorted((p for p in itertools.product(range(4), repeat=3) if sum(p) == d), reverse=True)
)


def cubic_basis(seed: int = 7) -> list[FieldSpec]:
    """Twenty fields; field k puts monomial k in every component with random weights."""
    rng = np.random.default_rng(seed)
    out = []
    for k, m in enumerate(CUBIC_MONOMIALS):
        c = rng.uniform(0.5, 1.5, 6) * rng.choice([-1.0, 1.0], 6)
        comps = [f"{float(c[r])!r}*{m}" for r in range(6)]
        out.append(FieldSpec(tuple(comps[:3]), tuple(comps[3:]), name=f"basis[{m}]"))
    return out


def random_cubic_field(rng: np.random.Generator) -> FieldSpec:
    comps = []
    for _ in range(6):
        coef = rng.uniform(-1.0, 1.0, len(CUBIC_MONOMIALS))
        comps.append(" + ".join(f"({float(a)!r})*{m}" for a, m in zip(coef, CUBIC_MONOMIALS)))
    return FieldSpec(tuple(comps[:3]), tuple(comps[3:]), name="random cubic")


def basis_max_residual(t: LinearTensors, basis=None, points=None) -> float:
    basis = basis if basis is not None else cubic_basis()
    if points is None:
        points = np.random.default_rng(11).uniform(0.0, 1.0, (8, 3))
    return max(float(np.abs(el_residual_linear(t, f, points)).max()) for f in basis)
