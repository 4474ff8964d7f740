"""Euler-Lagrange residuals, quadrature of functionals and bump perturbations.

A Lagrangian is any callable taking a state with attributes ``x, y, theta,
F, G`` and returning a scalar per batch entry.  It must be written with the
generic operations of :mod:`nullax.tensor` so that it accepts dual numbers.

The Euler operator is applied analytically.  Two dual groups are used: the
first carries partial derivatives in every state slot, the second carries
the total derivative d/dx_t along the fields.  Their mixed block is exactly
d/dx_t of the partials with respect to F and G, which is what the Euler
operator needs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .dual import Dual
from .expr import STATE_VARS, FieldJet, FieldSpec, field_jet, parse
from .nulllag3d import StatePoint3D

LagrangianFn = Callable[[StatePoint3D], object]


# -- fields ------------------------------------------------------------------


@dataclass(frozen=True)
class BumpField:
    """Compactly supported smooth perturbation exp(-1/(1 - r^2/radius^2)).

    ``amplitude[:3]`` multiplies the bump in the placement, ``amplitude[3:]``
    in the rotation coordinates.
    """

    center: tuple
    radius: float
    amplitude: tuple

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if len(self.amplitude) != 6:
            raise ValueError("amplitude needs 6 entries")

    @property
    def dim(self) -> int:
        return len(self.center)

    def jet(self, x):
        """Value, gradient and Hessian of the scalar profile at ``x``."""
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center, dtype=float)
        r2 = self.radius**2
        s = (d * d).sum(-1) / r2
        gap = 1.0 - s
        inside = gap > 1e-3
        g = np.where(inside, gap, 1.0)
        phi = np.where(inside, np.exp(-1.0 / g), 0.0)
        g1 = -1.0 / g**2
        g2 = -2.0 / g**3
        si = 2.0 * d / r2
        grad = (phi * g1)[..., None] * si
        eye = np.eye(self.dim)
        hess = phi[..., None, None] * (
            (g2 + g1**2)[..., None, None] * si[..., :, None] * si[..., None, :]
            + g1[..., None, None] * (2.0 / r2) * eye
        )
        return phi, grad, hess

    def check_inside_unit_box(self) -> None:
        c = np.asarray(self.center, dtype=float)
        if np.any(c - self.radius <= 0.0) or np.any(c + self.radius >= 1.0):
            raise ValueError("bump support must lie strictly inside the unit box")


@dataclass(frozen=True)
class PerturbedField:
    base: object
    bump: BumpField

    @property
    def dim(self) -> int:
        return self.base.dim

    def jet(self, x) -> FieldJet:
        j = field_jets(self.base, x)
        phi, grad, hess = self.bump.jet(x)
        a = np.asarray(self.bump.amplitude, dtype=float)
        ac, at = a[:3], a[3:]
        return FieldJet(
            j.chi + ac * phi[..., None],
            j.theta + at * phi[..., None],
            j.F + ac[:, None] * grad[..., None, :],
            j.G + at[:, None] * grad[..., None, :],
            j.d2chi + ac[:, None, None] * hess[..., None, :, :],
            j.d2theta + at[:, None, None] * hess[..., None, :, :],
        )


def field_jets(fields, x) -> FieldJet:
    if isinstance(fields, FieldSpec):
        return field_jet(fields, x)
    return fields.jet(x)


# -- Euler operator ----------------------------------------------------------


@dataclass
class Residual:
    """Euler-Lagrange residual at a batch of points.

    ``values[..., r]`` for r = 0..5 (placement then rotation components);
    ``scale`` is 1 + max |dL/dp| over gradient slots at each point.
    """

    values: np.ndarray
    scale: np.ndarray
    lagrangian: np.ndarray


def _slots(n: int):
    """Offsets of x, y, theta, F, G inside the first dual group."""
    off = {}
    k = 0
    for name, size in (("x", n), ("y", 3), ("theta", 3), ("F", 3 * n), ("G", 3 * n)):
        off[name] = (k, size)
        k += size
    return off, k


def _dual_state(jet: FieldJet, x: np.ndarray, n: int) -> StatePoint3D:
    off, N = _slots(n)
    batch = x.shape[:-1]
    sizes = (N, n)
    nb = len(batch)

    def make(name, val, total):
        start, size = off[name]
        shape = val.shape[nb:]
        seed = np.zeros((N,) + batch + shape)
        flat = seed.reshape((N,) + batch + (size,))
        for k in range(size):
            flat[(start + k,) + (slice(None),) * nb + (k,)] = 1.0
        return Dual([val, seed, np.moveaxis(total, -1, 0), None], sizes)

    eye = np.broadcast_to(np.eye(n), batch + (n, n))
    return StatePoint3D(
        make("x", x, eye),
        make("y", jet.chi, jet.F),
        make("theta", jet.theta, jet.G),
        make("F", jet.F, jet.d2chi),
        make("G", jet.G, jet.d2theta),
    )


def el_residual(L: LagrangianFn, spec, x, fd_check: bool = False) -> Residual:
    """Euler operator E_r = dL/dz_r - d/dx_t dL/dp_rt along the fields.

    ``x`` may be a batch of points of shape (..., dim).  With ``fd_check`` the
    total derivative is recomputed by central differences (h = 1e-4) and the
    result is returned in the same form.
    """
    x = np.asarray(x, dtype=float)
    n = spec.dim
    batch = x.shape[:-1]
    if fd_check:
        return _el_residual_fd(L, spec, x)
    jet = field_jets(spec, x)
    state = _dual_state(jet, x, n)
    out = L(state)
    off, N = _slots(n)
    if not isinstance(out, Dual):
        val = np.broadcast_to(np.asarray(out, dtype=float), batch)
        return Residual(np.zeros(batch + (6,)), np.ones(batch), val.copy())
    d0 = out.part(1)  # (N, batch)
    d01 = out.part(3)  # (N, n, batch)
    res = []
    for zname, pname in (("y", "F"), ("theta", "G")):
        zs, _ = off[zname]
        ps, _ = off[pname]
        for r in range(3):
            div = sum(d01[ps + r * n + t, t] for t in range(n))
            res.append(d0[zs + r] - div)
    fs, _ = off["F"]
    grads = np.abs(d0[fs : fs + 6 * n])
    scale = 1.0 + grads.max(axis=0)
    return Residual(np.stack(res, axis=-1), np.broadcast_to(scale, batch).copy(), np.broadcast_to(out.value, batch).copy())


def _el_residual_fd(L: LagrangianFn, spec, x: np.ndarray, h: float = 1e-4) -> Residual:
    n = spec.dim
    off, N = _slots(n)
    batch = x.shape[:-1]

    def partials(xx):
        jet = field_jets(spec, xx)
        st = _dual_state(jet, xx, n)
        st1 = StatePoint3D(*(Dual([getattr(st, k).value, getattr(st, k).parts[1]], (N,)) for k in ("x", "y", "theta", "F", "G")))
        out = L(st1)
        if not isinstance(out, Dual):
            return np.zeros((N,) + batch), np.broadcast_to(np.asarray(out, dtype=float), batch)
        return out.part(1), out.value

    d0, val = partials(x)
    res = [None] * 6
    divs = [0.0] * 6
    for t in range(n):
        e = np.zeros(n)
        e[t] = h
        dp, _ = partials(x + e)
        dm, _ = partials(x - e)
        for k, pname in enumerate(("F", "G")):
            ps, _ = off[pname]
            for r in range(3):
                divs[3 * k + r] = divs[3 * k + r] + (dp[ps + r * n + t] - dm[ps + r * n + t]) / (2 * h)
    for k, zname in enumerate(("y", "theta")):
        zs, _ = off[zname]
        for r in range(3):
            res[3 * k + r] = d0[zs + r] - divs[3 * k + r]
    fs, _ = off["F"]
    scale = 1.0 + np.abs(d0[fs : fs + 6 * n]).max(axis=0)
    return Residual(np.stack(res, axis=-1), scale, val)


# -- quadrature and invariance ---------------------------------------------------


def gauss_box(order: int, dim: int):
    """Tensor-product Gauss-Legendre nodes and weights on [0, 1]^dim."""
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return pts, wts


def quadrature_functional(L: LagrangianFn, spec, order: int, chunk: int = 4096) -> float:
    """Integral of L along the fields over the unit box."""
    pts, wts = gauss_box(order, spec.dim)
    total = 0.0
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk]
        jet = field_jets(spec, p)
        val = L(StatePoint3D(p, jet.chi, jet.theta, jet.F, jet.G))
        val = np.broadcast_to(np.asarray(val, dtype=float), p.shape[:-1])
        total += float(np.dot(wts[s : s + chunk], val))
    return total


@dataclass
class Invariance:
    base: float
    perturbed: float
    delta: float


def invariance_test(L: LagrangianFn, spec, bump: BumpField, order: int) -> Invariance:
    """Compare the functional with and without a compactly supported bump."""
    if bump.dim != spec.dim:
        raise ValueError("bump and fields live in different dimensions")
    bump.check_inside_unit_box()
    base = quadrature_functional(L, spec, order)
    pert = quadrature_functional(L, PerturbedField(spec, bump), order)
    return Invariance(base, pert, abs(pert - base))


# -- verdicts ------------------------------------------------------------------


@dataclass
class Verdict:
    null_consistent: bool
    max_ratio: float
    max_residual: float
    worst_spec: int | None = None
    worst_x: list | None = None
    worst_residual: list | None = None
    checked_points: int = 0

    @property
    def status(self) -> str:
        return "null-consistent" if self.null_consistent else "violation"


def threads() -> int:
    try:
        return max(1, int(os.environ.get("NULLAX_THREADS", "1")))
    except ValueError:
        return 1


def sample_points(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    return rng.uniform(0.05, 0.95, size=(count, dim))


def nullity_verdict(
    L: LagrangianFn,
    specs: Sequence,
    points_per_spec: int = 100,
    tol: float = 1e-8,
    seed: int = 42,
    points: Sequence[np.ndarray] | None = None,
) -> Verdict:
    """Sample residuals; a violation is any |E_r| > tol * (1 + max|dL/dp|)."""
    if not specs:
        raise ValueError("need at least one field")
    rng = np.random.default_rng(seed)
    if points is None:
        points = [sample_points(rng, points_per_spec, s.dim) for s in specs]

    def run(k):
        return el_residual(L, specs[k], points[k])

    n_threads = threads()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            results = list(ex.map(run, range(len(specs))))
    else:
        results = [run(k) for k in range(len(specs))]

    best = Verdict(True, 0.0, 0.0)
    for k, r in enumerate(results):
        absval = np.abs(r.values).max(axis=-1)
        ratio = absval / r.scale
        i = int(np.argmax(ratio))
        best.checked_points += ratio.size
        best.max_residual = max(best.max_residual, float(absval.max()))
        if ratio[i] > best.max_ratio or best.worst_spec is None:
            best.max_ratio = float(ratio[i])
            best.worst_spec = k
            best.worst_x = points[k][i].tolist()
            best.worst_residual = r.values[i].tolist()
    best.null_consistent = best.max_ratio <= tol
    return best


# -- simple Lagrangians ----------------------------------------------------------


def matrix_names(n: int = 3):
    return tuple(f"{p}{i + 1}{a + 1}" for p in ("F", "G") for i in range(3) for a in range(n))


class ExprLagrangian:
    """Lagrangian given by an expression in x, y, t and the entries F11..G33."""

    def __init__(self, src: str, dim: int = 3):
        self.dim = dim
        self.field = parse(src, STATE_VARS[:dim] + STATE_VARS[3:] + matrix_names(dim))
        self.src = src

    def __call__(self, s):
        env = {}
        for k in range(self.dim):
            env[f"x{k + 1}"] = s.x[..., k]
        for k in range(3):
            env[f"y{k + 1}"] = s.y[..., k]
            env[f"t{k + 1}"] = s.theta[..., k]
            for a in range(self.dim):
                env[f"F{k + 1}{a + 1}"] = s.F[..., k, a]
                env[f"G{k + 1}{a + 1}"] = s.G[..., k, a]
        return self.field.evaluate(env)


@dataclass
class SumLagrangian:
    terms: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def __call__(self, s):
        out = 0.0
        for w, t in zip(self.weights, self.terms):
            out = out + w * t(s)
        return out


def det_F(s):
    return T.det3(s.F)


def dirichlet(s):
    """Half the squared Frobenius norm of F."""
    return 0.5 * T.ddot(s.F, s.F)


def constant(value: float = 1.0):
    return lambda s: value
