"""Gibbs rotation chart, wryness and stretch."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .dual import Dual

ROTATION_TOL = 1e-10
SINGULAR_TOL = 1e-8


class SingularParameterizationError(ValueError):
    """The rotation angle is pi, where Gibbs coordinates blow up."""


def gibbs_rotation(theta):
    """R = ((4 - |th|^2) I + 2 th (x) th - 4 skew(th)) / (4 + |th|^2)."""
    th = theta if isinstance(theta, Dual) else np.asarray(theta, dtype=float)
    sq = T.dot(th, th)
    eye = np.eye(3)
    num = (4.0 - sq)[..., None, None] * eye + 2.0 * T.outer(th, th) - 4.0 * T.skew(th)
    return num / (4.0 + sq)[..., None, None]


def check_rotation(R, tol: float = ROTATION_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    err = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max(axis=(-2, -1))
    if np.any(err > tol) or np.any(np.abs(np.linalg.det(R) - 1.0) > tol):
        raise T.ContractError("matrix is not a proper rotation")
    return R


def gibbs_inverse(R) -> np.ndarray:
    """theta_a = 2/(1 + tr R) eps_abc R_bc."""
    R = check_rotation(R)
    denom = 1.0 + np.trace(R, axis1=-2, axis2=-1)
    if np.any(np.abs(denom) <= SINGULAR_TOL):
        raise SingularParameterizationError("tr R = -1: rotation by pi has no Gibbs coordinates")
    return 2.0 * T.gibbs_cross(R) / denom[..., None]


def wryness_closed_form(theta, G) -> np.ndarray:
    """Column i of K is -(4 G e_i + 2 theta x G e_i) / (4 + |theta|^2)."""
    th = np.asarray(theta, dtype=float)
    G = np.asarray(G, dtype=float)
    cross = T.matmul(T.skew(th), G)
    return -(4.0 * G + 2.0 * cross) / (4.0 + T.dot(th, th))[..., None, None]


def wryness_ad(theta, G) -> np.ndarray:
    """Wryness from axl(R^T dR/dx_j), with dR obtained by forward differentiation.

    Along column j of ``G`` the rotation coordinates move with velocity
    ``G[:, j]``; one dual group carries all three directions at once.
    """
    th = np.asarray(theta, dtype=float)
    G = np.asarray(G, dtype=float)
    # seed part layout: (3 directions j, batch..., 3 components alpha)
    seed = np.moveaxis(G, -1, 0)
    d = Dual([th, seed], (3,))
    R = gibbs_rotation(d)
    Rv, dR = R.value, R.part(1)
    W = np.swapaxes(Rv, -1, -2)[None] @ dR
    K = T.axl(W)
    return np.moveaxis(K, 0, -1)


def stretch(R, F) -> np.ndarray:
    """E = R^T F - I."""
    R = check_rotation(R)
    return np.swapaxes(R, -1, -2) @ np.asarray(F, dtype=float) - np.eye(3)
