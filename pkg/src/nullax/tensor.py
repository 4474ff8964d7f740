"""Dense tensor algebra over R^3.

Every function takes arrays whose trailing axes carry the tensor slots, so a
batch of matrices is an array of shape ``(..., 3, 3)``.  The same code runs on
:class:`nullax.dual.Dual` arrays, which is how derivatives of Lagrangians are
obtained without a separate code path.
"""

from __future__ import annotations

import numpy as np

from .dual import Dual, stack, value_of

SKEW_TOL = 1e-12

EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS[_i, _j, _k] = 1.0
    EPS[_i, _k, _j] = -1.0


class ContractError(ValueError):
    """An argument violates a documented precondition."""


def _asarray(a):
    return a if isinstance(a, Dual) else np.asarray(a, dtype=float)


def matrix(rows):
    """Assemble a matrix from a 3x3 (or 3x2) nested list of scalars or arrays."""
    return stack([stack(list(r), axis=-1) for r in rows], axis=-2)


def transpose(m):
    m = _asarray(m)
    return m.swapaxes(-1, -2)


def matmul(a, b):
    a, b = _asarray(a), _asarray(b)
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return a @ b
    return (a[..., :, :, None] * b[..., None, :, :]).sum(axis=-2)


def matvec(m, v):
    m, v = _asarray(m), _asarray(v)
    return (m * v[..., None, :]).sum(axis=-1)


def dot(a, b):
    return (_asarray(a) * _asarray(b)).sum(axis=-1)


def ddot(a, b):
    """Full contraction a_ij b_ij."""
    return (_asarray(a) * _asarray(b)).sum(axis=(-2, -1))


def trace(m):
    m = _asarray(m)
    return m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2]


def det3(m):
    m = _asarray(m)
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


def cof(m):
    """Cofactor matrix from signed 2x2 minors; no inverse is formed."""
    m = _asarray(m)
    rows = []
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        row = []
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            row.append(m[..., i1, j1] * m[..., i2, j2] - m[..., i1, j2] * m[..., i2, j1])
        rows.append(row)
    return matrix(rows)


def wedge(a, b):
    a, b = _asarray(a), _asarray(b)
    return stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def gibbs_cross(a):
    """Vector invariant (A^x)_i = eps_ijk A_jk."""
    a = _asarray(a)
    return stack(
        [
            a[..., 1, 2] - a[..., 2, 1],
            a[..., 2, 0] - a[..., 0, 2],
            a[..., 0, 1] - a[..., 1, 0],
        ],
        axis=-1,
    )


def skew(w):
    """W_ij = -eps_ijk w_k, so that skew(w) @ a = w x a."""
    w = _asarray(w)
    zero = 0.0 * w[..., 0]
    return matrix(
        [
            [zero, -w[..., 2], w[..., 1]],
            [w[..., 2], zero, -w[..., 0]],
            [-w[..., 1], w[..., 0], zero],
        ]
    )


def axl(w):
    """Axial vector of an antisymmetric matrix (inverse of :func:`skew`)."""
    w = _asarray(w)
    v = value_of(w)
    if v.size and np.max(np.abs(v + np.swapaxes(v, -1, -2))) > SKEW_TOL:
        raise ContractError("axl requires an antisymmetric matrix")
    return -0.5 * gibbs_cross(w)


def outer(a, b):
    a, b = _asarray(a), _asarray(b)
    return a[..., :, None] * b[..., None, :]


def identity(batch=()):
    return np.broadcast_to(np.eye(3), tuple(batch) + (3, 3)).copy()
