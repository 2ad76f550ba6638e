"""State-space-collapse geometry.

The switch lives in R^{n^2} with virtual output queue (i, j) stored at the
zero-based flat index ``i + n * j``.  ``B`` maps a 2n-vector ``w`` of
row/column weights to the matrix ``w_i + w_{n+j}``; its column space is the
collapse subspace S and the image of the nonnegative orthant is the cone K.
The three-queue system uses a fixed 3x2 ``B`` and the N-system uses three
closed-form cones in the plane.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

__all__ = [
    "THREEQ_B",
    "Target",
    "NSysCone",
    "Decomposition",
    "ConeRepresentation",
    "NNLSConvergenceError",
    "switch_b_matrix",
    "gram_matrix",
    "subspace_projector",
    "project_subspace",
    "perp_subspace",
    "nnls",
    "project_cone_switch",
    "perp_cone_switch",
    "project_cones_nsys",
    "perp_cones_nsys",
    "normalize_cone_rep",
    "port_count",
]

THREEQ_B = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
THREEQ_B.setflags(write=False)


class Target(enum.Enum):
    SUBSPACE_S = "S"
    CONE_K = "K"
    CONE_K1 = "K1"
    CONE_K2 = "K2"
    CONE_K3 = "K3"


class NSysCone(enum.Enum):
    K1 = "K1"
    K2 = "K2"
    K3 = "K3"


class NNLSConvergenceError(RuntimeError):
    """Active-set iterations exhausted before the KKT conditions were met."""


@dataclass(frozen=True)
class Decomposition:
    x_par: np.ndarray
    x_perp: np.ndarray
    target: Target


@dataclass(frozen=True)
class ConeRepresentation:
    """Row/column weights ``r >= 0`` with ``x_par = B r``."""

    r: np.ndarray
    normalized: bool


@lru_cache(maxsize=None)
def _switch_b(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"port count must be >= 1, got {n}")
    B = np.zeros((n * n, 2 * n))
    for j in range(n):
        for i in range(n):
            B[i + n * j, i] = 1.0
            B[i + n * j, n + j] = 1.0
    B.setflags(write=False)
    return B


def switch_b_matrix(n: int) -> np.ndarray:
    """The n^2 x 2n incidence matrix of the n x n switch (read-only)."""
    return _switch_b(int(n))


def gram_matrix(n: int | None = None) -> np.ndarray:
    """``D = B^T B`` for the switch (``n``) or the three-queue system (``None``)."""
    B = THREEQ_B if n is None else switch_b_matrix(n)
    return B.T @ B


@lru_cache(maxsize=None)
def _projector(key: int) -> np.ndarray:
    B = THREEQ_B if key == 0 else switch_b_matrix(key)
    # min-norm least squares: D is singular for the switch (n >= 2)
    W = np.linalg.lstsq(B, np.eye(B.shape[0]), rcond=None)[0]
    A = B @ W
    A = 0.5 * (A + A.T)
    A.setflags(write=False)
    return A


def port_count(dim: int) -> int | None:
    """Infer the switch size from a vector length; ``None`` means three-queue."""
    if dim == 3:
        return None
    n = math.isqrt(dim)
    if n * n != dim or n < 1:
        raise ValueError(f"length {dim} is neither 3 nor a perfect square")
    return n


def subspace_projector(n: int | None = None) -> np.ndarray:
    """Orthogonal projector onto the column space of ``B``."""
    return _projector(0 if n is None else int(n))


def _check_dim(x: np.ndarray, n: int | None) -> int | None:
    if n is None:
        n = port_count(x.shape[-1])
    expected = 3 if n is None else n * n
    if x.shape[-1] != expected:
        raise ValueError(f"expected vectors of length {expected}, got {x.shape[-1]}")
    return n


def project_subspace(x, n: int | None = None) -> Decomposition:
    """Project onto S.  ``x`` may be a single vector or a stack of rows.

    ``n=None`` infers the system from the length (3 means the three-queue
    system, a perfect square ``n^2`` means the n x n switch).
    """
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    n = _check_dim(x, n)
    A = subspace_projector(n)
    x_par = x @ A  # A is symmetric
    return Decomposition(x_par, x - x_par, Target.SUBSPACE_S)


def perp_subspace(x, n: int | None = None) -> np.ndarray:
    return project_subspace(x, n).x_perp


# -- nonnegative least squares ------------------------------------------------


@njit(cache=True)
def _nnls_kernel(A, b, tol, max_iter):
    m, k = A.shape
    x = np.zeros(k)
    passive = np.zeros(k, dtype=np.bool_)
    w = A.T @ b
    scale = max(1.0, np.max(np.abs(w)))
    thresh = tol * scale
    it = 0
    while True:
        best = -1
        best_w = thresh
        for j in range(k):
            if not passive[j] and w[j] > best_w:
                best_w = w[j]
                best = j
        if best < 0:
            return x, 0
        passive[best] = True
        while True:
            it += 1
            if it > max_iter:
                return x, 1
            idx = np.nonzero(passive)[0]
            sub = np.ascontiguousarray(A[:, idx])
            zp = np.linalg.lstsq(sub, b)[0]
            z = np.zeros(k)
            for t in range(idx.size):
                z[idx[t]] = zp[t]
            if np.all(zp > thresh * 1e-3):
                x = z
                break
            alpha = 1.0
            for t in range(idx.size):
                j = idx[t]
                if z[j] <= thresh * 1e-3 and x[j] - z[j] > 0.0:
                    step = x[j] / (x[j] - z[j])
                    if step < alpha:
                        alpha = step
            x = x + alpha * (z - x)
            for t in range(idx.size):
                j = idx[t]
                if x[j] <= thresh * 1e-3:
                    x[j] = 0.0
                    passive[j] = False
            if not np.any(passive):
                break
        w = A.T @ (b - A @ x)


def nnls(A, b, tol: float = 1e-10, max_iter: int | None = None) -> np.ndarray:
    """Lawson-Hanson active-set solution of ``min ||A x - b||`` s.t. ``x >= 0``.

    Raises :class:`NNLSConvergenceError` after ``max_iter`` inner iterations
    (default ``100 * A.shape[1]``).
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise ValueError("incompatible dimensions")
    if max_iter is None:
        max_iter = 100 * A.shape[1]
    x, status = _nnls_kernel(A, b, float(tol), int(max_iter))
    if status:
        raise NNLSConvergenceError(f"NNLS did not converge in {max_iter} iterations")
    return x


def normalize_cone_rep(r: np.ndarray, n: int) -> ConeRepresentation:
    """Shift ``r`` along the null direction ``[1_n; -1_n]`` so that ``min r = 0``.

    Two min-zero representatives exist (a zero among the input weights or
    among the output weights); the one closer to ``r`` is returned.
    """
    r = np.asarray(r, dtype=float)
    a = r[:n].min()
    b = r[n:].min()
    w = -a if a <= b else b
    shifted = r.copy()
    shifted[:n] += w
    shifted[n:] -= w
    shifted[np.abs(shifted) < 1e-12] = 0.0
    B = switch_b_matrix(n)
    if shifted.min() < 0 or not np.allclose(B @ shifted, B @ r, atol=1e-9):
        return ConeRepresentation(r, False)
    return ConeRepresentation(shifted, True)


def project_cone_switch(x, n: int | None = None) -> tuple[Decomposition, ConeRepresentation]:
    """Euclidean projection of ``x`` onto the switch cone K via NNLS."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("project_cone_switch takes a single vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    n = _check_dim(x, n)
    if n is None:
        raise ValueError("the cone K is defined for the switch only")
    B = switch_b_matrix(n)
    r = nnls(B, x)
    x_par = B @ r
    return Decomposition(x_par, x - x_par, Target.CONE_K), normalize_cone_rep(r, n)


def perp_cone_switch(X, n: int | None = None) -> np.ndarray:
    """Cone-perpendicular components for a stack of rows.

    Duplicate rows (common for integer queue vectors) are projected once.
    """
    X = np.atleast_2d(np.asarray(X))
    n = _check_dim(X, n)
    B = np.ascontiguousarray(switch_b_matrix(n))
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    uniq = uniq.astype(np.float64)
    out = np.empty_like(uniq)
    max_iter = 100 * B.shape[1]
    for row in range(uniq.shape[0]):
        r, status = _nnls_kernel(B, np.ascontiguousarray(uniq[row]), 1e-10, max_iter)
        if status:
            raise NNLSConvergenceError(f"NNLS did not converge for row {uniq[row]}")
        out[row] = uniq[row] - B @ r
    return out[inverse.reshape(-1)]


# -- N-system cones ------------------------------------------------------------


def _proj_nsys(y: np.ndarray, cone: NSysCone) -> np.ndarray:
    y1, y2 = y[..., 0], y[..., 1]
    avg = 0.5 * (y1 + y2)
    if cone is NSysCone.K1:
        return np.stack([avg, avg], axis=-1)
    if cone is NSysCone.K2:
        return np.stack([y1, np.zeros_like(avg)], axis=-1)
    below = (y2 <= y1)[..., None]
    return np.where(below, y, np.stack([avg, avg], axis=-1))


_NSYS_TARGET = {NSysCone.K1: Target.CONE_K1, NSysCone.K2: Target.CONE_K2, NSysCone.K3: Target.CONE_K3}


def project_cones_nsys(y, cone: NSysCone | str) -> Decomposition:
    """Closed-form projections onto the N-system cones (rows of pairs allowed).

    The formulas are those for nonnegative queue vectors; ``K2`` keeps the
    first coordinate as is and ``K3`` folds points above the diagonal onto it.
    """
    cone = NSysCone(cone)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != 2:
        raise ValueError("N-system vectors have length 2")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    par = _proj_nsys(y, cone)
    return Decomposition(par, y - par, _NSYS_TARGET[cone])


def perp_cones_nsys(y, cone: NSysCone | str = NSysCone.K3) -> np.ndarray:
    return project_cones_nsys(y, cone).x_perp
