"""Dense symmetric eigendecomposition and operator scaling.

``sym_eig`` is a cyclic Jacobi solver compiled with numba. The matrices
handled here are covariance estimates on a few hundred points at most, for
which Jacobi is accurate to working precision even for tiny eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DegenerateError, DimensionError, NumericalError

MAX_SWEEPS = 100
REL_TOL = 1e-12
SYMMETRY_TOL = 1e-10


@numba.njit(cache=True)
def _jacobi(a, tol, max_sweeps):
    """Cyclic Jacobi on symmetric ``a`` (overwritten with its diagonal form).

    Only rows are updated and mirrored into columns; eigenvectors are kept
    as rows of ``vt`` so every inner loop runs over contiguous memory.
    """
    n = a.shape[0]
    vt = np.eye(n)
    skip = tol / (4.0 * n)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = np.sqrt(2.0 * off)
        if off <= tol:
            return vt, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    a[k, p] = a[p, k]
                    a[k, q] = a[q, k]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vpk = vt[p, k]
                    vqk = vt[q, k]
                    vt[p, k] = c * vpk - s * vqk
                    vt[q, k] = s * vpk + c * vqk
    return vt, max_sweeps, False


def sym_eig(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum of a real symmetric matrix.

    Returns
    -------
    eigenvalues : (p,) ndarray, descending
    eigenvectors : (p, p) ndarray
        Orthonormal columns; each column's largest-magnitude entry is positive.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    scale = np.abs(a).max() if a.size else 0.0
    if scale > 0 and np.abs(a - a.T).max() > SYMMETRY_TOL * scale:
        raise DimensionError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    fro = np.sqrt((a * a).sum())
    vt, sweeps, converged = _jacobi(a, REL_TOL * fro, MAX_SWEEPS)
    if not converged:
        raise NumericalError(f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")
    v = vt.T
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    big = np.abs(v).argmax(axis=0)
    signs = np.where(v[big, np.arange(n)] < 0, -1.0, 1.0)
    return w, v * signs


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs of an integral operator discretised with weight ``quadrature_weight``.

    ``eigenvalues`` are on the operator scale; ``eigenvectors`` are the
    orthonormal matrix eigenvectors. ``eigenfunctions`` returns them on the
    grid, normalised so that ``sum(phi**2) * weight == 1``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    quadrature_weight: float

    @property
    def eigenfunctions(self) -> np.ndarray:
        return self.eigenvectors / np.sqrt(self.quadrature_weight)

    def clipped(self) -> np.ndarray:
        return np.clip(self.eigenvalues, 0.0, None)


def operator_scale(matrix_eigs, quadrature_weight: float) -> EigenSystem:
    """Convert ``(xi, V)`` from ``sym_eig`` to operator eigenpairs."""
    if not quadrature_weight > 0:
        raise ValueError("quadrature weight must be positive")
    xi, vecs = matrix_eigs
    return EigenSystem(quadrature_weight * np.asarray(xi, dtype=float), np.asarray(vecs, dtype=float), float(quadrature_weight))


def eigensystem(matrix, quadrature_weight: float) -> EigenSystem:
    return operator_scale(sym_eig(matrix), quadrature_weight)


def truncate_fve(eigenvalues, fve: float = 0.99, q_max: int = 50) -> int:
    """Smallest q whose cumulative share of the clipped spectrum reaches ``fve``."""
    if not 0 < fve <= 1:
        raise ValueError("fve must lie in (0, 1]")
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = lam.sum()
    if not total > 0:
        raise DegenerateError("spectrum has no positive eigenvalue")
    share = np.cumsum(lam) / total
    # ratios that should reach 1 can fall short by rounding
    q = int(np.searchsorted(share, fve - 1e-12 * fve, side="left")) + 1
    return min(q, q_max, lam.size)
