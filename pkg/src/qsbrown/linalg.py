"""Coefficient algebra: covariance differences, the nu system, Cholesky, Theta.

Everything here works on a ModelSpec through its ``a``/``r``/``mu`` accessors
only, so it applies equally to presets, documents, and programmatically built
specs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DiagonalNotUnit, NotPositiveDefinite

_DIAG_TOL = 1e-8


def a_tilde(spec, k: int, l: int) -> float:
    """Second covariance difference a_{kl} + a_{k+1,l+1} - a_{k+1,l} - a_{k,l+1}."""
    return spec.a(k, l) + spec.a(k + 1, l + 1) - spec.a(k + 1, l) - spec.a(k, l + 1)


def covariance_window(spec, n: int) -> NDArray[np.float64]:
    """Dense n x n window of a_{kl}, 1-based indices 1..n."""
    out = np.empty((n, n))
    for k in range(1, n + 1):
        for l in range(1, n + 1):
            out[k - 1, l - 1] = spec.a(k, l)
    return out


@dataclass(frozen=True)
class NuVector:
    """Solution of the triangular system tying drifts to spacing tilts.

    ``values[k-1]`` is nu_k. ``residual`` is the max-norm defect of the
    solved equations, recomputed after substitution.
    """

    values: NDArray[np.float64]
    residual: float

    def nu(self, k: int) -> float:
        if not (1 <= k <= len(self.values)):
            raise ValueError(f"nu index {k} outside 1..{len(self.values)}")
        return float(self.values[k - 1])

    def __len__(self) -> int:
        return len(self.values)


def solve_nu(spec, M: int | None = None) -> NuVector:
    """Solve for nu_1..nu_M by forward substitution.

    Row k of the system reads

        sum_l (r_{kl} - r_{k,l+1}) nu_l = mu_k - mu_{k+1},

    which is unit lower triangular with band reaching back to column k-d
    (the entry at l = k-d is -r_{k,k-d+1}, nonzero whenever d > 0). The
    default M = K+d-1 covers every index the truncated drift needs. Raises
    DiagonalNotUnit if a diagonal entry strays from 1.
    """
    if M is None:
        M = spec.K + spec.d - 1
    v = np.empty(M)
    for k in range(1, M + 1):
        diag = spec.r(k, k) - spec.r(k, k + 1)
        if abs(diag - 1.0) > _DIAG_TOL:
            raise DiagonalNotUnit(k, diag)
        s = spec.mu(k) - spec.mu(k + 1)
        for l in range(max(1, k - spec.d), k):
            s -= (spec.r(k, l) - spec.r(k, l + 1)) * v[l - 1]
        v[k - 1] = s / diag
    residual = 0.0
    for k in range(1, M + 1):
        lhs = (spec.r(k, k) - spec.r(k, k + 1)) * v[k - 1]
        for l in range(max(1, k - spec.d), k):
            lhs += (spec.r(k, l) - spec.r(k, l + 1)) * v[l - 1]
        residual = max(residual, abs(lhs - (spec.mu(k) - spec.mu(k + 1))))
    return NuVector(values=v, residual=residual)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L L^T equal to the input matrix."""

    L: NDArray[np.float64]
    matrix: NDArray[np.float64]

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.L @ self.L.T - self.matrix)))


def cholesky(matrix: NDArray[np.float64]) -> CholeskyFactor:
    """Cholesky factorization that names the failing leading minor.

    Raises NotPositiveDefinite(k) with the 1-based size of the first leading
    minor whose pivot is nonpositive.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    L = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0:
            raise NotPositiveDefinite(j + 1)
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return CholeskyFactor(L=L, matrix=a)


def theta(spec, n: int) -> NDArray[np.float64]:
    """Covariance of the n-vector (X_1, X_1 - X_2, ..., X_{n-1} - X_n).

    Entry formulas follow from bilinearity of the covariance under the
    differencing map; equivalently theta = M A M^T for the matrix M sending
    positions to (first coordinate, spacings).
    """
    th = np.empty((n, n))
    th[0, 0] = spec.a(1, 1)
    for l in range(2, n + 1):
        th[0, l - 1] = spec.a(1, l - 1) - spec.a(1, l)
        th[l - 1, 0] = spec.a(l - 1, 1) - spec.a(l, 1)
    for k in range(2, n + 1):
        for l in range(2, n + 1):
            th[k - 1, l - 1] = (
                spec.a(k - 1, l - 1) + spec.a(k, l) - spec.a(k, l - 1) - spec.a(k - 1, l)
            )
    return th
