"""Shared fixtures and a generator of random admissible models.

The generator works in the coordinates of (X_1, Y_1, ..., Y_{m}) where the
structural conditions are simplest: the spacing covariance block needs unit
diagonal, zero entries beyond offset d, and band-edge entries that make each
column's above-diagonal part sum to -1/2; the first row is then determined
inside the band and zero outside; the (1,1) entry is chosen through the Schur
complement so the whole matrix stays positive definite. Mapping back with
X_k = X_1 - Y_1 - ... - Y_{k-1} gives the particle covariance, and the
interaction rows follow by telescoping from the unit diagonal.
"""

from __future__ import annotations

import numpy as np
import pytest

from qsbrown.catalog import build_preset
from qsbrown.model import ModelSpec, spec_from_doc


def random_model_doc(rng: np.random.Generator, K: int, d: int) -> dict:
    n = K + d
    m = n - 1

    # unperturbed band matrix: 1 on the diagonal, -1/2 at offset exactly d
    base = np.eye(m)
    for j in range(m - d):
        base[j, j + d] = base[j + d, j] = -0.5
    lam0 = float(np.linalg.eigvalsh(base)[0])
    scale = lam0 / (10.0 * max(1, 4 * (d - 1)))

    for _ in range(50):
        B = base.copy()
        for l in range(2, m + 1):
            for j in range(max(1, l - d + 1), l):
                B[j - 1, l - 1] = B[l - 1, j - 1] = rng.uniform(-scale, scale)
            if l - d >= 1:
                edge = -0.5 - float(B[l - d : l - 1, l - 1].sum())
                B[l - d - 1, l - 1] = B[l - 1, l - d - 1] = edge
        if np.linalg.eigvalsh(B)[0] > 1e-10:
            break
    else:
        raise RuntimeError("could not draw a positive definite spacing block")

    v = np.zeros(m)
    for l in range(1, min(d, m) + 1):
        v[l - 1] = 0.5 + float(B[: l - 1, l - 1].sum())

    theta = np.zeros((n, n))
    theta[1:, 1:] = B
    theta[0, 1:] = theta[1:, 0] = v
    theta[0, 0] = float(v @ np.linalg.solve(B, v)) + rng.uniform(0.3, 1.2)

    S = np.zeros((n, n))
    S[:, 0] = 1.0
    for k in range(1, n):
        S[k, 1 : k + 1] = -1.0
    A = S @ theta @ S.T
    A = 0.5 * (A + A.T)

    R = np.zeros((m, m))
    for l in range(1, m + 1):
        R[l - 1, l - 1] = 1.0
        for k in range(l - 1, max(0, l - d), -1):
            R[l - 1, k - 1] = R[l - 1, k] + 2.0 * B[k - 1, l - 1]

    k0 = int(rng.integers(1, 4))
    drift_values = [float(x) for x in rng.uniform(-1.0, 1.0, size=k0)]

    return {
        "K": K,
        "d": d,
        "covariance": {"kind": "dense", "data": A.tolist()},
        "interaction": {"kind": "banded", "data": R.tolist()},
        "drifts": {"values": drift_values, "k0": k0},
        "potential": {"kind": "oy", "mu": 2.0},
    }


def random_spec(rng: np.random.Generator, K: int, d: int) -> ModelSpec:
    return spec_from_doc(random_model_doc(rng, K, d))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def oy_spec() -> ModelSpec:
    return build_preset("oconnell_yor", K=4, mu=2.0)


@pytest.fixture(scope="session")
def beta_spec() -> ModelSpec:
    return build_preset("beta_tasep", K=4, beta=6.0, mu=1.0)
