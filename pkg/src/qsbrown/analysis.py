"""Statistical verification of simulated ensembles.

Three families of checks:

- quasi-stationarity: at every recorded time the first coordinate is
  Gaussian with the predicted mean rate and variance, and each spacing keeps
  its stationary law (moment z-tests at 3 sigma plus a one-sample KS test at
  the asymptotic 1% level);
- projection consistency: a J-coordinate run and the first J coordinates of
  a K-coordinate run agree in law (two-sample KS), with an optional negative
  control that removes the boundary compensation and must fail;
- generator/martingale: for test functions f, the Monte Carlo residual of
  f(state_T) - f(state_0) - integral of (generator f) along the path
  vanishes within noise plus a step-size allowance.

Observables are always the vector v = (X_1, Y_1, ..., Y_{K-1}); the
generator acts on it with constant diffusion matrix Theta and state-dependent
drift assembled from the position drifts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .linalg import NuVector, theta
from .measure import spacing_measures
from .model import ModelSpec, truncate
from .sde import (
    PathEnsemble,
    SimConfig,
    DeterministicInit,
    boundary_vector,
    interaction_window,
    simulate,
)

# asymptotic 1% critical coefficients for Kolmogorov-Smirnov distances
KS_COEF_ONE = 1.63
KS_COEF_TWO = 1.628


def ks_critical_one(n: int) -> float:
    return KS_COEF_ONE / math.sqrt(n)


def ks_critical_two(n: int, m: int) -> float:
    return KS_COEF_TWO * math.sqrt((n + m) / (n * m))


def ks_statistic(sample: NDArray, cdf) -> float:
    """One-sample KS distance of ``sample`` against a callable CDF."""
    s = np.sort(np.asarray(sample, dtype=float))
    n = len(s)
    F = np.asarray(cdf(s), dtype=float)
    lo = np.max(F - np.arange(n) / n)
    hi = np.max(np.arange(1, n + 1) / n - F)
    return float(max(lo, hi))


def ks_statistic_two(a: NDArray, b: NDArray) -> float:
    """Two-sample KS distance."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / len(a)
    Fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(Fa - Fb)))


@dataclass
class StatCheck:
    """One scalar comparison: |observed - expected| <= tolerance."""

    name: str
    observed: float
    expected: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "observed": float(self.observed),
            "expected": float(self.expected),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
        }


@dataclass
class TestReport:
    test_id: str
    checks: list[StatCheck]
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[StatCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "test_id": self.test_id,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "meta": self.meta,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def _mean_check(name, sample, expected, allowance=0.0, z=3.0) -> StatCheck:
    n = len(sample)
    m = float(np.mean(sample))
    se = float(np.std(sample, ddof=1)) / math.sqrt(n)
    tol = z * se + allowance
    return StatCheck(name, m, float(expected), tol, abs(m - expected) <= tol)


def _variance_check(name, sample, expected, z=3.0) -> StatCheck:
    n = len(sample)
    x = np.asarray(sample, dtype=float)
    v = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    se = math.sqrt(max(m4 - v * v, 0.0) / n)
    tol = z * se
    return StatCheck(name, v, float(expected), tol, abs(v - expected) <= tol)


# ---------------------------------------------------------------------------
# test functions and the generator


@dataclass(frozen=True)
class TestFunction:
    """Polynomial observable of v = (X_1, Y_1, ..., Y_{K-1}), degree <= 2.

    ``kind`` is "coordinate" (v_i) or "quadratic" (v_i v_j). Index 0 is X_1;
    index k >= 1 is the k-th spacing.
    """

    kind: str
    i: int
    j: int
    dim: int
    name: str

    def value(self, v: NDArray) -> NDArray:
        if self.kind == "coordinate":
            return v[..., self.i]
        return v[..., self.i] * v[..., self.j]

    def gradient(self, v: NDArray) -> NDArray:
        g = np.zeros_like(v)
        if self.kind == "coordinate":
            g[..., self.i] = 1.0
        elif self.i == self.j:
            g[..., self.i] = 2.0 * v[..., self.i]
        else:
            g[..., self.i] = v[..., self.j]
            g[..., self.j] = v[..., self.i]
        return g

    def hessian(self) -> NDArray:
        h = np.zeros((self.dim, self.dim))
        if self.kind == "quadratic":
            h[self.i, self.j] += 1.0
            h[self.j, self.i] += 1.0
        return h


def _coord_name(i: int) -> str:
    return "x1" if i == 0 else f"y{i}"


def coordinate_function(i: int, dim: int) -> TestFunction:
    return TestFunction("coordinate", i, i, dim, _coord_name(i))


def quadratic_function(i: int, j: int, dim: int) -> TestFunction:
    name = f"{_coord_name(i)}^2" if i == j else f"{_coord_name(i)}*{_coord_name(j)}"
    return TestFunction("quadratic", min(i, j), max(i, j), dim, name)


def to_observables(positions: NDArray) -> NDArray:
    """Map positions (..., K) to (X_1, spacings) with the same leading shape."""
    x1 = positions[..., :1]
    if positions.shape[-1] == 1:
        return x1.copy()
    y = positions[..., :-1] - positions[..., 1:]
    return np.concatenate([x1, y], axis=-1)


def observable_drift(spec: ModelSpec, nu: NuVector, v: NDArray) -> NDArray:
    """Drift of (X_1, Y_1, ...) at observable points v, vectorized.

    Position drifts are mu + boundary + U'(y) R; the first coordinate keeps
    its own, spacings take consecutive differences.
    """
    v = np.asarray(v, dtype=float)
    K = spec.K
    mu = np.array([spec.mu(k) for k in range(1, K + 1)])
    base = mu + boundary_vector(spec, nu)
    pos = np.broadcast_to(base, v.shape[:-1] + (K,)).copy()
    if K > 1:
        y = v[..., 1:]
        du = np.asarray(spec.potential.derivative(y), dtype=float)
        pos += du @ interaction_window(spec)
    out = np.empty_like(pos)
    out[..., 0] = pos[..., 0]
    if K > 1:
        out[..., 1:] = pos[..., :-1] - pos[..., 1:]
    return out


def generator_apply(spec: ModelSpec, nu: NuVector, f: TestFunction, v) -> float:
    """Generator of the observable process applied to f at one point."""
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.K,):
        raise ValueError(f"observable point must have shape ({spec.K},)")
    th = theta(spec, spec.K)
    b = observable_drift(spec, nu, v)
    second = 0.5 * float(np.sum(th * f.hessian()))
    return second + float(np.dot(b, f.gradient(v)))


def generator_values(spec: ModelSpec, nu: NuVector, f: TestFunction, v: NDArray) -> NDArray:
    """Generator applied along an array of observable points (..., K)."""
    th = theta(spec, spec.K)
    b = observable_drift(spec, nu, v)
    second = 0.5 * float(np.sum(th * f.hessian()))
    return second + np.sum(b * f.gradient(v), axis=-1)


# ---------------------------------------------------------------------------
# ensemble-level tests


def test_quasi_stationarity(
    ensemble: PathEnsemble, spec: ModelSpec, nu: NuVector, z: float = 3.0
) -> TestReport:
    """Marginal law of every recorded time against the stationary prediction.

    X_1(t) must be Gaussian with mean rate mu_1 + sum_l nu_l r_{l1} and
    variance a_{11} t (Dirac at 0 for t = 0); each spacing must match its
    stationary law in mean, variance, and KS distance.
    """
    checks: list[StatCheck] = []
    K = spec.K
    rate = spec.mu(1)
    for l in range(1, spec.d + 1):
        rate += nu.nu(l) * spec.r(l, 1)
    measures = spacing_measures(spec, nu) if K > 1 else {}
    for ti, t in enumerate(ensemble.record_times):
        x1 = ensemble.x1(ti)
        label = f"t={t:g}"
        if t == 0.0:
            dmax = float(np.max(np.abs(x1)))
            checks.append(StatCheck(f"x1_pinned[{label}]", dmax, 0.0, 1e-12, dmax <= 1e-12))
        else:
            checks.append(_mean_check(f"x1_mean[{label}]", x1, rate * t, z=z))
            checks.append(_variance_check(f"x1_var[{label}]", x1, spec.a(1, 1) * t, z=z))
        if K > 1:
            sp = ensemble.spacings(ti)
            for k in range(1, K):
                m = measures[k]
                y = sp[:, k - 1]
                checks.append(_mean_check(f"y{k}_mean[{label}]", y, m.mean, z=z))
                checks.append(_variance_check(f"y{k}_var[{label}]", y, m.variance, z=z))
                d = ks_statistic(y, m.cdf)
                crit = ks_critical_one(len(y))
                checks.append(StatCheck(f"y{k}_ks[{label}]", d, 0.0, crit, d <= crit))
    meta = {
        "test": "marginal law at recorded times",
        "n_paths": ensemble.n_paths,
        "seed": ensemble.seed,
        "dt": ensemble.dt,
        "spec_hash": ensemble.spec_hash,
        "backend": ensemble.backend,
    }
    return TestReport("quasi_stationarity", checks, meta)


def test_consistency(
    spec: ModelSpec,
    nu: NuVector,
    J: int,
    config: SimConfig,
    negative_control: bool = False,
    swap_seeds: bool = False,
    backend: str | None = None,
    threads: int | None = None,
) -> TestReport:
    """Projection of the K-system onto its first J coordinates vs a J-system.

    Runs both systems with independent seeds and compares X_1 and the first
    J-1 spacings at every record time by two-sample KS at the 1% level. With
    ``negative_control`` the J-system drops its boundary compensation, which
    must push the laws apart (the report then records the *failing* checks as
    its expected outcome; callers assert ``not report.passed``).
    """
    if not (1 <= J < spec.K):
        raise ValueError("need 1 <= J < K")
    seed_a, seed_b = config.seed, config.seed + 1
    if swap_seeds:
        seed_a, seed_b = seed_b, seed_a
    cfg_k = SimConfig(
        dt=config.dt,
        horizon=config.horizon,
        n_paths=config.n_paths,
        record_times=config.record_times,
        seed=seed_a,
        floor_eps=config.floor_eps,
        max_halvings=config.max_halvings,
        failure_limit=config.failure_limit,
    )
    cfg_j = SimConfig(
        dt=config.dt,
        horizon=config.horizon,
        n_paths=config.n_paths,
        record_times=config.record_times,
        seed=seed_b,
        floor_eps=config.floor_eps,
        max_halvings=config.max_halvings,
        failure_limit=config.failure_limit,
    )
    sub = truncate(spec, J)
    ens_k = simulate(spec, nu, cfg_k, backend=backend, threads=threads)
    ens_j = simulate(
        sub,
        nu,
        cfg_j,
        backend=backend,
        threads=threads,
        boundary_override=np.zeros(J) if negative_control else None,
    )
    checks: list[StatCheck] = []
    for ti, t in enumerate(ens_k.record_times):
        label = f"t={t:g}"
        if t == 0.0:
            continue
        a = ens_k.x1(ti)
        b = ens_j.x1(ti)
        d = ks_statistic_two(a, b)
        crit = ks_critical_two(len(a), len(b))
        checks.append(StatCheck(f"x1_ks2[{label}]", d, 0.0, crit, d <= crit))
        if J > 1:
            sa = ens_k.spacings(ti)
            sb = ens_j.spacings(ti)
            for k in range(1, J):
                d = ks_statistic_two(sa[:, k - 1], sb[:, k - 1])
                crit = ks_critical_two(sa.shape[0], sb.shape[0])
                checks.append(StatCheck(f"y{k}_ks2[{label}]", d, 0.0, crit, d <= crit))
    meta = {
        "test": "projection consistency",
        "J": J,
        "K": spec.K,
        "n_paths": config.n_paths,
        "seeds": [seed_a, seed_b],
        "dt": config.dt,
        "negative_control": negative_control,
        "spec_hash": spec.spec_hash(),
    }
    return TestReport("projection_consistency", checks, meta)


def martingale_residual(
    spec: ModelSpec, nu: NuVector, f: TestFunction, ensemble: PathEnsemble
) -> dict:
    """Per-path residual of the compensated observable over the record grid.

    R = f(v_T) - f(v_0) - trapezoid of (generator f)(v_t); returns mean,
    standard error, and sample size. The record grid must be dense enough
    that the trapezoid quadrature error is dominated by the step bias.
    """
    v = to_observables(ensemble.positions)
    lf = generator_values(spec, nu, f, v)
    ftail = f.value(v[-1])
    fhead = f.value(v[0])
    integral = np.trapezoid(lf, x=ensemble.record_times, axis=0)
    r = ftail - fhead - integral
    n = len(r)
    return {
        "mean": float(np.mean(r)),
        "se": float(np.std(r, ddof=1)) / math.sqrt(n),
        "n": n,
    }


def test_martingale(
    spec: ModelSpec,
    nu: NuVector,
    f: TestFunction,
    ensemble: PathEnsemble,
    ensemble_halved: PathEnsemble | None = None,
    z: float = 3.0,
) -> TestReport:
    """Mean residual compatible with zero, within noise plus step allowance.

    The allowance is 2 |mean(dt) - mean(dt/2)|: the Euler scheme is weak
    first order, so the drift of the residual at step dt is about twice the
    change seen when halving the step.
    """
    base = martingale_residual(spec, nu, f, ensemble)
    allowance = 0.0
    half = None
    if ensemble_halved is not None:
        half = martingale_residual(spec, nu, f, ensemble_halved)
        allowance = 2.0 * abs(base["mean"] - half["mean"])
    tol = z * base["se"] + allowance
    checks = [
        StatCheck(f"residual_mean[{f.name}]", base["mean"], 0.0, tol, abs(base["mean"]) <= tol)
    ]
    meta = {
        "test": "martingale residual",
        "f": f.name,
        "n_paths": base["n"],
        "dt": ensemble.dt,
        "allowance": allowance,
        "se": base["se"],
        "seed": ensemble.seed,
        "spec_hash": ensemble.spec_hash,
    }
    if half is not None:
        meta["halved"] = {"dt": ensemble_halved.dt, "mean": half["mean"], "se": half["se"]}
    return TestReport("martingale_residual", checks, meta)


def one_step_generator_estimate(
    spec: ModelSpec,
    nu: NuVector,
    f: TestFunction,
    v0,
    h: float = 1e-4,
    n_paths: int = 200_000,
    seed: int = 42,
    backend: str | None = None,
) -> dict:
    """Monte Carlo one-step estimate of (generator f)(v0) for cross-checking.

    E[f(v_h) - f(v_0)] / h from a single Euler step started at the position
    vector matching v0 (first coordinate and spacings).
    """
    v0 = np.asarray(v0, dtype=float)
    x0 = np.empty(spec.K)
    x0[0] = v0[0]
    for k in range(1, spec.K):
        x0[k] = x0[k - 1] - v0[k]
    cfg = SimConfig(dt=h, horizon=h, n_paths=n_paths, record_times=(h,), seed=seed)
    ens = simulate(spec, nu, cfg, init=DeterministicInit(tuple(x0)), backend=backend)
    vh = to_observables(ens.positions[0])
    delta = (f.value(vh) - f.value(v0)) / h
    return {
        "estimate": float(np.mean(delta)),
        "se": float(np.std(delta, ddof=1)) / math.sqrt(len(delta)),
        "exact": generator_apply(spec, nu, f, v0),
        "n": len(delta),
    }
