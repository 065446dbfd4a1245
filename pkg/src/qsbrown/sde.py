"""Truncated-system simulation driver.

The K-coordinate system evolves as

    dX_k = dB_k + [ mu_k + sum_{l=k}^{K-1} U'(X_l - X_{l+1}) r_{lk}
                          + sum_{l=K}^{k+d-1} nu_l r_{lk} ] dt,

with <B_k, B_l> = a_{kl} t. The last sum is the boundary compensation that
replaces interactions with truncated coordinates by their stationary tilts;
it is empty once k + d - 1 < K.

Work is split into fixed 4096-path chunks; each path owns the random stream
whose id equals its absolute path index, so results are bitwise reproducible
for a given seed and backend no matter how many worker threads run or how
paths are batched across calls.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import _kernels_numba, _kernels_numpy
from .errors import FailureRateExceeded, StepStuck, SupportViolation
from .linalg import NuVector, cholesky, covariance_window
from .measure import spacing_measures
from .model import SUPPORT_HALF, ModelSpec
from .rng import uniform_matrix

CHUNK = 4096

BACKEND_ENV = "QSBROWN_BACKEND"
THREADS_ENV = "QSBROWN_THREADS"


@dataclass(frozen=True)
class SimConfig:
    """Grid, ensemble size, and step-control knobs for one run.

    ``record_times`` are snapped to the nearest grid point. Rejected
    proposals (half-line support only) retry with a halved step, up to
    ``max_halvings`` consecutive rejections per grid step; a path that
    exhausts the budget, or whose step can no longer be subdivided in the
    integer bookkeeping, is excluded and counted. ``failure_limit`` is the
    tolerated fraction of excluded paths (0 means any exclusion raises).
    """

    dt: float
    horizon: float
    n_paths: int
    record_times: tuple[float, ...] = ()
    seed: int = 42
    floor_eps: float = 1e-8
    max_halvings: int = 30
    failure_limit: float = 1e-3

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if not (self.horizon >= self.dt):
            raise ValueError("horizon must be at least one step")
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if not (0 < self.max_halvings <= 62):
            raise ValueError("max_halvings must be in 1..62")
        times = self.record_times if self.record_times else (self.horizon,)
        n_total = int(round(self.horizon / self.dt))
        idx = []
        for t in times:
            if not (0.0 <= t <= self.horizon * (1 + 1e-12)):
                raise ValueError(f"record time {t} outside [0, horizon]")
            idx.append(min(int(round(t / self.dt)), n_total))
        object.__setattr__(self, "_record_indices", tuple(sorted(set(idx))))

    @property
    def record_indices(self) -> tuple[int, ...]:
        return self._record_indices

    @property
    def snapped_times(self) -> NDArray[np.float64]:
        return np.array(self._record_indices, dtype=float) * self.dt


@dataclass(frozen=True)
class QuasiStationaryInit:
    """X_1 = 0, spacings drawn independently from their stationary laws."""


@dataclass(frozen=True)
class DeterministicInit:
    """Every path starts at the same position vector."""

    x0: tuple[float, ...]


@dataclass(frozen=True)
class PathwiseInit:
    """Explicit per-path starting positions, shape (n_paths, K)."""

    states: NDArray[np.float64]


@dataclass
class PathEnsemble:
    """Recorded positions of the surviving paths.

    ``positions[i, p, k]`` is coordinate k+1 of path p at
    ``record_times[i]``. Failed paths are dropped; ``n_failed`` counts them
    against ``n_requested``.
    """

    record_times: NDArray[np.float64]
    positions: NDArray[np.float64]
    spec_hash: str
    seed: int
    dt: float
    backend: str
    n_requested: int
    n_failed: int
    halving_events: int

    @property
    def n_paths(self) -> int:
        return self.positions.shape[1]

    @property
    def K(self) -> int:
        return self.positions.shape[2]

    def x1(self, ti: int) -> NDArray[np.float64]:
        return self.positions[ti, :, 0]

    def spacings(self, ti: int) -> NDArray[np.float64]:
        p = self.positions[ti]
        return p[:, :-1] - p[:, 1:]

    def summary(self) -> dict:
        mean = self.positions.mean(axis=1)
        var = self.positions.var(axis=1)
        out = {
            "record_times": [float(t) for t in self.record_times],
            "n_paths": int(self.n_paths),
            "n_failed": int(self.n_failed),
            "halving_events": int(self.halving_events),
            "backend": self.backend,
            "seed": self.seed,
            "mean": mean.tolist(),
            "variance": var.tolist(),
        }
        if self.K > 1:
            sp = self.positions[:, :, :-1] - self.positions[:, :, 1:]
            out["spacing_mean"] = sp.mean(axis=1).tolist()
            out["spacing_variance"] = sp.var(axis=1).tolist()
        return out


def interaction_window(spec: ModelSpec) -> NDArray[np.float64]:
    """R[l-1, k-1] = r_{lk} for 1 <= k <= K, 1 <= l <= K-1 (band applied)."""
    K = spec.K
    R = np.zeros((max(K - 1, 0), K))
    for l in range(1, K):
        for k in range(max(1, l - spec.d + 1), l + 1):
            R[l - 1, k - 1] = spec.r(l, k)
    return R


def boundary_vector(spec: ModelSpec, nu: NuVector) -> NDArray[np.float64]:
    """Tail compensation sum_{l=K}^{k+d-1} nu_l r_{lk} per coordinate."""
    K = spec.K
    b = np.zeros(K)
    for k in range(1, K + 1):
        for l in range(K, k + spec.d):
            b[k - 1] += nu.nu(l) * spec.r(l, k)
    return b


def drift(spec: ModelSpec, nu: NuVector, x) -> NDArray[np.float64]:
    """Reference drift at one position vector (1-based formulas, plain loops).

    Raises SupportViolation if a spacing leaves the potential's support.
    """
    x = np.asarray(x, dtype=float)
    K = spec.K
    if x.shape != (K,):
        raise ValueError(f"state must have shape ({K},)")
    y = x[:-1] - x[1:]
    if spec.potential.support == SUPPORT_HALF and np.any(y <= 0):
        raise SupportViolation(f"nonpositive spacing in {y}")
    out = np.empty(K)
    for k in range(1, K + 1):
        s = spec.mu(k)
        for l in range(k, K):
            s += float(spec.potential.derivative(y[l - 1])) * spec.r(l, k)
        for l in range(K, k + spec.d):
            s += nu.nu(l) * spec.r(l, k)
        out[k - 1] = s
    return out


def resolve_backend(spec: ModelSpec, backend: str | None = None) -> str:
    """Pick the execution backend for this spec.

    Explicit argument beats the QSBROWN_BACKEND environment variable beats
    "auto". "auto" compiles when possible and falls back to numpy for
    potentials without a kernel code.
    """
    choice = backend or os.environ.get(BACKEND_ENV, "auto")
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}")
    jittable = spec.potential.jit_code() is not None and _kernels_numba.HAVE_NUMBA
    if choice == "auto":
        return "numba" if jittable else "numpy"
    if choice == "numba" and not jittable:
        raise ValueError("numba backend requires a built-in potential family")
    return choice


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def _common_tables(measures: dict) -> NDArray[np.float64]:
    qs = [measures[k].quantiles for k in sorted(measures)]
    n_max = max(len(q) for q in qs)
    rows = []
    for q in qs:
        if len(q) == n_max:
            rows.append(q)
            continue
        if (n_max - 1) % (len(q) - 1) != 0:
            raise RuntimeError("quantile tables are not dyadically nested")
        # node counts are all 2^j + 1, so reinterpolation is exact at old nodes
        rows.append(
            np.interp(
                np.linspace(0.0, 1.0, n_max), np.linspace(0.0, 1.0, len(q)), q
            )
        )
    return np.asarray(rows)


def _qs_chunk_states(seed, path0, n, tables) -> NDArray[np.float64]:
    n_q = tables.shape[1]
    k1 = tables.shape[0]
    streams = np.uint64(path0) + np.arange(n, dtype=np.uint64)
    u = uniform_matrix(seed, streams, np.zeros(n, dtype=np.uint64), k1)
    pos = u * (n_q - 1)
    i = pos.astype(np.int64)
    frac = pos - i
    lo = tables[np.arange(k1)[None, :], i]
    hi = tables[np.arange(k1)[None, :], np.minimum(i + 1, n_q - 1)]
    y = lo + frac * (hi - lo)
    x = np.empty((n, k1 + 1))
    x[:, 0] = 0.0
    x[:, 1:] = -np.cumsum(y, axis=1)
    return x


def simulate(
    spec: ModelSpec,
    nu: NuVector,
    config: SimConfig,
    init: QuasiStationaryInit | DeterministicInit | PathwiseInit | None = None,
    backend: str | None = None,
    threads: int | None = None,
    boundary_override: NDArray[np.float64] | None = None,
) -> PathEnsemble:
    """Run the truncated system and record positions at the requested times.

    ``boundary_override`` replaces the tail compensation vector, which is how
    diagnostic runs (negative controls) deliberately break the truncation.

    Raises NotPositiveDefinite (bad covariance), DivergentIntegral (when the
    quasi-stationary initial law cannot be built), SupportViolation (bad
    explicit initial state), StepStuck / FailureRateExceeded (step control).
    """
    if init is None:
        init = QuasiStationaryInit()
    K = spec.K
    P = config.n_paths
    backend_name = resolve_backend(spec, backend)
    n_workers = resolve_threads(threads)

    L = cholesky(covariance_window(spec, K)).L
    R = interaction_window(spec)
    if boundary_override is not None:
        bnd = np.asarray(boundary_override, dtype=float)
        if bnd.shape != (K,):
            raise ValueError(f"boundary override must have shape ({K},)")
    else:
        bnd = boundary_vector(spec, nu)
    mu = np.array([spec.mu(k) for k in range(1, K + 1)])
    halfline = spec.potential.support == SUPPORT_HALF

    idx = np.asarray(config.record_indices, dtype=np.int64)
    rec_steps = np.diff(np.concatenate([[0], idx])).astype(np.int64)

    tables = None
    x0_full = None
    blk0 = 0
    if isinstance(init, QuasiStationaryInit):
        if K > 1:
            tables = _common_tables(spacing_measures(spec, nu))
            blk0 = (K - 1 + 1) // 2
    elif isinstance(init, DeterministicInit):
        row = np.asarray(init.x0, dtype=float)
        if row.shape != (K,):
            raise ValueError(f"initial vector must have shape ({K},)")
        if halfline and K > 1 and np.any(row[:-1] - row[1:] <= 0):
            raise SupportViolation("initial spacings must be positive")
        x0_full = np.broadcast_to(row, (P, K))
    elif isinstance(init, PathwiseInit):
        x0_full = np.asarray(init.states, dtype=float)
        if x0_full.shape != (P, K):
            raise ValueError(f"initial states must have shape ({P}, {K})")
        if halfline and K > 1 and np.any(x0_full[:, :-1] - x0_full[:, 1:] <= 0):
            raise SupportViolation("initial spacings must be positive")
    else:
        raise TypeError(f"unknown init {init!r}")

    out = np.empty((len(idx), P, K))
    status = np.empty(P, dtype=np.int64)
    seed = int(config.seed) & 0xFFFFFFFFFFFFFFFF

    if backend_name == "numba":
        code, p0, p1 = spec.potential.jit_code()
    else:
        du_fn = spec.potential.derivative

    def work(lo: int, hi: int) -> int:
        n = hi - lo
        if isinstance(init, QuasiStationaryInit):
            if K > 1:
                x0 = _qs_chunk_states(seed, lo, n, tables)
            else:
                x0 = np.zeros((n, K))
        else:
            x0 = np.ascontiguousarray(x0_full[lo:hi])
        if backend_name == "numba":
            return int(
                _kernels_numba.run_chunk(
                    np.uint64(seed & 0xFFFFFFFF),
                    np.uint64(seed >> 32),
                    lo,
                    x0,
                    blk0,
                    rec_steps,
                    config.dt,
                    mu,
                    bnd,
                    R,
                    L,
                    spec.d,
                    code,
                    p0,
                    p1,
                    halfline,
                    config.floor_eps,
                    config.max_halvings,
                    out[:, lo:hi],
                    status[lo:hi],
                )
            )
        return int(
            _kernels_numpy.run_chunk(
                seed,
                lo,
                x0,
                blk0,
                rec_steps,
                config.dt,
                mu,
                bnd,
                R,
                L,
                du_fn,
                halfline,
                config.floor_eps,
                config.max_halvings,
                out[:, lo:hi],
                status[lo:hi],
            )
        )

    spans = [(lo, min(lo + CHUNK, P)) for lo in range(0, P, CHUNK)]
    if n_workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as ex:
            halvings = sum(ex.map(lambda s: work(*s), spans))
    else:
        halvings = sum(work(*s) for s in spans)

    failed = np.nonzero(status >= 0)[0]
    n_failed = len(failed)
    if n_failed:
        if config.failure_limit <= 0:
            p = int(failed[0])
            raise StepStuck(p, float(status[p]) * config.dt)
        if n_failed > config.failure_limit * P:
            raise FailureRateExceeded(n_failed, P, config.failure_limit)
        out = np.delete(out, failed, axis=1)

    return PathEnsemble(
        record_times=config.snapped_times,
        positions=out,
        spec_hash=spec.spec_hash(),
        seed=config.seed,
        dt=config.dt,
        backend=backend_name,
        n_requested=P,
        n_failed=n_failed,
        halving_events=int(halvings),
    )
