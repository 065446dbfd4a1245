"""Throughput comparison of the two step kernels.

Runs the same workload (log-gamma preset, quasi-stationary start) through
the compiled backend and the vectorized numpy fallback, and reports
path-steps per second for each. The first compiled call is excluded by a
warmup run so JIT time does not pollute the numbers.

Usage: python benchmarks/bench_backends.py [--K 8] [--paths 20000] [--dt 1e-3]
"""

from __future__ import annotations

import argparse
import time

from qsbrown import SimConfig, build_preset, simulate, solve_nu
from qsbrown._kernels_numba import HAVE_NUMBA


def run(backend: str, spec, nu, cfg) -> float:
    t0 = time.perf_counter()
    ens = simulate(spec, nu, cfg, backend=backend)
    dt = time.perf_counter() - t0
    steps = cfg.n_paths * round(cfg.horizon / cfg.dt)
    rate = steps / dt
    print(f"{backend:>6}: {dt:8.3f} s   {rate / 1e6:8.2f} M path-steps/s   "
          f"(halvings={ens.halving_events}, failed={ens.n_failed})")
    return rate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--horizon", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    spec = build_preset("oconnell_yor", K=args.K, mu=2.0)
    nu = solve_nu(spec)
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths,
                    record_times=(args.horizon,), seed=args.seed)

    print(f"K={args.K} paths={args.paths} dt={args.dt} horizon={args.horizon}")
    if HAVE_NUMBA:
        warm = SimConfig(dt=args.dt, horizon=10 * args.dt, n_paths=64,
                         record_times=(10 * args.dt,), seed=args.seed)
        simulate(spec, nu, warm, backend="numba")
        fast = run("numba", spec, nu, cfg)
    else:
        print(" numba: not installed")
        fast = None
    slow = run("numpy", spec, nu, cfg)
    if fast is not None:
        print(f"speedup: {fast / slow:.1f}x")


if __name__ == "__main__":
    main()
