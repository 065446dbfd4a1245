"""Command-line interface.

Exit codes: 0 success (and all checks passed), 1 a validation or statistical
test failed, 2 usage or configuration problems, 3 numeric failures
(divergent integrals, indefinite covariance, step control).

Reports are JSON with a fixed envelope (tool, version, spec hash, seed,
command, payload); ``--no-timestamp`` drops the one volatile field so the
same invocation yields byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, analysis, catalog
from .errors import (
    DiagonalNotUnit,
    DivergentIntegral,
    ExpressionError,
    FailureRateExceeded,
    IndexUnavailable,
    NonIntegrableSingularity,
    NotPositiveDefinite,
    ParameterOutOfRange,
    StepStuck,
    SupportViolation,
)
from .linalg import solve_nu
from .measure import sample_initial_condition, spacing_measures
from .model import load_model, validate_skew_symmetry
from .rng import PhiloxStream
from .sde import (
    DeterministicInit,
    PathwiseInit,
    SimConfig,
    simulate,
)

_USAGE_ERRORS = (ValueError, ExpressionError, ParameterOutOfRange, OSError,
                 json.JSONDecodeError, IndexUnavailable, KeyError)
_NUMERIC_ERRORS = (DivergentIntegral, NotPositiveDefinite, NonIntegrableSingularity,
                   StepStuck, FailureRateExceeded, DiagonalNotUnit, SupportViolation)


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--preset", choices=sorted(catalog.PRESETS), help="built-in model family")
    p.add_argument("--model", metavar="FILE", help="model document (JSON)")
    p.add_argument("--K", type=int, default=8, help="number of coordinates for presets")
    p.add_argument("--beta", type=float, help="preset parameter beta")
    p.add_argument("--mu", type=float, help="preset parameter mu")


def _add_output_args(p: argparse.ArgumentParser):
    p.add_argument("--out", metavar="FILE", help="write the JSON report here instead of stdout")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for reproducible bytes")


def _add_sim_args(p: argparse.ArgumentParser, paths=10000, dt=1e-3, horizon=1.0):
    p.add_argument("--paths", type=int, default=paths)
    p.add_argument("--dt", type=float, default=dt)
    p.add_argument("--horizon", type=float, default=horizon)
    p.add_argument("--record", default=None,
                   help="comma-separated record times (default: 0, T/2, T)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--backend", choices=["auto", "numba", "numpy"], default=None)
    p.add_argument("--threads", type=int, default=None)


def _load_spec(args):
    if args.model and args.preset:
        raise ValueError("give either --preset or --model, not both")
    if args.model:
        return load_model(args.model)
    if args.preset:
        params = {}
        if args.beta is not None:
            params["beta"] = args.beta
        if args.mu is not None:
            params["mu"] = args.mu
        return catalog.build_preset(args.preset, K=args.K, **params)
    raise ValueError("a model is required: --preset NAME or --model FILE")


def _check_writable(path: str | None):
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise ValueError(f"output location {path!r} is not writable")


def _emit(args, command: str, payload: dict, spec=None, seed: int | None = None) -> None:
    report = {
        "tool": "qsbrown",
        "version": __version__,
        "command": command,
        "payload": payload,
    }
    if spec is not None:
        report["spec_hash"] = spec.spec_hash()
    if seed is not None:
        report["seed"] = seed
    if not getattr(args, "no_timestamp", False):
        report["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_record(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip() != "")
    except ValueError as e:
        raise ValueError(f"bad --record value {text!r}") from e


def _sim_config(args) -> SimConfig:
    if args.record is None:
        times = (0.0, args.horizon / 2.0, args.horizon)
    else:
        times = _parse_record(args.record)
    return SimConfig(
        dt=args.dt,
        horizon=args.horizon,
        n_paths=args.paths,
        record_times=times,
        seed=args.seed,
    )


def _parse_function(text: str, dim: int) -> analysis.TestFunction:
    text = text.strip()

    def coord(tok):
        tok = tok.strip()
        if tok == "x1":
            return 0
        if tok.startswith("y") and tok[1:].isdigit():
            k = int(tok[1:])
            if 1 <= k <= dim - 1:
                return k
        raise ValueError(f"unknown coordinate {tok!r} (have x1, y1..y{dim - 1})")
    if text.endswith("^2"):
        i = coord(text[:-2])
        return analysis.quadratic_function(i, i, dim)
    if "*" in text:
        a, b = text.split("*", 1)
        return analysis.quadratic_function(coord(a), coord(b), dim)
    return analysis.coordinate_function(coord(text), dim)


# ---------------------------------------------------------------------------
# subcommands


def cmd_catalog(args) -> int:
    payload = {
        "presets": [
            {
                "name": p.name,
                "description": p.description,
                "parameters": list(p.parameters),
                "simulation_only": p.simulation_only,
            }
            for p in catalog.list_presets()
        ]
    }
    _emit(args, "catalog", payload)
    return 0


def cmd_validate(args) -> int:
    spec = _load_spec(args)
    report = validate_skew_symmetry(spec, tol=args.tol)
    _emit(args, "validate", report.to_dict(), spec=spec)
    return 0 if report.passed else 1


def cmd_nu(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec, M=args.M)
    payload = {"M": len(nu), "values": nu.values.tolist(), "residual": nu.residual}
    _emit(args, "nu", payload, spec=spec)
    return 0


def cmd_measure(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec)
    ks = args.k if args.k else list(range(1, spec.K))
    if not ks:
        raise ValueError("K=1 has no spacings; nothing to report")
    measures = spacing_measures(spec, nu, ks)
    payload = {
        "measures": [
            {
                "k": k,
                "nu": m.nu,
                "Z": m.Z,
                "mean": m.mean,
                "variance": m.variance,
                "fisher_information": m.fisher,
                "support_window": [m.z_lo, m.z_hi],
                "quantile_roundtrip_error": m.roundtrip_error,
            }
            for k, m in sorted(measures.items())
        ]
    }
    _emit(args, "measure", payload, spec=spec)
    return 0


def cmd_sample(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec)
    _check_writable(args.out)
    stream = PhiloxStream(args.seed, 0)
    if args.what == "spacing":
        measures = spacing_measures(spec, nu, [args.k])
        draws = measures[args.k].sample(stream, args.n)
        rows = [[v] for v in draws]
        header = [f"y_{args.k}"]
    else:
        rows = [sample_initial_condition(spec, nu, stream).tolist() for _ in range(args.n)]
        header = [f"x_{k}" for k in range(1, spec.K + 1)]
    text = ",".join(header) + "\n"
    text += "\n".join(",".join(f"{v:.17g}" for v in row) for row in rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _write_paths_csv(path: str, ens) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("path,time," + ",".join(f"x_{k}" for k in range(1, ens.K + 1)) + "\n")
        for p in range(ens.n_paths):
            for ti, t in enumerate(ens.record_times):
                coords = ",".join(f"{v:.17g}" for v in ens.positions[ti, p])
                fh.write(f"{p},{t:.17g},{coords}\n")


def cmd_simulate(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec)
    _check_writable(args.out)
    _check_writable(args.csv)
    init = None
    if args.init_zeros and args.init_file:
        raise ValueError("give at most one of --init-zeros / --init-file")
    if args.init_zeros:
        init = DeterministicInit(tuple(0.0 for _ in range(spec.K)))
    elif args.init_file:
        data = np.loadtxt(args.init_file, delimiter=",", ndmin=2)
        if data.shape == (1, spec.K):
            init = DeterministicInit(tuple(data[0]))
        else:
            init = PathwiseInit(data)
    ens = simulate(spec, nu, _sim_config(args), init=init,
                   backend=args.backend, threads=args.threads)
    if args.csv:
        _write_paths_csv(args.csv, ens)
    payload = ens.summary()
    if args.csv:
        payload["paths_csv"] = args.csv
    _emit(args, "simulate", payload, spec=spec, seed=args.seed)
    return 0


def cmd_test_qs(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec)
    _check_writable(args.out)
    ens = simulate(spec, nu, _sim_config(args), backend=args.backend, threads=args.threads)
    report = analysis.test_quasi_stationarity(ens, spec, nu)
    _emit(args, "test-qs", report.to_dict(), spec=spec, seed=args.seed)
    return 0 if report.passed else 1


def cmd_test_consistency(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec)
    _check_writable(args.out)
    report = analysis.test_consistency(
        spec, nu, args.J, _sim_config(args),
        negative_control=args.negative_control,
        backend=args.backend, threads=args.threads,
    )
    _emit(args, "test-consistency", report.to_dict(), spec=spec, seed=args.seed)
    return 0 if report.passed else 1


def cmd_generator_check(args) -> int:
    spec = _load_spec(args)
    nu = solve_nu(spec)
    _check_writable(args.out)
    f = _parse_function(args.f, spec.K)
    times = tuple(np.linspace(0.0, args.horizon, args.record_points))
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths,
                    record_times=times, seed=args.seed)
    ens = simulate(spec, nu, cfg, backend=args.backend, threads=args.threads)
    half = None
    if not args.no_halved:
        cfg2 = SimConfig(dt=args.dt / 2, horizon=args.horizon, n_paths=args.paths,
                         record_times=times, seed=args.seed + 1)
        half = simulate(spec, nu, cfg2, backend=args.backend, threads=args.threads)
    report = analysis.test_martingale(spec, nu, f, ens, half)
    _emit(args, "generator-check", report.to_dict(), spec=spec, seed=args.seed)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qsbrown",
        description="simulate hierarchically interacting Brownian particles and "
        "verify their quasi-stationary spacing laws",
    )
    ap.add_argument("--version", action="version", version=f"qsbrown {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list built-in presets")
    _add_output_args(p)
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("validate", help="check the covariance/interaction conditions")
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("nu", help="solve the drift-tilt system")
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--M", type=int, default=None, help="number of components (default K+d-1)")
    p.set_defaults(func=cmd_nu)

    p = sub.add_parser("measure", help="spacing-law summaries")
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--k", type=int, action="append", help="spacing index (repeatable; default all)")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("sample", help="draw from spacing laws (CSV)")
    _add_model_args(p)
    p.add_argument("--what", choices=["spacing", "init"], default="spacing")
    p.add_argument("--k", type=int, default=1, help="spacing index for --what spacing")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="run the truncated system")
    _add_model_args(p)
    _add_sim_args(p)
    _add_output_args(p)
    p.add_argument("--csv", metavar="FILE", help="also write full paths as CSV")
    p.add_argument("--init-zeros", action="store_true", help="start every path at the origin")
    p.add_argument("--init-file", metavar="FILE", help="CSV of initial positions (1 or n_paths rows)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("test-qs", help="marginal-law test at recorded times")
    _add_model_args(p)
    _add_sim_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_test_qs)

    p = sub.add_parser("test-consistency", help="projection-consistency test")
    _add_model_args(p)
    _add_sim_args(p)
    _add_output_args(p)
    p.add_argument("--J", type=int, required=True, help="size of the smaller system")
    p.add_argument("--negative-control", action="store_true",
                   help="drop the boundary compensation in the smaller system (must fail)")
    p.set_defaults(func=cmd_test_consistency)

    p = sub.add_parser("generator-check", help="martingale-residual test for one observable")
    _add_model_args(p)
    _add_sim_args(p, paths=20000)
    _add_output_args(p)
    p.add_argument("--f", default="x1", help="observable: x1, y1, ..., or squares/products (x1^2, x1*y1)")
    p.add_argument("--record-points", type=int, default=51)
    p.add_argument("--no-halved", action="store_true", help="skip the halved-step allowance run")
    p.set_defaults(func=cmd_generator_check)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as e:
        print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
        return 3
    except _USAGE_ERRORS as e:
        print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
