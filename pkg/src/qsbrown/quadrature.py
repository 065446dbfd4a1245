"""Quadrature engine for spacing-law integrals.

Three layers:

- :func:`adaptive_simpson`: plain adaptive Simpson with Richardson control on
  a finite interval where the integrand is finite.
- :func:`graded_half_integral`: integral over (0, c] as a sum over dyadic
  pieces [c 2^{-j-1}, c 2^{-j}], with geometric extrapolation of the
  remainder and a divergence test on the piece-mass ratios. Integrands whose
  local exponent sits within ~1e-3 of the non-integrable boundary are
  conservatively reported divergent; the test never reports a divergent
  integral as finite.
- :func:`measure_integrals`: everything a spacing law needs (normalization,
  first and second moments, Fisher information two ways) computed from the
  log-weight 2U(z) - 2 nu z, with the integration window located by scanning
  for the mode and doubling outward until a polynomial-envelope tail bound
  drops below 1e-16 of the running mass.

All work happens on the exp-normalized weight exp(lambda - lambda_max), so
only the returned partition function can overflow, never the internals.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DivergentIntegral, NonIntegrableSingularity
from .model import SUPPORT_HALF, Potential

_RATIO_DIVERGENT = 0.9995
_MAX_PIECES = 1200
_WARMUP_PIECES = 6
_TAIL_LOG_TINY = math.log(1e-16)
_MAX_HALF_WIDTH = 2.0**60


def adaptive_simpson(f: Callable, a: float, b: float, tol: float, max_depth: int = 48) -> float:
    """Adaptive Simpson integral of ``f`` over [a, b] to absolute ``tol``.

    Raises NonIntegrableSingularity if the integrand evaluates non-finite
    anywhere it is sampled.
    """
    if b <= a:
        return 0.0

    def ev(z):
        v = float(f(z))
        if not math.isfinite(v):
            raise NonIntegrableSingularity(z, "integrand is not finite")
        return v

    fa, fb = ev(a), ev(b)
    m = 0.5 * (a + b)
    fm = ev(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a0, b0, f0, fmid, f1, s0, t0, depth = stack.pop()
        m0 = 0.5 * (a0 + b0)
        lm = 0.5 * (a0 + m0)
        rm = 0.5 * (m0 + b0)
        flm, frm = ev(lm), ev(rm)
        h6 = (b0 - a0) / 12.0
        left = h6 * (f0 + 4.0 * flm + fmid)
        right = h6 * (fmid + 4.0 * frm + f1)
        delta = left + right - s0
        if depth >= max_depth or abs(delta) <= 15.0 * t0:
            total += left + right + delta / 15.0
        else:
            stack.append((a0, m0, f0, flm, fmid, left, 0.5 * t0, depth + 1))
            stack.append((m0, b0, fmid, frm, f1, right, 0.5 * t0, depth + 1))
    return total


def graded_half_integral(f: Callable, c: float, tol: float) -> float:
    """Integral of ``f`` over (0, c] on a dyadic mesh graded toward 0.

    Piece j covers [c 2^{-j-1}, c 2^{-j}]. Once past a warmup, the geometric
    mean of recent piece-mass ratios drives both the stopping rule (stop when
    the extrapolated remainder is below tol/2) and divergence detection
    (three consecutive ratio estimates at or above ~1 raise
    NonIntegrableSingularity at 0). Hitting the piece budget without
    convergence also raises; integrable exponents within about 0.01 of the
    boundary can land there, which errs on the divergent side.
    """
    if c <= 0:
        return 0.0
    total = 0.0
    masses: list[float] = []
    hot_streak = 0
    hi = c
    for j in range(_MAX_PIECES):
        lo = 0.5 * hi
        piece = adaptive_simpson(f, lo, hi, tol / (8.0 * (1 + j)))
        total += piece
        masses.append(abs(piece))
        hi = lo
        if len(masses) >= 2 and masses[-2] > 0:
            window = masses[-5:]
            ratios = [
                window[i + 1] / window[i]
                for i in range(len(window) - 1)
                if window[i] > 0
            ]
            if ratios:
                rho = math.exp(sum(math.log(max(r, 1e-300)) for r in ratios) / len(ratios))
                if j >= _WARMUP_PIECES:
                    if rho >= _RATIO_DIVERGENT:
                        hot_streak += 1
                        if hot_streak >= 3:
                            raise NonIntegrableSingularity(
                                0.0, f"piece-mass ratio {rho:.6f} is not summable"
                            )
                    else:
                        hot_streak = 0
                        if masses[-1] * rho / (1.0 - rho) < 0.5 * tol:
                            return total
        if masses[-1] == 0.0 and j >= _WARMUP_PIECES:
            return total
    raise NonIntegrableSingularity(
        0.0, f"no convergence within {_MAX_PIECES} graded pieces"
    )


def cumulative_simpson_uniform(f_vals: np.ndarray, h: float) -> np.ndarray:
    """Running integral at the nodes of a uniform grid (composite Simpson).

    Needs an odd number of nodes. Interior odd nodes use the standard
    half-panel correction so the result is second-order accurate everywhere
    and fourth-order at even nodes.
    """
    n = len(f_vals)
    if n % 2 == 0:
        raise ValueError("need an odd number of nodes")
    F = np.empty(n)
    F[0] = 0.0
    f0 = f_vals[0:-2:2]
    f1 = f_vals[1:-1:2]
    f2 = f_vals[2::2]
    pair = h / 3.0 * (f0 + 4.0 * f1 + f2)
    half = h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2)
    F[2::2] = np.cumsum(pair)
    F[1:-1:2] = F[0:-2:2] + half
    return F


# ---------------------------------------------------------------------------
# measure-level integrals


def _log_weight(potential: Potential, nu: float) -> Callable:
    def lam(z):
        return 2.0 * float(potential.value(z)) - 2.0 * nu * z

    return lam


def _scan_mode(potential: Potential, nu: float) -> tuple[float, float]:
    """Coarse argmax of the log-weight, used only to seed the window search."""
    lam = _log_weight(potential, nu)
    if potential.support == SUPPORT_HALF:
        grid = np.geomspace(1e-12, 1e6, 1201)
        vals = 2.0 * np.asarray(potential.value(grid), dtype=float) - 2.0 * nu * grid
        i = int(np.nanargmax(vals))
        return float(grid[i]), float(vals[i])
    half_width = 64.0
    center = 0.0
    while half_width <= _MAX_HALF_WIDTH:
        grid = np.linspace(center - half_width, center + half_width, 1025)
        vals = 2.0 * np.asarray(potential.value(grid), dtype=float) - 2.0 * nu * grid
        i = int(np.nanargmax(vals))
        if 0 < i < len(grid) - 1:
            return float(grid[i]), float(vals[i])
        center = float(grid[i])
        half_width *= 2.0
    raise DivergentIntegral("partition_function", detail="log-weight has no interior mode")


def _tail_edge(
    potential: Potential, nu: float, mode: float, lam_max: float, direction: float
) -> float:
    """Window edge in one direction: double until the envelope tail is dust.

    The envelope is the weight times (1 + z^2 + U'(z)^2), so one window is
    valid for the normalization, both moments, and the Fisher integrand. On
    budget exhaustion the slowest-decaying component names the divergence.
    """
    lam = _log_weight(potential, nu)
    b = max(1.0, 2.0 * abs(mode))
    while b <= _MAX_HALF_WIDTH:
        z = mode + direction * b
        zh = mode + direction * 0.5 * b
        lz = lam(z) - lam_max
        lzh = lam(zh) - lam_max
        du = float(potential.derivative(z))
        env = lz + math.log1p(z * z + du * du)
        if env + math.log(b) < _TAIL_LOG_TINY and lz <= lzh:
            return z
        b *= 2.0
    z = mode + direction * b / 2.0
    lz = lam(z) - lam_max
    du = float(potential.derivative(z))
    logb = math.log(b)
    if lz + logb >= _TAIL_LOG_TINY:
        which = "partition_function"
    elif lz + 2.0 * math.log(abs(z) + 1.0) + logb >= _TAIL_LOG_TINY:
        which = "second_moment"
    else:
        which = "fisher_information"
    raise DivergentIntegral(which, detail=f"tail toward {direction:+g} does not decay")


def locate_window(potential: Potential, nu: float) -> tuple[float, float, float, float]:
    """(z_lo, z_hi, mode, lam_max) enclosing all but ~1e-16 of the envelope mass."""
    mode, lam_max = _scan_mode(potential, nu)
    z_hi = _tail_edge(potential, nu, mode, lam_max, +1.0)
    if potential.support == SUPPORT_HALF:
        z_lo = 0.0
    else:
        z_lo = _tail_edge(potential, nu, mode, lam_max, -1.0)
    return z_lo, z_hi, mode, lam_max


_WHICH = {
    "one": "partition_function",
    "z": "second_moment",
    "z2": "second_moment",
    "score2": "fisher_information",
    "du": "fisher_information",
    "du2": "fisher_information",
}


def measure_integrals(potential: Potential, nu: float) -> dict:
    """All integrals of the spacing weight exp(2U - 2 nu z) in one pass.

    Returns a dict with partition_function, mean, second_moment, variance,
    fisher_information (definition form E[(2U' - 2nu)^2]) and
    fisher_expanded (recombined from E[U'], E[U'^2]), mean_dU, window and
    mode. Raises DivergentIntegral naming the first quantity whose integral
    fails to converge.
    """
    nu = float(nu)
    z_lo, z_hi, mode, lam_max = locate_window(potential, nu)
    half = potential.support == SUPPORT_HALF

    def weight(z):
        return math.exp(2.0 * float(potential.value(z)) - 2.0 * nu * z - lam_max)

    factors = {
        "one": lambda z: 1.0,
        "z": lambda z: z,
        "z2": lambda z: z * z,
        "score2": lambda z: (2.0 * float(potential.derivative(z)) - 2.0 * nu) ** 2,
        "du": lambda z: float(potential.derivative(z)),
        "du2": lambda z: float(potential.derivative(z)) ** 2,
    }

    # coarse mass estimate fixes the absolute tolerance at 1e-10 of Z
    if half:
        coarse_grid = np.geomspace(max(z_lo, z_hi * 1e-14, 1e-300), z_hi, 4097)
    else:
        coarse_grid = np.linspace(z_lo, z_hi, 4097)
    lam_vals = 2.0 * np.asarray(potential.value(coarse_grid), dtype=float) - 2.0 * nu * coarse_grid
    z_coarse = float(np.trapezoid(np.exp(np.clip(lam_vals - lam_max, -745.0, 50.0)), coarse_grid))
    tol = 1e-10 * max(z_coarse, 1e-12)

    cut = min(1.0, 0.5 * z_hi) if half else None

    def integrate(name):
        g = factors[name]
        fn = lambda z: weight(z) * g(z)  # noqa: E731
        try:
            if half:
                return graded_half_integral(fn, cut, tol) + adaptive_simpson(fn, cut, z_hi, tol)
            return adaptive_simpson(fn, z_lo, z_hi, tol)
        except NonIntegrableSingularity as e:
            raise DivergentIntegral(_WHICH[name], detail=str(e)) from e

    z_norm = integrate("one")
    if not z_norm > 0:
        raise DivergentIntegral("partition_function", detail="weight integrates to zero")
    m1 = integrate("z") / z_norm
    m2 = integrate("z2") / z_norm
    fisher = integrate("score2") / z_norm
    e_du = integrate("du") / z_norm
    e_du2 = integrate("du2") / z_norm
    return {
        "partition_function": z_norm * math.exp(lam_max),
        "log_partition_function": math.log(z_norm) + lam_max,
        "mean": m1,
        "second_moment": m2,
        "variance": m2 - m1 * m1,
        "fisher_information": fisher,
        "fisher_expanded": 4.0 * e_du2 - 8.0 * nu * e_du + 4.0 * nu * nu,
        "mean_dU": e_du,
        "window": (z_lo, z_hi),
        "mode": mode,
        "lam_max": lam_max,
        "norm_scaled": z_norm,
    }
