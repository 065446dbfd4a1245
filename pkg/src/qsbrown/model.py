"""Model description: coefficients, potential, and structural validation.

A model is a truncation level ``K``, an interaction range ``d``, a noise
covariance ``a_{kl}``, an interaction weight ``r_{lk}`` supported on the band
``k <= l <= k+d-1``, a drift sequence ``mu_k`` that stabilizes at some index,
and an interaction potential ``U``. Indices in the public API are 1-based, as
in the usual statement of these systems.

The central structural requirement ties the covariance differences

    atilde_{kl} = a_{kl} + a_{k+1,l+1} - a_{k+1,l} - a_{k,l+1}

to the interaction weights: ``atilde_{kl} = (r_{lk} - r_{l,k+1})/2`` above the
diagonal, a matching first-row condition, unit normalizations on both
diagonals, and positive definiteness of the K x K covariance window.
:func:`validate_skew_symmetry` checks all of it entry by entry and returns a
report rather than raising, so callers can inspect every failing condition.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IndexUnavailable, NotPositiveDefinite
from .expr import compile_expression

SUPPORT_FULL = "full_line"
SUPPORT_HALF = "positive_half_line"

# points where a fresh Potential's derivative is spot-checked against a
# central difference of its value
_CHECK_POINTS = {
    SUPPORT_FULL: (-2.1, -1.0, 0.0, 1.1, 2.3),
    SUPPORT_HALF: (0.3, 0.7, 1.3, 2.7, 5.1),
}
_FD_STEP = 1e-5
_FD_TOL = 1e-6


@dataclass(frozen=True)
class Potential:
    """Interaction potential ``U`` with its derivative and support.

    ``value`` and ``derivative`` must accept scalars and numpy arrays alike.
    ``kind`` and ``params`` identify the family for serialization and for the
    compiled simulation kernel ("free", "beta_tasep", "oy", or "custom").
    Construction verifies ``derivative`` against a central difference of
    ``value`` at a few interior points.
    """

    value: Callable
    derivative: Callable
    support: str
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.support not in (SUPPORT_FULL, SUPPORT_HALF):
            raise ValueError(f"unknown support {self.support!r}")
        for z in _CHECK_POINTS[self.support]:
            fd = (self.value(z + _FD_STEP) - self.value(z - _FD_STEP)) / (2 * _FD_STEP)
            dv = self.derivative(z)
            if not math.isfinite(fd) or abs(fd - dv) > _FD_TOL * (1.0 + abs(dv)):
                raise ValueError(
                    f"derivative disagrees with finite difference at z={z}: "
                    f"{dv!r} vs {fd!r}"
                )

    def jit_code(self) -> tuple[int, float, float] | None:
        """(code, p0, p1) for the compiled kernel, or None if not jittable."""
        if self.kind == "free":
            return (0, 0.0, 0.0)
        if self.kind == "beta_tasep":
            return (1, self.params["beta"] / 4.0 - 0.5, self.params["mu"] / 2.0)
        if self.kind == "oy":
            return (2, self.params["mu"], 0.0)
        return None


def potential_free() -> Potential:
    """U identically zero on the full line (independent Brownian coordinates)."""
    return Potential(
        value=lambda z: 0.0 * z,
        derivative=lambda z: 0.0 * z,
        support=SUPPORT_FULL,
        kind="free",
    )


def potential_beta_tasep(beta: float, mu: float) -> Potential:
    """Gamma-type spacing family on the positive half-line.

    U(z) = (beta/4 - 1/2) log z - (mu/2) z, so the spacing weight
    exp(2U - 2 nu z) at nu = 0 is z^{beta/2 - 1} e^{-mu z}.
    """
    c = beta / 4.0 - 0.5
    m = mu / 2.0
    return Potential(
        value=lambda z: c * np.log(z) - m * z,
        derivative=lambda z: c / z - m,
        support=SUPPORT_HALF,
        kind="beta_tasep",
        params={"beta": float(beta), "mu": float(mu)},
    )


def potential_oconnell_yor(mu: float) -> Potential:
    """Log-gamma spacing family on the full line.

    U(z) = -(mu z + e^{-z}) / 2, giving spacing weight e^{-mu z - e^{-z}}.
    """
    m = float(mu)
    return Potential(
        value=lambda z: -0.5 * (m * z + np.exp(-z)),
        derivative=lambda z: 0.5 * (np.exp(-z) - m),
        support=SUPPORT_FULL,
        kind="oy",
        params={"mu": m},
    )


def potential_custom(value_expr: str, derivative_expr: str, support: str) -> Potential:
    """Potential from two expression strings in the variable ``z``."""
    return Potential(
        value=compile_expression(value_expr),
        derivative=compile_expression(derivative_expr),
        support=support,
        kind="custom",
        params={"value": value_expr, "derivative": derivative_expr},
    )


@dataclass(frozen=True)
class DriftSequence:
    """Drift coefficients mu_k, constant from index ``k0`` on.

    ``values[j-1]`` is mu_j for j <= len(values); beyond the stored prefix the
    sequence continues with the stabilized value ``values[k0-1]``.
    """

    values: tuple[float, ...]
    k0: int = 1

    def __post_init__(self):
        if self.k0 < 1 or len(self.values) < self.k0:
            raise ValueError("need k0 >= 1 and at least k0 stored values")
        tail = self.values[self.k0 - 1]
        for j in range(self.k0, len(self.values)):
            if self.values[j] != tail:
                raise ValueError(
                    f"drift values must be constant from k0={self.k0} on; "
                    f"index {j + 1} breaks it"
                )

    def mu(self, k: int) -> float:
        if k < 1:
            raise ValueError("drift index must be >= 1")
        if k <= len(self.values):
            return self.values[k - 1]
        return self.values[self.k0 - 1]


def _dense_lookup(data: np.ndarray, what: str) -> Callable:
    n = data.shape[0]

    def entry(i: int, j: int) -> float:
        if not (1 <= i <= n and 1 <= j <= n):
            raise IndexUnavailable(what, i, j)
        return float(data[i - 1, j - 1])

    return entry


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Bundle of everything that defines one finite system.

    ``covariance(k, l)`` returns a_{kl} and ``interaction(l, k)`` returns
    r_{lk}; both are 1-based. Use the accessors :meth:`a` and :meth:`r`
    rather than the raw callables; ``r`` applies the band convention
    (zero outside ``k <= l <= k+d-1``) so stored data never needs explicit
    zero padding.
    """

    K: int
    d: int
    covariance: Callable
    interaction: Callable
    drifts: DriftSequence
    potential: Potential
    doc: dict | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    def a(self, k: int, l: int) -> float:
        return float(self.covariance(k, l))

    def r(self, l: int, k: int) -> float:
        if l < k or l > k + self.d - 1:
            return 0.0
        return float(self.interaction(l, k))

    def mu(self, k: int) -> float:
        return self.drifts.mu(k)

    def materialize(self) -> dict:
        """Concrete coefficient windows large enough for every operation here.

        Covariance up to index K+d, interaction band up to row K+d-1, drifts
        up to K+d. Raises IndexUnavailable if the backing data is smaller.
        """
        n = self.K + self.d
        a = [[self.a(k, l) for l in range(1, n + 1)] for k in range(1, n + 1)]
        r = [
            [self.r(l, k) for k in range(max(1, l - self.d + 1), l + 1)]
            for l in range(1, n)
        ]
        mu = [self.mu(k) for k in range(1, n + 1)]
        pot = {"kind": self.potential.kind, "support": self.potential.support}
        pot.update(self.potential.params)
        return {"K": self.K, "d": self.d, "a": a, "r": r, "mu": mu, "potential": pot}

    def spec_hash(self) -> str:
        """Stable 16-hex digest of the materialized coefficients."""
        blob = json.dumps(self.materialize(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ConditionCheck:
    """One checked equation: |lhs - rhs| <= tol, or a bare pass/fail fact."""

    condition: str
    indices: tuple[int, ...]
    lhs: float
    rhs: float | None
    abs_error: float | None
    passed: bool

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "indices": list(self.indices),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_error": self.abs_error,
            "passed": self.passed,
        }


@dataclass
class ValidationReport:
    tol: float
    checks: list[ConditionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[ConditionCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "failures": [c.to_dict() for c in self.failures()],
        }

    def summary(self) -> str:
        bad = self.failures()
        if not bad:
            return f"all {len(self.checks)} conditions hold at tol={self.tol:g}"
        lines = [f"{len(bad)}/{len(self.checks)} conditions fail at tol={self.tol:g}:"]
        for c in bad[:20]:
            lines.append(
                f"  {c.condition}{c.indices}: lhs={c.lhs:.12g}"
                + (f" rhs={c.rhs:.12g} |err|={c.abs_error:.3e}" if c.rhs is not None else "")
            )
        return "\n".join(lines)


def validate_skew_symmetry(spec: ModelSpec, tol: float = 1e-9) -> ValidationReport:
    """Check every structural condition linking covariance and interaction.

    Conditions, each recorded as one entry per index pair:

    - covariance symmetry over the working window,
    - atilde_{kk} = 1 and r_{kk} = 1 for k <= K+d-1,
    - atilde_{kl} = (r_{lk} - r_{l,k+1})/2 for k < l <= K+d-1,
    - a_{1k} - a_{1,k+1} = r_{k1}/2 for k <= K+d-1,
    - Cholesky of the K x K covariance window succeeds.

    May raise IndexUnavailable if the spec's stored data cannot cover the
    required window.
    """
    from . import linalg

    checks: list[ConditionCheck] = []
    m = spec.K + spec.d - 1

    def eq(condition, indices, lhs, rhs):
        err = abs(lhs - rhs)
        checks.append(ConditionCheck(condition, indices, lhs, rhs, err, err <= tol))

    for k in range(1, m + 2):
        for l in range(k + 1, m + 2):
            eq("covariance_symmetry", (k, l), spec.a(k, l), spec.a(l, k))
    for k in range(1, m + 1):
        eq("atilde_diagonal_unit", (k,), linalg.a_tilde(spec, k, k), 1.0)
        eq("interaction_diagonal_unit", (k,), spec.r(k, k), 1.0)
    for k in range(1, m + 1):
        for l in range(k + 1, m + 1):
            eq(
                "atilde_interaction_pair",
                (k, l),
                linalg.a_tilde(spec, k, l),
                0.5 * (spec.r(l, k) - spec.r(l, k + 1)),
            )
        eq("first_row_increment", (k,), spec.a(1, k) - spec.a(1, k + 1), 0.5 * spec.r(k, 1))
    try:
        factor = linalg.cholesky(linalg.covariance_window(spec, spec.K))
        smallest = float(np.min(np.diag(factor.L)) ** 2)
        checks.append(
            ConditionCheck("positive_definite", (spec.K,), smallest, None, None, smallest > 0)
        )
    except NotPositiveDefinite as e:
        checks.append(ConditionCheck("positive_definite", (e.k,), float("nan"), None, None, False))
    return ValidationReport(tol=tol, checks=checks)


def validate_measure_conditions(spec: ModelSpec, nu) -> ValidationReport:
    """Check integrability of every spacing law the truncated system uses.

    For each k <= K+d-1 (one computation per distinct nu_k): finite
    normalization, finite second moment, finite Fisher information of the
    weight exp(2U - 2 nu_k z). Divergent cases raise DivergentIntegral with
    the spacing index and the offending quantity filled in.
    """
    from .errors import DivergentIntegral, NonIntegrableSingularity
    from .measure import measure_integrals

    checks: list[ConditionCheck] = []
    cache: dict[float, dict] = {}
    for k in range(1, spec.K + spec.d):
        nu_k = float(nu.nu(k))
        if nu_k not in cache:
            try:
                cache[nu_k] = measure_integrals(spec.potential, nu_k)
            except (DivergentIntegral, NonIntegrableSingularity) as e:
                which = getattr(e, "which", "fisher_information")
                raise DivergentIntegral(which, k=k, detail=str(e)) from e
        vals = cache[nu_k]
        for name in ("partition_function", "second_moment", "fisher_information"):
            v = float(vals[name])
            checks.append(
                ConditionCheck(name, (k,), v, None, None, math.isfinite(v))
            )
    return ValidationReport(tol=0.0, checks=checks)


def truncate(spec: ModelSpec, J: int) -> ModelSpec:
    """The J-coordinate subsystem sharing all coefficients with ``spec``."""
    if not (1 <= J <= spec.K):
        raise ValueError(f"need 1 <= J <= K={spec.K}")
    doc = dict(spec.doc, K=J) if spec.doc is not None else None
    return ModelSpec(
        K=J,
        d=spec.d,
        covariance=spec.covariance,
        interaction=spec.interaction,
        drifts=spec.drifts,
        potential=spec.potential,
        doc=doc,
    )


# ---------------------------------------------------------------------------
# JSON documents


def _potential_from_doc(doc: dict) -> Potential:
    kind = doc.get("kind")
    if kind == "beta_tasep":
        return potential_beta_tasep(float(doc["beta"]), float(doc["mu"]))
    if kind == "oy":
        return potential_oconnell_yor(float(doc["mu"]))
    if kind == "custom":
        return potential_custom(doc["value"], doc["derivative"], doc["support"])
    raise ValueError(f"unknown potential kind {kind!r}")


def _potential_to_doc(p: Potential) -> dict:
    if p.kind == "beta_tasep":
        return {"kind": "beta_tasep", "beta": p.params["beta"], "mu": p.params["mu"]}
    if p.kind == "oy":
        return {"kind": "oy", "mu": p.params["mu"]}
    if p.kind == "free":
        return {"kind": "custom", "value": "0", "derivative": "0", "support": p.support}
    return {
        "kind": "custom",
        "value": p.params["value"],
        "derivative": p.params["derivative"],
        "support": p.support,
    }


def spec_from_doc(doc: dict) -> ModelSpec:
    """Build a ModelSpec from its JSON document form."""
    try:
        K = int(doc["K"])
        d = int(doc["d"])
        cov = doc["covariance"]
        inter = doc["interaction"]
        drifts = doc["drifts"]
        pot = doc["potential"]
    except (KeyError, TypeError) as e:
        raise ValueError(f"model document missing field: {e}") from e

    if cov.get("kind") == "identity_half":
        covariance = lambda k, l: 0.5 if k == l else 0.0  # noqa: E731
    elif cov.get("kind") == "dense":
        covariance = _dense_lookup(np.asarray(cov["data"], dtype=float), "covariance")
    else:
        raise ValueError(f"unknown covariance kind {cov.get('kind')!r}")

    if inter.get("kind") == "delta":
        interaction = lambda l, k: 1.0 if l == k else 0.0  # noqa: E731
    elif inter.get("kind") == "banded":
        data = np.asarray(inter["data"], dtype=float)
        lookup = _dense_lookup(data, "interaction")
        interaction = lambda l, k: lookup(l, k)  # noqa: E731
    else:
        raise ValueError(f"unknown interaction kind {inter.get('kind')!r}")

    return ModelSpec(
        K=K,
        d=d,
        covariance=covariance,
        interaction=interaction,
        drifts=DriftSequence(tuple(float(v) for v in drifts["values"]), int(drifts.get("k0", 1))),
        potential=_potential_from_doc(pot),
        doc=doc,
    )


def spec_to_doc(spec: ModelSpec) -> dict:
    """Document form of a spec. Only specs built from documents round-trip."""
    if spec.doc is not None:
        return spec.doc
    raise ValueError("spec was built programmatically; no document form stored")


def spec_from_json(text: str) -> ModelSpec:
    return spec_from_doc(json.loads(text))


def load_model(path: str) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(fh.read())
