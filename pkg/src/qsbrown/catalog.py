"""Built-in model presets.

All presets use half-identity covariance (2A = identity), nearest-neighbour
interaction (d = 1, r the Kronecker delta), and constant drifts mu_k = mu/2,
which makes every tilt nu_k = 0 and the spacing laws explicit:

- ``beta_tasep``: density proportional to z^{beta/2 - 1} e^{-mu z} on the
  positive half-line (Gamma with shape beta/2 and rate mu). Integrability of
  the Fisher information requires beta > 4, which the preset enforces.
- ``oconnell_yor``: density proportional to e^{-mu z - e^{-z}} on the full
  line (negative log of a Gamma(mu, 1) variable), normalization Gamma(mu).
- ``free``: no interaction at all. Useful for exercising the simulator and
  generator algebra, but it has no normalizable spacing law, so
  measure-dependent operations reject it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import ParameterOutOfRange
from .model import ModelSpec, spec_from_doc


@dataclass(frozen=True)
class PresetInfo:
    name: str
    description: str
    parameters: tuple[str, ...]
    simulation_only: bool
    build: Callable


def _base_doc(K: int, mu_half: float, potential_doc: dict) -> dict:
    return {
        "K": int(K),
        "d": 1,
        "covariance": {"kind": "identity_half"},
        "interaction": {"kind": "delta"},
        "drifts": {"values": [mu_half], "k0": 1},
        "potential": potential_doc,
    }


def preset_beta_tasep(K: int, beta: float, mu: float = 1.0) -> ModelSpec:
    """Gamma-spacing preset; requires beta > 4 and mu > 0."""
    if not beta > 4.0:
        raise ParameterOutOfRange(
            f"beta={beta:g}: the spacing law loses finite Fisher information at "
            "beta <= 4, so the preset requires beta > 4"
        )
    if not mu > 0:
        raise ParameterOutOfRange(f"mu={mu:g}: need mu > 0")
    doc = _base_doc(K, mu / 2.0, {"kind": "beta_tasep", "beta": float(beta), "mu": float(mu)})
    return spec_from_doc(doc)


def preset_oconnell_yor(K: int, mu: float) -> ModelSpec:
    """Log-gamma spacing preset; requires mu > 0."""
    if not mu > 0:
        raise ParameterOutOfRange(f"mu={mu:g}: need mu > 0")
    doc = _base_doc(K, mu / 2.0, {"kind": "oy", "mu": float(mu)})
    return spec_from_doc(doc)


def preset_free(K: int) -> ModelSpec:
    """Interaction-free Brownian coordinates (simulation only)."""
    doc = _base_doc(K, 0.0, {"kind": "custom", "value": "0", "derivative": "0", "support": "full_line"})
    return spec_from_doc(doc)


def expected_spacing_stats(name: str, **params) -> dict:
    """Closed-form normalization and moments where the family has them."""
    if name == "beta_tasep":
        beta, mu = params["beta"], params.get("mu", 1.0)
        a = beta / 2.0
        return {
            "Z": math.gamma(a) / mu**a,
            "mean": a / mu,
            "variance": a / mu**2,
            "fisher": mu * mu / (a - 2.0),
        }
    if name == "oconnell_yor":
        mu = params["mu"]
        # mean and variance are digamma values; tests pin them numerically
        return {"Z": math.gamma(mu), "fisher": mu}
    return {}


PRESETS: dict[str, PresetInfo] = {
    "beta_tasep": PresetInfo(
        name="beta_tasep",
        description="Gamma spacings on the half-line (shape beta/2, rate mu); beta > 4",
        parameters=("K", "beta", "mu"),
        simulation_only=False,
        build=preset_beta_tasep,
    ),
    "oconnell_yor": PresetInfo(
        name="oconnell_yor",
        description="log-gamma spacings on the full line; mu > 0",
        parameters=("K", "mu"),
        simulation_only=False,
        build=preset_oconnell_yor,
    ),
    "free": PresetInfo(
        name="free",
        description="independent Brownian coordinates; no stationary spacing law",
        parameters=("K",),
        simulation_only=True,
        build=preset_free,
    ),
}


def list_presets() -> list[PresetInfo]:
    return sorted(PRESETS.values(), key=lambda p: p.name)


def build_preset(name: str, K: int, **params) -> ModelSpec:
    """Dispatch by preset name; unknown names raise ValueError."""
    info = PRESETS.get(name)
    if info is None:
        raise ValueError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return info.build(K, **params)
