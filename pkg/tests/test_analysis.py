import json

import numpy as np
import pytest

from qsbrown import analysis
from qsbrown.analysis import (
    StatCheck,
    TestReport as Report,
    coordinate_function,
    generator_apply,
    generator_values,
    ks_critical_one,
    ks_critical_two,
    ks_statistic,
    ks_statistic_two,
    observable_drift,
    one_step_generator_estimate,
    quadratic_function,
    to_observables,
)
from qsbrown.catalog import build_preset
from qsbrown.linalg import solve_nu, theta
from qsbrown.model import spec_from_doc
from qsbrown.sde import SimConfig, drift, simulate


def _variant_doc(K: int) -> dict:
    # nontrivial boundary compensation: drift (2, 1, 1, ...) gives nu = 1
    return {
        "K": K,
        "d": 1,
        "covariance": {"kind": "identity_half"},
        "interaction": {"kind": "delta"},
        "drifts": {"values": [2.0, 1.0], "k0": 2},
        "potential": {"kind": "oy", "mu": 2.0},
    }


# ---------------------------------------------------------------------------
# KS helpers


def test_ks_one_sample_uniform():
    x = (np.arange(1000) + 0.5) / 1000.0
    d = ks_statistic(x, lambda z: np.clip(z, 0, 1))
    assert d == pytest.approx(0.0005, abs=1e-12)
    assert d < ks_critical_one(1000)


def test_ks_one_sample_detects_shift():
    x = (np.arange(1000) + 0.5) / 1000.0 + 0.2
    d = ks_statistic(x, lambda z: np.clip(z, 0, 1))
    assert d > ks_critical_one(1000)


def test_ks_two_sample_identical_is_zero():
    a = np.arange(10.0)
    assert ks_statistic_two(a, a) == 0.0


def test_ks_two_sample_disjoint_is_one():
    assert ks_statistic_two(np.zeros(5), np.ones(5) + 1.0) == 1.0


def test_ks_two_sample_critical_value():
    assert ks_critical_two(10_000, 10_000) == pytest.approx(
        1.628 * np.sqrt(2.0 / 10_000)
    )


# ---------------------------------------------------------------------------
# observables and the generator


def test_to_observables_round_trip():
    pos = np.array([[1.0, 0.4, -0.1], [0.0, -1.0, -3.0]])
    v = to_observables(pos)
    np.testing.assert_allclose(v[:, 0], pos[:, 0])
    np.testing.assert_allclose(v[:, 1], pos[:, 0] - pos[:, 1])
    np.testing.assert_allclose(v[:, 2], pos[:, 1] - pos[:, 2])


def test_test_function_gradients():
    # central differences are exact for polynomials of degree <= 2, so a
    # large step gives machine-precision agreement with no cancellation
    rng = np.random.default_rng(3)
    v = rng.normal(size=4)
    h = 0.5
    for f in (coordinate_function(2, 4), quadratic_function(0, 0, 4), quadratic_function(1, 3, 4)):
        g = f.gradient(v)
        H = f.hessian()
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            num = (f.value(v + e) - f.value(v - e)) / (2 * h)
            assert g[i] == pytest.approx(num, abs=1e-12)
            for j in range(4):
                e2 = np.zeros(4)
                e2[j] = h
                num2 = (
                    f.value(v + e + e2) - f.value(v + e) - f.value(v + e2) + f.value(v)
                ) / h**2
                assert H[i, j] == pytest.approx(num2, abs=1e-12)


def test_observable_drift_matches_position_drift():
    spec = build_preset("oconnell_yor", K=4, mu=2.0)
    nu = solve_nu(spec)
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = np.sort(rng.normal(size=4))[::-1]
        v = to_observables(x[None, :])[0]
        pos = drift(spec, nu, x)
        ob = observable_drift(spec, nu, v)
        assert ob[0] == pytest.approx(pos[0], abs=1e-12)
        np.testing.assert_allclose(ob[1:], pos[:-1] - pos[1:], atol=1e-12)


def test_generator_coordinate_value():
    spec = build_preset("oconnell_yor", K=2, mu=2.0)
    nu = solve_nu(spec)
    f = coordinate_function(0, 2)
    # drift of X_1 at zero spacing is 1 + U'(0) = 1/2; no second-order term
    assert generator_apply(spec, nu, f, np.array([0.7, 0.0])) == pytest.approx(0.5)


def test_generator_quadratic_value():
    spec = build_preset("free", K=2)
    nu = solve_nu(spec)
    f = quadratic_function(0, 0, 2)
    mu1 = spec.mu(1)
    for x1 in (0.0, 1.3):
        expected = spec.a(1, 1) + 2.0 * x1 * mu1
        got = generator_apply(spec, nu, f, np.array([x1, 0.2]))
        assert got == pytest.approx(expected, abs=1e-12)


def test_generator_values_vectorizes():
    spec = build_preset("oconnell_yor", K=3, mu=2.0)
    nu = solve_nu(spec)
    f = quadratic_function(0, 1, 3)
    rng = np.random.default_rng(8)
    v = rng.normal(size=(6, 3))
    vals = generator_values(spec, nu, f, v)
    for i in range(6):
        assert vals[i] == pytest.approx(generator_apply(spec, nu, f, v[i]), abs=1e-12)


def test_one_step_estimate_matches_generator():
    spec = build_preset("oconnell_yor", K=2, mu=2.0)
    nu = solve_nu(spec)
    f = quadratic_function(0, 0, 2)
    out = one_step_generator_estimate(
        spec, nu, f, np.array([0.3, 0.4]), h=1e-4, n_paths=200_000, seed=6
    )
    # first-order step: bias is O(h) on top of Monte Carlo noise
    assert abs(out["estimate"] - out["exact"]) < 4.0 * out["se"] + 0.01


def test_theta_drives_quadratic_generator():
    # for f = v_i v_j with zero drift contribution the generator is theta_ij
    spec = build_preset("free", K=3)
    nu = solve_nu(spec)
    th = theta(spec, 3)
    v0 = np.zeros(3)
    for i in range(3):
        for j in range(3):
            f = quadratic_function(i, j, 3)
            assert generator_apply(spec, nu, f, v0) == pytest.approx(
                th[i, j] if i != j else th[i, i], abs=1e-12
            )


# ---------------------------------------------------------------------------
# statistical tests end to end (small ensembles)


def test_quasi_stationarity_accepts_preset():
    spec = build_preset("oconnell_yor", K=2, mu=2.0)
    nu = solve_nu(spec)
    cfg = SimConfig(dt=1e-3, horizon=0.3, n_paths=4000, record_times=(0.0, 0.3), seed=14)
    ens = simulate(spec, nu, cfg)
    report = analysis.test_quasi_stationarity(ens, spec, nu)
    assert report.passed, [c.name for c in report.failures()]
    names = [c.name for c in report.checks]
    assert any("x1_pinned" in n for n in names)
    assert any("ks" in n for n in names)


def test_quasi_stationarity_rejects_shifted_ensemble():
    spec = build_preset("oconnell_yor", K=2, mu=2.0)
    nu = solve_nu(spec)
    cfg = SimConfig(dt=1e-3, horizon=0.3, n_paths=4000, record_times=(0.3,), seed=14)
    ens = simulate(spec, nu, cfg)
    ens.positions = ens.positions + 0.5  # break the predicted mean
    report = analysis.test_quasi_stationarity(ens, spec, nu)
    assert not report.passed


def test_consistency_accepts_projection():
    spec = build_preset("oconnell_yor", K=3, mu=2.0)
    nu = solve_nu(spec)
    cfg = SimConfig(dt=2e-3, horizon=0.2, n_paths=4000, record_times=(0.1, 0.2), seed=17)
    report = analysis.test_consistency(spec, nu, 2, cfg)
    assert report.passed, [c.name for c in report.failures()]
    swapped = analysis.test_consistency(spec, nu, 2, cfg, swap_seeds=True)
    assert swapped.passed


def test_consistency_negative_control_fails():
    spec = spec_from_doc(_variant_doc(3))
    nu = solve_nu(spec)
    assert nu.nu(1) == pytest.approx(1.0)
    cfg = SimConfig(dt=2e-3, horizon=0.5, n_paths=4000, record_times=(0.5,), seed=17)
    report = analysis.test_consistency(spec, nu, 1, cfg, negative_control=True)
    assert not report.passed
    assert any(c.name.startswith("x1_ks2") for c in report.failures())


def test_consistency_rejects_bad_projection_size():
    spec = build_preset("oconnell_yor", K=3, mu=2.0)
    nu = solve_nu(spec)
    cfg = SimConfig(dt=1e-2, horizon=0.1, n_paths=10)
    with pytest.raises(ValueError):
        analysis.test_consistency(spec, nu, 3, cfg)


def test_martingale_residual_free_coordinate():
    spec = build_preset("free", K=2)
    nu = solve_nu(spec)
    times = tuple(np.linspace(0.0, 0.5, 26))
    cfg = SimConfig(dt=1e-3, horizon=0.5, n_paths=4000, record_times=times, seed=23)
    from qsbrown.sde import DeterministicInit

    ens = simulate(spec, nu, cfg, init=DeterministicInit((0.0, -1.0)))
    f = coordinate_function(0, 2)
    report = analysis.test_martingale(spec, nu, f, ens)
    assert report.passed
    # the compensated coordinate is exactly a Brownian motion here
    assert abs(report.checks[0].observed) < 4.0 * np.sqrt(0.5 * 0.5 / 4000)


def test_martingale_with_halved_allowance():
    spec = build_preset("oconnell_yor", K=2, mu=2.0)
    nu = solve_nu(spec)
    times = tuple(np.linspace(0.0, 0.3, 31))
    cfg = SimConfig(dt=2e-3, horizon=0.3, n_paths=3000, record_times=times, seed=29)
    half = SimConfig(dt=1e-3, horizon=0.3, n_paths=3000, record_times=times, seed=30)
    ens = simulate(spec, nu, cfg)
    ens_half = simulate(spec, nu, half)
    f = quadratic_function(0, 0, 2)
    report = analysis.test_martingale(spec, nu, f, ens, ens_half)
    assert report.passed, report.to_dict()
    assert report.meta["allowance"] >= 0.0


# ---------------------------------------------------------------------------
# report plumbing


def test_report_json_round_trip():
    checks = [StatCheck("m", 0.1, 0.0, 0.2, True)]
    report = Report("demo", checks, {"n": 3})
    back = json.loads(report.to_json())
    assert back == report.to_dict()
    assert report.passed and report.failures() == []


def test_report_collects_failures():
    checks = [
        StatCheck("a", 1.0, 0.0, 0.1, False),
        StatCheck("b", 0.0, 0.0, 0.1, True),
    ]
    report = Report("demo", checks)
    assert not report.passed
    assert [c.name for c in report.failures()] == ["a"]
