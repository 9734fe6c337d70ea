import json

import numpy as np
import pytest

from flexsat.acs import Requirements, initial_gains
from flexsat.benchmark import (
    DesignVector,
    build_plant,
    default_config,
    rigid_inertia,
    uncertainty_specs,
)
from flexsat.norms import frequency_response, hinf_norm
from flexsat.params import ParameterSpec
from flexsat.statespace import siso_tf
from flexsat.wcvalidate import (
    WorstCaseOptions,
    benchmark_channel_gain,
    sigma_sweep,
    validation_report,
    worst_case_gain,
)

CFG = default_config()
CHI = DesignVector.nominal()
REQ = Requirements()


def test_monotone_static_gain_pins_at_vertex():
    spec = [ParameterSpec("a", 0.0, -0.25, 0.25)]
    gain = lambda d, theta: 1.0 + d.get("a", 0.0)
    res = worst_case_gain(gain, spec, "test", n_theta=3,
                          options=WorstCaseOptions(budget=40))
    assert res.worst_gain == pytest.approx(1.25, abs=1e-12)
    assert res.worst_delta["a"] == pytest.approx(0.25)
    assert res.worst_gain >= res.nominal_gain


def resonance_gain_factory():
    """One delta scaling a resonance near a weighting peak: interior optimum."""
    w_filter = siso_tf([1.0, 0.2, 0.0], [1.0, 0.4, 4.0])  # peaked near 2 rad/s

    def gain(delta, theta):
        d = delta.get("a", 0.0)
        w0 = 2.6 * (1.0 + d)
        g = siso_tf([w0 * w0], [1.0, 2 * 0.05 * w0, w0 * w0])
        from flexsat.statespace import series
        return hinf_norm(series(g, w_filter), rel_tol=1e-8)

    return gain


def test_resonance_worst_case_matches_brute_force_grid():
    spec = [ParameterSpec("a", 0.0, -0.25, 0.25)]
    gain = resonance_gain_factory()
    res = worst_case_gain(gain, spec, "test", n_theta=2,
                          options=WorstCaseOptions(budget=120, step_min=1e-3))
    grid = np.linspace(-0.25, 0.25, 10_000)
    brute = max(gain({"a": float(a)}, 0.0) for a in grid)
    assert res.worst_gain >= brute * 0.99
    assert abs(res.worst_gain - brute) / brute < 0.01


def test_worst_case_reproducible_and_bounds_random_samples():
    spec = [ParameterSpec("a", 0.0, -0.25, 0.25),
            ParameterSpec("b", 0.0, -0.15, 0.15)]
    gain = lambda d, theta: (1.0 + d.get("a", 0.0)) ** 2 + \
        np.sin(3 * d.get("b", 0.0)) + 0.1 * np.cos(theta)
    res = worst_case_gain(gain, spec, "toy", n_theta=5,
                          options=WorstCaseOptions(budget=80))
    # re-evaluating the channel at the worst assignment reproduces the max
    assert gain(res.worst_delta, res.worst_theta) == pytest.approx(
        res.worst_gain, rel=1e-12)
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = {"a": rng.uniform(-0.25, 0.25), "b": rng.uniform(-0.15, 0.15)}
        assert gain(d, res.worst_theta) <= res.worst_gain + 1e-12
    # every parameter named in the reported assignment
    assert set(res.worst_delta) == {"a", "b"}


def test_worst_case_worker_independence():
    spec = [ParameterSpec("a", 0.0, -1.0, 1.0)]
    gain = lambda d, theta: np.cos(theta) + d.get("a", 0.0) ** 2
    r1 = worst_case_gain(gain, spec, "t", n_theta=7,
                         options=WorstCaseOptions(budget=30, workers=1))
    r2 = worst_case_gain(gain, spec, "t", n_theta=7,
                         options=WorstCaseOptions(budget=30, workers=3))
    assert r1.worst_gain == r2.worst_gain
    assert r1.per_theta == r2.per_theta


def test_benchmark_channel_gain_evaluates():
    p = build_plant(CFG, CHI)
    g0 = initial_gains(np.diag(rigid_inertia(p)), REQ)
    fn = benchmark_channel_gain(CFG, CHI, REQ, g0, "Sensitivity")
    v_nom = fn({}, 0.0)
    assert 0.3 < v_nom < 1.5
    with pytest.raises(ValueError, match="channel"):
        benchmark_channel_gain(CFG, CHI, REQ, g0, "bogus")


# -- sweeps ---------------------------------------------------------------------

def test_sweep_degenerate_single_point_matches_direct_response():
    w = np.geomspace(0.1, 100.0, 50)
    res = sigma_sweep(CFG, CHI, "r_srs", [CHI.r_srs], omega_grid=w)
    p = build_plant(CFG, CHI)
    _, smax = frequency_response(p.ss.subsystem(["w_ext"], ["acc_b"]), w)
    assert np.allclose(res.sigma_curves[0], smax, rtol=1e-12)


def test_sweep_srs_first_mode_decreases_with_radius():
    grid = np.linspace(2.0e-2, 1.25e-2, 5)   # downward sweep
    res = sigma_sweep(CFG, CHI, "r_srs", grid,
                      omega_grid=np.geomspace(1, 50, 30))
    firsts = []
    for poles in res.pole_freqs:
        arr = np.asarray(poles)
        firsts.append(arr[(arr > 8) & (arr < 25)][0])
    assert np.all(np.diff(firsts) < 0)


def test_sweep_theta_continuity():
    grid = np.linspace(0.0, np.pi, 50)
    res = sigma_sweep(CFG, CHI, "theta_sa", grid,
                      omega_grid=np.geomspace(1, 10, 5))
    prev = None
    for poles in res.pole_freqs:
        arr = np.asarray(poles)[:10]
        if prev is not None:
            assert np.max(np.abs(arr - prev) / prev) < 0.05
        prev = arr


def test_sweep_rejects_out_of_range_grid():
    with pytest.raises(ValueError, match="range"):
        sigma_sweep(CFG, CHI, "r_srs", [0.5])
    with pytest.raises(ValueError, match="parameter"):
        sigma_sweep(CFG, CHI, "bogus", [0.1])


# -- report ----------------------------------------------------------------------

def test_report_empty_results(tmp_path):
    paths = validation_report([], tmp_path)
    summary = json.loads((tmp_path / "validation_summary.json").read_text())
    assert summary["channels"] == []
    assert summary["all_pass"] is True
    assert "summary" in paths


def test_report_round_trip_bit_exact(tmp_path):
    spec = [s for s in uncertainty_specs(include_sigma4=False)]
    gain = lambda d, theta: 0.5 + 0.3 * d.get("hub_ixx", 0.0) + 0.01 * theta
    res = worst_case_gain(gain, spec, "APE", n_theta=4,
                          options=WorstCaseOptions(budget=30))
    paths = validation_report([res], tmp_path)
    summary = json.loads((tmp_path / "validation_summary.json").read_text())
    ch = summary["channels"][0]
    assert ch["worst_gain"] == res.worst_gain
    assert ch["worst_theta"] == res.worst_theta
    assert ch["per_theta"] == [[t, g] for t, g in res.per_theta]
    # the reported assignment names every non-rotation uncertainty parameter
    assert set(ch["worst_delta"]) == {s.name for s in spec}
    # CSV exists and parses back to the same floats
    lines = (tmp_path / "worst_case_ape.csv").read_text().strip().splitlines()
    assert lines[0] == "theta_sa,worst_gain"
    t0, g0 = lines[1].split(",")
    assert float(t0) == res.per_theta[0][0]
    assert float(g0) == res.per_theta[0][1]


def test_channel_gain_symmetric_in_rotation_sign():
    p = build_plant(CFG, CHI)
    g0 = initial_gains(np.diag(rigid_inertia(p)), REQ)
    fn = benchmark_channel_gain(CFG, CHI, REQ, g0, "Sensitivity")
    a = fn({}, 0.9)
    b = fn({}, -0.9)
    assert abs(a - b) / a < 1e-8


def test_report_flags_ape_and_sensitivity_as_binding(tmp_path):
    p = build_plant(CFG, CHI)
    g0 = initial_gains(np.diag(rigid_inertia(p)), REQ)
    results = []
    for channel in ("APE", "RPE", "Command", "Sensitivity"):
        fn = benchmark_channel_gain(CFG, CHI, REQ, g0, channel)
        results.append(worst_case_gain(
            fn, uncertainty_specs(), channel, n_theta=2,
            options=WorstCaseOptions(budget=6)))
    validation_report(results, tmp_path)
    summary = json.loads((tmp_path / "validation_summary.json").read_text())
    assert set(summary["binding_constraints"][:2]) == {"APE", "Sensitivity"}
