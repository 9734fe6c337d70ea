import numpy as np
import pytest

from flexsat.params import (
    ParameterSpec,
    eval_surrogate,
    fit_surrogate,
    nominal_assignment,
    sadm_dcm,
    sample_assignments,
    sigma4_grid,
    sigma4_to_angle,
    surrogate_from_json,
    surrogate_to_json,
    validate_assignment,
)


def specs2():
    return [ParameterSpec("a", 0.0, -1.0, 1.0),
            ParameterSpec("b", 5.0, 4.0, 6.0, kind="design")]


def test_spec_validation():
    with pytest.raises(ValueError):
        ParameterSpec("x", 0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        ParameterSpec("x", 3.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        ParameterSpec("x", 0.5, 0.0, 1.0, kind="other")


def test_assignment_validation_rejects_out_of_range_both_kinds():
    sp = specs2()
    validate_assignment(sp, {"a": 0.5, "b": 4.5})
    with pytest.raises(ValueError):
        validate_assignment(sp, {"a": 2.0})
    with pytest.raises(ValueError):
        validate_assignment(sp, {"b": 7.0})
    with pytest.raises(KeyError):
        validate_assignment(sp, {"c": 0.0})


def test_vertices_scheme_two_params():
    out = sample_assignments(specs2(), "vertices")
    assert len(out) == 4
    assert {(a["a"], a["b"]) for a in out} == {(-1, 4), (-1, 6), (1, 4), (1, 6)}


def test_vertices_guard():
    sp = [ParameterSpec(f"p{i}", 0.0, -1.0, 1.0) for i in range(13)]
    with pytest.raises(ValueError, match="vertices"):
        sample_assignments(sp, "vertices")


def test_grid_scheme_linear_span():
    sp = [ParameterSpec("r", 1.5, 1.0, 2.0)]
    out = sample_assignments(sp, "grid", grid_counts={"r": 10})
    vals = [a["r"] for a in out]
    assert len(vals) == 10
    assert np.allclose(vals, np.linspace(1.0, 2.0, 10))


def test_random_scheme_is_deterministic():
    sp = specs2()
    a = sample_assignments(sp, "random", count=7, seed=123)
    b = sample_assignments(sp, "random", count=7, seed=123)
    assert a == b
    c = sample_assignments(sp, "random", count=7, seed=124)
    assert a != c


def test_sadm_identities():
    assert np.allclose(sadm_dcm(sigma4_to_angle(0.0)), np.eye(3))
    # sigma4 = 1 -> theta = pi
    assert sigma4_to_angle(1.0) == pytest.approx(np.pi)
    # sigma4 = tan(pi/8) -> theta = pi/2; x-axis rotation maps y -> z
    th = sigma4_to_angle(np.tan(np.pi / 8))
    assert th == pytest.approx(np.pi / 2)
    R = sadm_dcm(th, axis="x")
    assert np.allclose(R @ np.array([0, 1.0, 0]), [0, 0, 1.0], atol=1e-12)


def test_sadm_inverse_identity():
    th = 0.83
    assert np.allclose(sadm_dcm(th) @ sadm_dcm(-th), np.eye(3), atol=1e-12)


def test_sigma4_grid_matches_protocol():
    g = sigma4_grid(50)
    assert len(g) == 50
    assert g[0] == pytest.approx(0.0)
    assert g[-1] == pytest.approx(np.pi)
    sig = np.tan(g / 4)
    assert np.allclose(sig, np.linspace(0, 1, 50), atol=1e-12)
    with pytest.raises(ValueError):
        sigma4_grid(1)


# -- surrogate ----------------------------------------------------------------

def quad_fn(a, b):
    return np.array([[1.0 + 2 * a + 3 * b + 0.5 * a * b + a * a,
                      b * b - a],
                     [0.1 * a * b, 2.0]])


def test_surrogate_exact_quadratic_zero_residual():
    sp = specs2()
    samples = [({"a": a, "b": b}, {"m": quad_fn(a, b)})
               for a in np.linspace(-1, 1, 4) for b in np.linspace(4, 6, 4)]
    s = fit_surrogate(sp, samples, degree=2)
    assert s.diagnostics["in_sample_max_rel_err"]["m"] <= 1e-12
    got = eval_surrogate(s, {"a": 0.37, "b": 5.21})["m"]
    assert np.allclose(got, quad_fn(0.37, 5.21), rtol=1e-10)


def test_surrogate_constant_matrix_any_degree():
    sp = [ParameterSpec("a", 0.0, -1.0, 1.0)]
    const = np.array([[3.0, -1.0]])
    samples = [({"a": a}, {"m": const}) for a in np.linspace(-1, 1, 8)]
    s = fit_surrogate(sp, samples, degree=3)
    got = eval_surrogate(s, {"a": 0.123})["m"]
    assert np.allclose(got, const, atol=1e-12)


def test_surrogate_beam_frequency_heldout_accuracy():
    # first tube-beam bending frequency vs outer radius: held-out error <= 1e-2
    from flexsat.substructure import cantilever_beam_modal

    def first_freq(r):
        t = 5e-4
        ei = 1.2e11 * np.pi * r ** 3 * t
        rho_a = 1600.0 * 2 * np.pi * r * t
        return {"freq": cantilever_beam_modal(5.0, ei, rho_a, n_modes=2).freq_rad_s[:1]}

    sp = [ParameterSpec("r", 1.6e-2, 1.25e-2, 2.0e-2, kind="design")]
    train = [({"r": r}, first_freq(r)) for r in np.linspace(1.25e-2, 2.0e-2, 10)]
    held = [({"r": r}, first_freq(r)) for r in np.linspace(1.3e-2, 1.95e-2, 7)]
    s = fit_surrogate(sp, train, degree=3, holdout=held)
    assert s.diagnostics["held_out_max_rel_err"]["freq"] <= 1e-2


def test_surrogate_training_points_reproduced_within_reported_error():
    sp = specs2()
    rng = np.random.default_rng(5)
    samples = [({"a": a, "b": b},
                {"m": quad_fn(a, b) + 1e-3 * rng.standard_normal((2, 2))})
               for a in np.linspace(-1, 1, 5) for b in np.linspace(4, 6, 5)]
    s = fit_surrogate(sp, samples, degree=2)
    err = s.diagnostics["in_sample_max_rel_err"]["m"]
    for a, m in samples:
        got = eval_surrogate(s, a)["m"]
        denom = np.maximum(np.abs(m["m"]), 1e-9 * np.max(np.abs(m["m"])))
        assert np.max(np.abs(got - m["m"]) / denom) <= err * (1 + 1e-9)


def test_surrogate_rank_deficiency_raises():
    sp = specs2()
    samples = [({"a": 0.0, "b": 5.0}, {"m": np.eye(2)})] * 12
    with pytest.raises(ValueError, match="rank-deficient|at least"):
        fit_surrogate(sp, samples, degree=2)


def test_surrogate_rejects_extrapolation():
    sp = specs2()
    samples = [({"a": a, "b": b}, {"m": quad_fn(a, b)})
               for a in np.linspace(-1, 1, 4) for b in np.linspace(4, 6, 4)]
    s = fit_surrogate(sp, samples, degree=2)
    with pytest.raises(ValueError, match="outside"):
        eval_surrogate(s, {"a": 1.5, "b": 5.0})


def test_surrogate_warns_on_mode_crossing():
    sp = [ParameterSpec("a", 0.0, -1.0, 1.0)]
    # two "frequencies" that cross inside the box
    fn = lambda a: {"freq": np.array([2.0 + a, 2.0 - a])}
    samples = [({"a": a}, fn(a)) for a in np.linspace(-1, 1, 6)]
    s = fit_surrogate(sp, samples, degree=1)
    with pytest.warns(UserWarning, match="crossing"):
        out = eval_surrogate(s, {"a": 0.5})
    assert np.all(np.diff(out["freq"]) >= 0)


def test_surrogate_json_round_trip():
    sp = specs2()
    samples = [({"a": a, "b": b}, {"m": quad_fn(a, b)})
               for a in np.linspace(-1, 1, 4) for b in np.linspace(4, 6, 4)]
    s = fit_surrogate(sp, samples, degree=2)
    s2 = surrogate_from_json(surrogate_to_json(s))
    p = {"a": -0.4, "b": 5.7}
    assert np.allclose(eval_surrogate(s, p)["m"], eval_surrogate(s2, p)["m"],
                       rtol=0, atol=0)


def test_nominal_assignment():
    assert nominal_assignment(specs2()) == {"a": 0.0, "b": 5.0}
