import numpy as np
import pytest

from flexsat.norms import (
    InfiniteNormError,
    UnstableSystemError,
    dc_gain,
    frequency_response,
    h2_norm,
    h2_norm_observability,
    hinf_norm,
    hinf_norm_grid,
)
from flexsat.statespace import StateSpace, siso_tf, static_gain


def rand_stable(n, m, p, seed, feedthrough=False):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A = A - (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
    D = 0.1 * rng.standard_normal((p, m)) if feedthrough else np.zeros((p, m))
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                      D, [("u", m)], [("y", p)])


# -- H-infinity --------------------------------------------------------------

def test_hinf_first_order_lag_is_one():
    g = siso_tf([1.0], [1.0, 1.0])
    assert hinf_norm(g, rel_tol=1e-8) == pytest.approx(1.0, rel=1e-6)


def test_hinf_resonance_closed_form():
    # w^2/(s^2 + 2 z w s + w^2), z=0.1, w=2: peak = 1/(2 z sqrt(1-z^2))
    z, w = 0.1, 2.0
    g = siso_tf([w * w], [1.0, 2 * z * w, w * w])
    expected = 1.0 / (2 * z * np.sqrt(1 - z * z))
    assert expected == pytest.approx(5.0252, abs=5e-5)
    assert hinf_norm(g, rel_tol=1e-8) == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_hinf_matches_dense_grid_oracle(seed):
    g = rand_stable(4, 1, 1, seed, feedthrough=True)
    nrm = hinf_norm(g, rel_tol=1e-6)
    w = np.logspace(-4, 4, 1_000_000)
    _, smax = frequency_response(g, w)
    grid_max = max(float(np.max(smax)),
                   float(np.abs(dc_gain(g))[0, 0]))
    assert nrm == pytest.approx(grid_max, rel=1e-5)
    assert grid_max <= (1 + 1e-6) * nrm


def test_hinf_unstable_raises():
    g = siso_tf([1.0], [1.0, -2.0])
    with pytest.raises(UnstableSystemError, match="unbounded"):
        hinf_norm(g)


def test_hinf_rejects_bad_tolerance():
    g = siso_tf([1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        hinf_norm(g, rel_tol=0.0)


def test_hinf_static_block():
    g = static_gain([[1.0, 2.0], [0.0, 1.0]], [("u", 2)], [("y", 2)])
    assert hinf_norm(g) == pytest.approx(np.linalg.svd(g.D, compute_uv=False)[0])


@pytest.mark.parametrize("seed", [5, 6])
def test_hinf_scaling_invariant(seed):
    g = rand_stable(4, 2, 2, seed)
    alpha = -2.5
    ga = StateSpace(g.A, g.B, alpha * g.C, alpha * g.D, g.input_ports, g.output_ports)
    assert hinf_norm(ga, 1e-8) == pytest.approx(abs(alpha) * hinf_norm(g, 1e-8), rel=1e-6)


@pytest.mark.parametrize("seed", [7, 8, 9])
def test_hinf_submultiplicative_on_series(seed):
    from flexsat.statespace import series
    g1 = rand_stable(3, 1, 1, seed)
    g2 = rand_stable(3, 1, 1, seed + 100)
    g12 = series(g1, g2)
    n12 = hinf_norm(g12, 1e-8)
    assert n12 <= hinf_norm(g1, 1e-8) * hinf_norm(g2, 1e-8) * (1 + 1e-6)


def test_hinf_grid_estimate_close_to_exact():
    g = rand_stable(6, 2, 2, 42)
    fast = hinf_norm_grid(g)
    exact = hinf_norm(g, 1e-8)
    assert fast <= exact * (1 + 1e-6)
    assert fast >= exact * 0.999


# -- H2 ----------------------------------------------------------------------

def test_h2_first_order_lag_analytic():
    g = siso_tf([1.0], [1.0, 1.0])
    assert h2_norm(g) == pytest.approx(np.sqrt(0.5), rel=1e-10)
    assert h2_norm(g) == pytest.approx(0.70711, abs=5e-6)


def test_h2_pole_at_a_analytic():
    a = 4.0
    g = siso_tf([1.0], [1.0, a])
    assert h2_norm(g) == pytest.approx(1.0 / np.sqrt(2 * a), rel=1e-10)
    assert h2_norm(g) == pytest.approx(0.35355, abs=5e-6)


@pytest.mark.parametrize("seed", [10, 11, 12])
def test_h2_gramian_duality(seed):
    g = rand_stable(5, 2, 3, seed)
    assert h2_norm(g) == pytest.approx(h2_norm_observability(g), rel=1e-10)


def test_h2_feedthrough_raises():
    g = static_gain([[1.0]], [("u", 1)], [("y", 1)])
    with pytest.raises(InfiniteNormError, match="infinite H2 norm"):
        h2_norm(g)


def test_h2_unstable_raises():
    g = siso_tf([1.0], [1.0, -1.0])
    with pytest.raises(UnstableSystemError):
        h2_norm(g)


@pytest.mark.parametrize("seed", [13, 14])
def test_h2_scaling_invariant(seed):
    g = rand_stable(4, 1, 2, seed)
    ga = StateSpace(g.A, 3.0 * g.B, g.C, g.D, g.input_ports, g.output_ports)
    assert h2_norm(ga) == pytest.approx(3.0 * h2_norm(g), rel=1e-9)


# -- DC gain and frequency response -------------------------------------------

def test_dc_gain_simple():
    g = siso_tf([3.0], [1.0, 1.0])
    assert dc_gain(g)[0, 0] == pytest.approx(3.0)


def test_dc_gain_double_integrator_needs_omega0():
    g = siso_tf([1.0], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="low frequency"):
        dc_gain(g)
    assert dc_gain(g, omega0=1e-4)[0, 0] == pytest.approx(1e8, rel=1e-9)


def test_dc_gain_point_mass_force_to_acceleration():
    m = 25.0
    g = static_gain([[1.0 / m]], [("f", 1)], [("a", 1)])
    assert dc_gain(g, omega0=1e-4)[0, 0] == pytest.approx(1.0 / m, rel=1e-12)


def test_frequency_response_lag_magnitude():
    g = siso_tf([1.0], [1.0, 1.0])
    resp, smax = frequency_response(g, [1.0])
    assert abs(resp[0, 0, 0]) == pytest.approx(1 / np.sqrt(2), rel=1e-12)
    assert smax[0] == pytest.approx(1 / np.sqrt(2), rel=1e-12)


def test_frequency_response_static_block_constant():
    D = np.array([[1.0, 0.5], [0.0, 2.0]])
    g = static_gain(D, [("u", 2)], [("y", 2)])
    w = np.logspace(-2, 2, 7)
    resp, smax = frequency_response(g, w)
    assert np.allclose(resp, D)
    assert np.allclose(smax, np.linalg.svd(D, compute_uv=False)[0])


def test_frequency_response_diagonal_lags_sigma_is_max_channel():
    from flexsat.statespace import interconnect
    g1 = siso_tf([1.0], [1.0, 1.0])   # lag at 1
    g2 = siso_tf([1.0], [0.1, 1.0])   # lag at 10
    blk = interconnect(
        {"a": g1, "b": g2}, links=[],
        ext_in=[("u1", "a.u"), ("u2", "b.u")],
        ext_out=[("y1", "a.y"), ("y2", "b.y")],
    )
    w = np.logspace(-2, 2, 40)
    resp, smax = frequency_response(blk, w)
    per_channel = np.maximum(np.abs(resp[:, 0, 0]), np.abs(resp[:, 1, 1]))
    assert np.allclose(smax, per_channel, rtol=1e-12)


def test_frequency_response_rejects_bad_grid():
    g = siso_tf([1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        frequency_response(g, [0.0, 1.0])
    with pytest.raises(ValueError):
        frequency_response(g, [2.0, 1.0])
