import numpy as np
import pytest

from flexsat.norms import frequency_response, hinf_norm
from flexsat.statespace import (
    AlgebraicLoopError,
    PortError,
    StateSpace,
    diagonal_repeat,
    export_frequency_response_csv,
    interconnect,
    reduce_minimal,
    series,
    siso_tf,
    stable,
    static_gain,
)


def rand_stable(n, m, p, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A = A - (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                      np.zeros((p, m)), [("u", m)], [("y", p)])


def test_dimension_and_port_validation():
    with pytest.raises(ValueError):
        StateSpace(np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((1, 2)),
                   np.zeros((1, 1)), [("u", 1)], [("y", 1)])
    with pytest.raises(PortError):
        StateSpace(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((1, 2)),
                   np.zeros((1, 2)), [("u", 1)], [("y", 1)])
    with pytest.raises(PortError):
        static_gain(np.eye(2), [("u", 2)], [("y", 1), ("y", 1)])


def test_immutability():
    g = static_gain([[2.0]], [("u", 1)], [("y", 1)])
    with pytest.raises(AttributeError):
        g.D = np.array([[3.0]])
    with pytest.raises(ValueError):
        g.D[0, 0] = 3.0


def test_series_of_static_gains_is_product():
    g1 = static_gain([[2.0]], [("u", 1)], [("y", 1)])
    g2 = static_gain([[3.0]], [("u", 1)], [("y", 1)])
    g = series(g1, g2)
    assert g.n_states == 0
    assert g.D[0, 0] == pytest.approx(6.0)


def test_unit_negative_feedback_around_integrator():
    integ = siso_tf([1.0], [1.0, 0.0])
    closed = interconnect(
        {"g": integ, "k": static_gain([[-1.0]], [("e", 1)], [("u", 1)])},
        links=[("g.y", "k.e"), ("k.u", "g.u")],
        ext_in=[("r", "g.u")],
        ext_out=[("y", "g.y")],
    )
    # 1/(s+1): pole at -1, DC gain 1
    assert np.linalg.eigvals(closed.A) == pytest.approx([-1.0])
    assert (closed.D - closed.C @ np.linalg.solve(closed.A, closed.B))[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_static_feedback_equals_A_plus_BkC(seed):
    # feedback of static k around strictly proper G equals A + B k C,
    # checked against the frequency response on 20 log-spaced points
    g = rand_stable(4, 1, 1, seed)
    k = 0.3
    closed = interconnect(
        {"g": g, "k": static_gain([[k]], [("e", 1)], [("u", 1)])},
        links=[("g.y", "k.e"), ("k.u", "g.u")],
        ext_in=[("w", "g.u")],
        ext_out=[("y", "g.y")],
    )
    A_expected = g.A + k * (g.B @ g.C)
    direct = StateSpace(A_expected, g.B, g.C, g.D, [("w", 1)], [("y", 1)])
    w = np.logspace(-2, 2, 20)
    r1, _ = frequency_response(closed, w)
    r2, _ = frequency_response(direct, w)
    assert np.allclose(r1, r2, rtol=1e-10, atol=1e-12)


def test_link_width_mismatch_raises():
    g1 = static_gain(np.eye(2), [("u", 2)], [("y", 2)])
    g2 = static_gain([[1.0]], [("u", 1)], [("y", 1)])
    with pytest.raises(PortError):
        interconnect({"a": g1, "b": g2}, links=[("a.y", "b.u")],
                     ext_in=[("w", "a.u")], ext_out=[("z", "b.y")])


def test_ill_posed_loop_raises_algebraic_loop_error():
    g = static_gain([[1.0]], [("u", 1)], [("y", 1)])
    with pytest.raises(AlgebraicLoopError, match="algebraic loop"):
        interconnect(
            {"g": g, "k": static_gain([[1.0]], [("e", 1)], [("u", 1)])},
            links=[("g.y", "k.e"), ("k.u", "g.u")],
            ext_in=[("w", "g.u")],
            ext_out=[("z", "g.y")],
        )


def test_fan_in_sums_external_and_link_contributions():
    g = static_gain([[1.0]], [("u", 1)], [("y", 1)])
    src = static_gain([[2.0]], [("u", 1)], [("y", 1)])
    net = interconnect(
        {"g": g, "s": src},
        links=[("s.y", "g.u")],
        ext_in=[("w", [("g.u", None), ("s.u", None)])],
        ext_out=[("z", "g.y")],
    )
    # z = w + 2w
    assert net.D[0, 0] == pytest.approx(3.0)


def test_interconnect_state_dimension_is_sum_of_blocks():
    g1 = rand_stable(3, 1, 1, 5)
    g2 = rand_stable(2, 1, 1, 6)
    net = interconnect({"a": g1, "b": g2}, links=[("a.y", "b.u")],
                       ext_in=[("w", "a.u")], ext_out=[("z", "b.y")])
    assert net.n_states == 5


@pytest.mark.parametrize("seed", [3, 4])
def test_series_association_invariance(seed):
    gs = [rand_stable(2, 1, 1, seed + 10 * k) for k in range(3)]
    left = series(series(gs[0], gs[1]), gs[2])
    right = series(gs[0], series(gs[1], gs[2]))
    w = np.logspace(-2, 2, 30)
    r1, _ = frequency_response(left, w)
    r2, _ = frequency_response(right, w)
    assert np.allclose(r1, r2, rtol=1e-10, atol=1e-12)


def test_stable_detects_unstable_pole():
    g = siso_tf([1.0], [1.0, -1.0])
    assert not stable(g)
    assert stable(siso_tf([1.0], [1.0, 1.0]))


def test_reduce_minimal_cancels_pole_zero():
    # (s+2)/((s+2)(s+1)) -> one state
    g = siso_tf([1.0, 2.0], np.convolve([1.0, 2.0], [1.0, 1.0]))
    r = reduce_minimal(g, tol=1e-8)
    assert r.n_states == 1
    w = np.logspace(-2, 2, 50)
    _, s1 = frequency_response(g, w)
    _, s2 = frequency_response(r, w)
    assert np.allclose(s1, s2, rtol=1e-6, atol=1e-9)


def test_reduce_minimal_idempotent_on_minimal_system():
    g = rand_stable(3, 1, 1, 9)
    r = reduce_minimal(g, tol=1e-9)
    assert r.n_states == 3


def test_reduce_minimal_warns_and_passes_through_unstable():
    g = siso_tf([1.0], [1.0, -1.0])
    with pytest.warns(UserWarning):
        r = reduce_minimal(g)
    assert r is g


def test_reduce_minimal_preserves_dc_exactly():
    g = series(rand_stable(3, 1, 1, 11), siso_tf([1e-9, 1.0], [1.0, 1.0]))
    r = reduce_minimal(g, tol=1e-6)
    dc_g = g.D - g.C @ np.linalg.solve(g.A, g.B)
    dc_r = r.D - r.C @ np.linalg.solve(r.A, r.B) if r.n_states else r.D
    assert dc_r[0, 0] == pytest.approx(dc_g[0, 0], rel=1e-12)


def test_diagonal_repeat_matches_scalar_channels():
    g = siso_tf([1.0], [1.0, 2.0, 1.0])
    g3 = diagonal_repeat(g, 3)
    assert g3.n_inputs == 3 and g3.n_outputs == 3 and g3.n_states == 6
    w = np.logspace(-1, 1, 10)
    r1, _ = frequency_response(g, w)
    r3, _ = frequency_response(g3, w)
    for i in range(3):
        assert np.allclose(r3[:, i, i], r1[:, 0, 0], rtol=1e-12)
    off = r3.copy()
    for i in range(3):
        off[:, i, i] = 0.0
    assert np.max(np.abs(off)) < 1e-14


def test_subsystem_extraction():
    g = static_gain(np.arange(6.0).reshape(2, 3),
                    [("a", 1), ("b", 2)], [("x", 1), ("y", 1)])
    sub = g.subsystem(["b"], ["y"])
    assert np.allclose(sub.D, [[4.0, 5.0]])


def test_frequency_response_export_csv(tmp_path):
    g = siso_tf([3.0], [1.0, 1.0])
    w = np.logspace(-1, 1, 5)
    path = tmp_path / "fr.csv"
    text = export_frequency_response_csv(g, w, path)
    lines = text.strip().splitlines()
    assert lines[0].split(",")[:2] == ["omega", "sigma_max"]
    assert len(lines) == 6
    assert path.exists()
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(w[0])
    assert float(first[1]) == pytest.approx(3.0 / np.hypot(1.0, w[0]), rel=1e-9)


def test_hinf_lower_bound_property_on_grid():
    g = rand_stable(5, 2, 2, 21)
    nrm = hinf_norm(g, rel_tol=1e-6)
    w = np.logspace(-3, 3, 400)
    _, smax = frequency_response(g, w)
    assert np.all(smax <= (1 + 1e-6) * nrm)
