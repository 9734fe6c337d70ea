import numpy as np
import pytest

from flexsat.acs import (
    ControllerGains,
    Requirements,
    avionics,
    close_loop,
    controller,
    generalized_plant,
    initial_gains,
    margin_bounds,
    required_bandwidth,
    rigid_plant,
    static_ape_index,
    weights,
)
from flexsat.norms import dc_gain, frequency_response, h2_norm, hinf_norm
from flexsat.statespace import stable

REQ = Requirements()
J_TABLE = np.array([2415.33, 1695.25, 2929.28])
FINAL_GAINS = ControllerGains((35.0764, 13.9779, 35.008),
                              (335.2577, 280.8861, 404.4305))


def build_gp(ideal=False, req=REQ, plant=None):
    plant = rigid_plant(1173.0, np.diag(J_TABLE)) if plant is None else plant
    av = None if ideal else avionics()
    return generalized_plant(plant, av, weights(req), req)


# -- avionics -----------------------------------------------------------------

def test_rw_unit_dc_and_no_resonance():
    av = avionics()
    rw = av["RW"]
    assert np.allclose(dc_gain(rw), np.eye(3), atol=1e-12)
    w = np.logspace(0, 4, 400)
    _, smax = frequency_response(rw.subsystem(["u"], ["y"]), w)
    # zeta = 0.7: peak magnitude 1/(2 z sqrt(1-z^2)) = 1.0002, essentially flat
    assert np.max(smax) <= 1.001


def test_delay_is_all_pass_with_unit_dc():
    av = avionics()
    d = av["DELAY"]
    assert np.allclose(dc_gain(d), np.eye(3), atol=1e-12)
    w = np.logspace(-2, 4, 300)
    resp, _ = frequency_response(d, w)
    assert np.allclose(np.abs(resp[:, 0, 0]), 1.0, atol=1e-10)


def test_gyro_and_sst_cutoffs():
    av = avionics()
    for name, wc in (("GYRO", 200 * np.pi), ("SST", 16 * np.pi)):
        g = av[name]
        assert np.allclose(dc_gain(g), np.eye(3), atol=1e-12)
        resp, _ = frequency_response(g, [wc])
        assert abs(resp[0, 0, 0]) == pytest.approx(1 / np.sqrt(2), rel=1e-9)


def test_observer_component_transfers():
    # the printed filter matrices realize the classic complementary blend;
    # s^2/(s^2 + 0.1131 s + 0.003948) appears on the rate channel, and the
    # attitude channel is its unity-DC complement driven by the star tracker
    obs = avionics()["OBS"]
    w = np.logspace(-4, 2, 300)
    resp, _ = frequency_response(obs, w)
    s = 1j * w
    det = s * s + 0.1131 * s + 0.003948
    assert np.max(np.abs(resp[:, 3, 3] - s * s / det)) < 1e-9
    assert np.max(np.abs(resp[:, 0, 0] - (0.1131 * s + 0.00394) / det)) < 1e-9
    assert np.max(np.abs(resp[:, 0, 3] - s / det)) < 1e-9
    # perfect measurements: theta_hat tracks theta to the printed precision
    blend = resp[:, 0, 0] + resp[:, 0, 3] * s
    assert np.max(np.abs(blend - 1.0)) < 3e-3


@pytest.mark.xfail(strict=True, reason=(
    "stated form puts the high-pass s^2/(s^2+0.1131s+0.003948) on the "
    "attitude channel; a DC-blind attitude estimate cannot reject constant "
    "disturbance torques (the closure acquires an exact zero eigenvalue), "
    "which contradicts the closed-loop stability and index requirements. "
    "The filter is implemented with the printed matrices and the unity-DC "
    "complementary port binding instead; see the decisions ledger."))
def test_observer_attitude_channel_as_stated():
    obs = avionics()["OBS"]
    w = np.logspace(-4, 2, 300)
    resp, _ = frequency_response(obs, w)
    s = 1j * w
    det = s * s + 0.1131 * s + 0.003948
    assert np.max(np.abs(resp[:, 0, 0] - s * s / det)) < 1e-9


# -- weights -------------------------------------------------------------------

def test_w_rpe_zero_at_dc_and_2000_at_infinity():
    wts = weights(REQ)
    w_rpe = wts["W_RPE"]
    assert np.allclose(dc_gain(w_rpe), 0.0, atol=1e-12)
    resp, _ = frequency_response(w_rpe, [1e6])
    scaled = wts["rpe_scale"] @ resp[0]
    assert abs(scaled[0, 0]) == pytest.approx(2000.0, rel=1e-6)


def test_w_s_value():
    assert weights(REQ)["W_S"] == pytest.approx(2.0 / 3.0)


def test_margin_arithmetic():
    m = margin_bounds(1.5)
    assert m["gain"] == pytest.approx(3.0, abs=1e-12)
    assert m["gain_db"] == pytest.approx(9.542, abs=1e-3)
    assert m["phase_deg"] == pytest.approx(38.94, abs=1e-2)
    assert m["disk"] == pytest.approx(0.667, abs=1e-3)


# -- controller and initialization ----------------------------------------------

def test_controller_static_map():
    g = ControllerGains((2.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    k = controller(g)
    u = k.D @ np.array([1.0, 0, 0, 0, 0, 0])
    assert np.allclose(u, [-2.0, 0, 0])
    u = k.D @ np.array([0, 0, 0, 0.5, 0, 0])
    assert np.allclose(u, [-0.5, 0, 0])


def test_initial_gains_reproduce_reference_values():
    g = initial_gains(np.diag(J_TABLE), omega=0.06, xi=0.7)
    expected = np.array([8.6952, 202.8248, 6.1029, 142.4001, 10.5454, 246.0605])
    assert np.allclose(g.as_vector(), expected, rtol=1e-3)


def test_initial_gains_bandwidth_bound_branch():
    wr = required_bandwidth(J_TABLE, REQ)
    assert wr[0] == pytest.approx(0.0992, abs=2e-4)
    # with the floor removed, the bound governs
    g = initial_gains(np.diag(J_TABLE), REQ, omega_floor=0.0)
    assert g.kp[0] == pytest.approx(J_TABLE[0] * wr[0] ** 2, rel=1e-12)
    # floored: all axes exceed 0.06, so the bound still governs here
    g2 = initial_gains(np.diag(J_TABLE), REQ, omega_floor=0.2)
    assert g2.kp[0] == pytest.approx(J_TABLE[0] * 0.04, rel=1e-12)


def test_initial_gains_reject_bad_inertia():
    with pytest.raises(ValueError):
        initial_gains(np.diag([1.0, -1.0, 1.0]), REQ)


# -- generalized plant -----------------------------------------------------------

def test_ideal_loop_pole_identity():
    gp = build_gp(ideal=True)
    g0 = initial_gains(np.diag(J_TABLE), omega=0.06, xi=0.7)
    lam = np.linalg.eigvals(gp.closed_a_matrix(g0))
    dt = REQ.dt_rpe
    expected = (list(np.roots([1, 2 * 0.7 * 0.06, 0.06 ** 2])) * 3
                + list(np.roots([dt * dt, 6 * dt, 12])) * 3)
    for t in expected:
        assert min(abs(lam - t)) < 1e-10


def test_static_ape_cross_check():
    idx = static_ape_index(FINAL_GAINS, REQ)
    assert idx == pytest.approx(0.680, abs=0.005)
    per_axis = np.asarray(REQ.t_ext) / (np.asarray(FINAL_GAINS.kp) *
                                        np.asarray(REQ.ape))
    assert np.allclose(per_axis, [0.677, 0.680, 0.678], atol=5e-4)
    assert idx < 0.7208 and (0.7208 - idx) / 0.7208 < 0.10


def test_closed_loop_stable_with_initial_gains():
    gp = build_gp()
    g0 = initial_gains(np.diag(J_TABLE), omega=0.06)
    assert stable(close_loop(gp, g0))


def test_closed_loop_indices_on_rigid_plant():
    gp = build_gp()
    cl = close_loop(gp, FINAL_GAINS)
    assert stable(cl)
    jc2 = hinf_norm(cl.subsystem(["t_ext"], ["theta_ape"]), 1e-6)
    jc3 = hinf_norm(cl.subsystem(["t_ext"], ["theta_rpe"]), 1e-6)
    jc4 = hinf_norm(cl.subsystem(["t_ext"], ["u_n"]), 1e-6)
    jc5 = hinf_norm(cl.subsystem(["d_s"], ["t_s"]), 1e-6)
    # static lower bound, and the reference envelope on the rigid plant
    assert jc2 >= static_ape_index(FINAL_GAINS, REQ)
    assert jc2 == pytest.approx(0.7206, abs=2e-3)
    assert jc3 == pytest.approx(0.0583, abs=2e-3)
    assert jc4 == pytest.approx(0.0122, abs=5e-4)
    assert 0.6 < jc5 < 1.0


def test_noise_channel_scaling():
    gp1 = build_gp()
    # quadrupling the PSD doubles the amplitude weight
    req2 = Requirements(psd_sst=4 * REQ.psd_sst)
    gp2 = build_gp(req=req2)
    h1 = h2_norm(close_loop(gp1, FINAL_GAINS).subsystem(["n_sst"], ["theta_ape"]))
    h2 = h2_norm(close_loop(gp2, FINAL_GAINS).subsystem(["n_sst"], ["theta_ape"]))
    assert h2 == pytest.approx(2.0 * h1, rel=1e-9)


def test_near_zero_gains_flagged_unstable_but_sensitivity_feedthrough_is_ws():
    gp = build_gp()
    g_tiny = ControllerGains((1e-12,) * 3, (1e-12,) * 3)
    cl = close_loop(gp, g_tiny)
    assert not stable(cl)  # open integrators: analysis must see it
    sub = cl.subsystem(["d_s"], ["t_s"])
    # loop gain ~ 0: the injection-to-torque map collapses to W_S * I
    assert np.allclose(sub.D, np.eye(3) / REQ.gamma, atol=1e-9)


def test_requirements_validation():
    with pytest.raises(ValueError):
        Requirements(gamma=0.9)
    with pytest.raises(ValueError):
        Requirements(dt_rpe=-1.0)


def test_gains_validation_and_vector_round_trip():
    with pytest.raises(ValueError):
        ControllerGains((1.0, -1.0, 1.0), (1.0, 1.0, 1.0))
    g = ControllerGains((1.0, 2.0, 3.0), (4.0, 5.0, 6.0))
    assert ControllerGains.from_vector(g.as_vector()) == g


def test_command_magnitude_at_pointing_requirement():
    # final-type gains driven by an attitude error at the requirement level
    # command far below the torque ceiling
    u = FINAL_GAINS.matrix() @ np.concatenate([np.asarray(REQ.ape),
                                               np.zeros(3)])
    assert np.max(np.abs(u)) < 0.05 * REQ.u_max[0]


def test_closed_loop_stable_with_initial_gains_over_rotation_grid():
    from flexsat.benchmark import DesignVector, build_plant, default_config, rigid_inertia
    from flexsat.params import sigma4_grid

    cfg = default_config()
    chi = DesignVector.nominal()
    p0 = build_plant(cfg, chi)
    g0 = initial_gains(np.diag(rigid_inertia(p0)), REQ)
    av, wts = avionics(), weights(REQ)
    for theta in sigma4_grid(50):
        plant = build_plant(cfg, chi, theta_sa=float(theta))
        gp = generalized_plant(plant.ss, av, wts, REQ)
        a_cl = gp.closed_a_matrix(g0)
        assert np.max(np.linalg.eigvals(a_cl).real) < 0.0, theta
