"""Attitude control loop: avionics, estimator, weights, generalized plant.

Builds the weighted open interconnection whose closure with the 6-gain
decentralized PD controller exposes every requirement channel:

* pointing error against low-frequency disturbance torques (absolute and
  windowed-relative),
* commanded-torque usage,
* input sensitivity (stability margins via an H-infinity bound), and
* sensor-noise variance on the pointing outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .statespace import (
    StateSpace,
    diagonal_repeat,
    interconnect,
    siso_tf,
    static_gain,
)


@dataclass(frozen=True)
class Requirements:
    """Pointing, command and margin requirements plus sensor noise levels.

    Angles in rad, torques in N*m, PSDs in rad^2*s and rad^2/s.
    """

    ape: tuple = (0.08e-3, 0.2e-3, 0.08e-3)
    rpe: tuple = (0.5e-3, 0.5e-3, 0.5e-3)
    dt_rpe: float = 15.0
    t_ext: tuple = (1.9e-3, 1.9e-3, 1.9e-3)
    u_max: tuple = (0.215, 0.215, 0.215)
    gamma: float = 1.5
    psd_sst: float = (3.5e-5) ** 2
    psd_gyro: float = (1.4e-6) ** 2

    def __post_init__(self):
        vals = (*self.ape, *self.rpe, self.dt_rpe, *self.t_ext, *self.u_max,
                self.psd_sst, self.psd_gyro)
        if any(v <= 0 for v in vals):
            raise ValueError("all requirement entries must be positive")
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")


@dataclass(frozen=True)
class ControllerGains:
    """Per-axis proportional (kp) and rate (kv) gains of the PD law."""

    kp: tuple
    kv: tuple

    def __post_init__(self):
        kp = tuple(float(v) for v in np.atleast_1d(self.kp))
        kv = tuple(float(v) for v in np.atleast_1d(self.kv))
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kv", kv)
        if len(kp) != 3 or len(kv) != 3:
            raise ValueError("gains are per-axis: need 3 kp and 3 kv")
        if any(v <= 0 for v in kp + kv):
            raise ValueError("gains must be positive")

    def matrix(self) -> np.ndarray:
        """3x6 map from [theta_hat; omega_hat] to minus commanded torque."""
        return np.hstack([np.diag(self.kp), np.diag(self.kv)])

    def as_vector(self) -> np.ndarray:
        return np.array([self.kp[0], self.kv[0], self.kp[1], self.kv[1],
                         self.kp[2], self.kv[2]])

    @staticmethod
    def from_vector(v) -> "ControllerGains":
        v = np.asarray(v, float)
        return ControllerGains((v[0], v[2], v[4]), (v[1], v[3], v[5]))


def margin_bounds(gamma: float) -> dict:
    """Stability-margin guarantees implied by ||W_S S_i||_inf <= 1."""
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    return {
        "disk": 1.0 / gamma,
        "gain": gamma / (gamma - 1.0),
        "gain_db": 20.0 * math.log10(gamma / (gamma - 1.0)),
        "phase_deg": math.degrees(2.0 * math.asin(1.0 / (2.0 * gamma))),
    }


# ---------------------------------------------------------------------------
# avionics blocks
# ---------------------------------------------------------------------------

RW_OMEGA = 100.0 * math.pi
RW_ZETA = 0.7
GYRO_CUTOFF = 200.0 * math.pi
SST_CUTOFF = 16.0 * math.pi
DELAY_TD = 0.0625

# gyro-stellar estimator, one axis; states are (attitude estimate, gyro
# bias estimate). Inputs (theta_m, omega_m), outputs (theta_hat,
# omega_hat): the attitude blend has unity DC gain from the star-tracker
# channel and integrated-gyro content at high frequency (L1 = 0.1131,
# L2 = 0.003948, i.e. a 0.02*pi rad/s crossover at damping 0.9); the rate
# estimate is the attitude-estimate derivative.
OBS_A = np.array([[-0.1131, -1.0], [0.003948, 0.0]])
OBS_B = np.array([[0.1131, 1.0], [-0.00394, 0.0]])
OBS_C = np.array([[1.0, 0.0], [-0.1131, -1.0]])
OBS_D = np.array([[0.0, 0.0], [0.1131, 1.0]])


def avionics() -> dict:
    """Reaction wheel, gyro, star sensor, loop delay and estimator blocks."""
    rw1 = siso_tf([RW_OMEGA ** 2],
                  [1.0, 2 * RW_ZETA * RW_OMEGA, RW_OMEGA ** 2])
    gyro1 = siso_tf([GYRO_CUTOFF], [1.0, GYRO_CUTOFF])
    sst1 = siso_tf([SST_CUTOFF], [1.0, SST_CUTOFF])
    delay1 = siso_tf([DELAY_TD ** 2, -6 * DELAY_TD, 12.0],
                     [DELAY_TD ** 2, 6 * DELAY_TD, 12.0])
    obs1 = StateSpace(OBS_A, OBS_B, OBS_C, OBS_D,
                      [("theta_m", 1), ("omega_m", 1)],
                      [("theta_hat", 1), ("omega_hat", 1)])
    return {
        "RW": diagonal_repeat(rw1, 3),
        "GYRO": diagonal_repeat(gyro1, 3),
        "SST": diagonal_repeat(sst1, 3),
        "DELAY": diagonal_repeat(delay1, 3),
        "OBS": diagonal_repeat(obs1, 3),
    }


def weights(req: Requirements) -> dict:
    """Normalization filters for the requirement channels."""
    dt = req.dt_rpe
    w_rpe1 = siso_tf([dt * dt, math.sqrt(12.0) * dt, 0.0],
                     [dt * dt, 6.0 * dt, 12.0])
    # disturbance torques enter the wrench's torque slots; force rows zero
    w_ext_d = np.vstack([np.zeros((3, 3)), np.diag(req.t_ext)])
    return {
        "W_ext": static_gain(w_ext_d, [("u", 3)], [("y", 6)]),
        "Wn_SST": math.sqrt(req.psd_sst),
        "Wn_GYRO": math.sqrt(req.psd_gyro),
        "W_APE": static_gain(np.diag(1.0 / np.asarray(req.ape)),
                             [("u", 3)], [("y", 3)]),
        "W_RPE": diagonal_repeat(w_rpe1, 3),
        "W_S": 1.0 / req.gamma,
        "rpe_scale": np.diag(1.0 / np.asarray(req.rpe)),
    }


def controller(gains: ControllerGains) -> StateSpace:
    """Static decentralized PD map u = -(Kp theta_hat + Kv omega_hat)."""
    return static_gain(-gains.matrix(),
                       [("theta_hat", 3), ("omega_hat", 3)], [("u", 3)])


def required_bandwidth(inertia_diag, req: Requirements) -> np.ndarray:
    """Per-axis bandwidth meeting steady-state rejection of t_ext within ape."""
    j = np.asarray(inertia_diag, float)
    return np.sqrt(np.asarray(req.t_ext) / (j * np.asarray(req.ape)))


def initial_gains(inertia, req: Requirements | None = None, xi: float = 0.7,
                  omega=None, omega_floor: float = 0.06) -> ControllerGains:
    """Rigid-axis PD initialization kp = J w^2, kv = 2 xi J w.

    With ``omega`` given (scalar or per-axis), that bandwidth is used
    directly. Otherwise the per-axis bandwidth is the steady-state
    rejection requirement, floored at ``omega_floor``.
    """
    inertia = np.asarray(inertia, float)
    j = np.diag(inertia) if inertia.ndim == 2 else inertia
    if np.any(j <= 0):
        raise ValueError("inertia diagonal must be positive")
    if omega is not None:
        w = np.broadcast_to(np.asarray(omega, float), (3,)).astype(float)
    elif req is not None:
        w = np.maximum(omega_floor, required_bandwidth(j, req))
    else:
        w = np.full(3, omega_floor)
    return ControllerGains(tuple(j * w * w), tuple(2.0 * xi * j * w))


def static_ape_index(gains: ControllerGains, req: Requirements) -> float:
    """Steady-state rejection index max_i t_ext_i / (kp_i * ape_i)."""
    return float(np.max(np.asarray(req.t_ext) /
                        (np.asarray(gains.kp) * np.asarray(req.ape))))


def rigid_plant(mass: float, inertia) -> StateSpace:
    """Decoupled rigid spacecraft with the standard plant port layout.

    Inputs: external wrench at B (6) and control torque (3); outputs:
    attitude (3), rate (3) and the acceleration twist at B (6).
    """
    J = np.asarray(inertia, float)
    if J.ndim == 1:
        J = np.diag(J)
    Jinv = np.linalg.inv(J)
    A = np.zeros((6, 6))
    A[3:6, 0:3] = np.eye(3)          # theta' = omega
    B = np.zeros((6, 9))
    B[0:3, 3:6] = Jinv               # omega' from external torque
    B[0:3, 6:9] = Jinv               # omega' from control torque
    C = np.zeros((12, 6))
    C[0:3, 3:6] = np.eye(3)          # theta
    C[3:6, 0:3] = np.eye(3)          # omega
    D = np.zeros((12, 9))
    D[6:9, 0:3] = np.eye(3) / mass   # linear acceleration at B
    D[9:12, 3:6] = Jinv              # angular acceleration
    D[9:12, 6:9] = Jinv
    return StateSpace(A, B, C, D, [("w_ext", 6), ("u", 3)],
                      [("theta", 3), ("omega", 3), ("acc_b", 6)])


# ---------------------------------------------------------------------------
# generalized plant
# ---------------------------------------------------------------------------

EXOG_INPUTS = ("t_ext", "n_sst", "n_gyro", "d_s")
PERF_OUTPUTS = ("theta_ape", "theta_rpe", "u_n", "t_s")


@dataclass(frozen=True)
class GeneralizedPlant:
    """Weighted open loop with controller ports left open.

    External inputs: normalized disturbance torque, star-tracker noise,
    gyro noise, unit torque injection at the plant input, and the
    controller command. Outputs: the four normalized requirement channels
    plus the estimator outputs the controller consumes.
    """

    ss: StateSpace
    meta: dict = field(default_factory=dict)

    def close(self, gains: ControllerGains) -> StateSpace:
        """Static output feedback u = -K [theta_hat; omega_hat]."""
        return close_loop(self, gains)

    def closed_a_matrix(self, gains: ControllerGains) -> np.ndarray:
        ss = self.ss
        usl = ss.input_slice("u")
        ysl_t = ss.output_slice("theta_hat")
        ysl_w = ss.output_slice("omega_hat")
        yrow = np.r_[np.arange(ysl_t.start, ysl_t.stop),
                     np.arange(ysl_w.start, ysl_w.stop)]
        K = gains.matrix()
        return ss.A - ss.B[:, usl] @ K @ ss.C[yrow, :]


def generalized_plant(plant: StateSpace, av: dict | None,
                      wts: dict, req: Requirements) -> GeneralizedPlant:
    """Wire the plant, avionics and weights into the open loop.

    ``av=None`` gives the idealized loop (perfect sensing, no delay or
    wheel dynamics) used for design identities and quick studies.
    """
    u_scale = static_gain(np.diag(1.0 / np.asarray(req.u_max)),
                          [("u", 3)], [("y", 3)])
    tsum = static_gain(
        wts["W_S"] * np.hstack([np.eye(3)] * 3),
        [("in_cmd", 3), ("in_text", 3), ("in_d", 3)], [("y", 3)])
    wext = wts["W_ext"]
    torque_rows = np.hstack([np.zeros((3, 3)), np.eye(3)])

    blocks = {
        "plant": plant,
        "wext": wext,
        "wape": wts["W_APE"],
        "wrpe_core": wts["W_RPE"],
        "rpe_scale": static_gain(wts["rpe_scale"], [("u", 3)], [("y", 3)]),
        "unorm": u_scale,
        "tsum": tsum,
    }
    links = [
        ("wext.y", "plant.w_ext"),
        ("wext.y", "tsum.in_text", torque_rows),
        ("plant.theta", "wape.u"),
        ("plant.theta", "wrpe_core.u"),
        ("wrpe_core.y", "rpe_scale.u"),
    ]
    ext_in = [
        ("t_ext", [("wext.u", None)]),
        ("d_s", [("plant.u", None), ("tsum.in_d", None)]),
    ]

    if av is None:
        # perfect sensing: the noise ports exist for layout compatibility
        # but act nowhere
        ext_in += [
            ("n_sst", [("wape.u", np.zeros((3, 3)))]),
            ("n_gyro", [("wape.u", np.zeros((3, 3)))]),
            ("u", [("plant.u", None), ("unorm.u", None), ("tsum.in_cmd", None)]),
        ]
        ext_out = [
            ("theta_ape", "wape.y"),
            ("theta_rpe", "rpe_scale.y"),
            ("u_n", "unorm.y"),
            ("t_s", "tsum.y"),
            ("theta_hat", "plant.theta"),
            ("omega_hat", "plant.omega"),
        ]
        return GeneralizedPlant(interconnect(blocks, links, ext_in, ext_out),
                                meta={"ideal": True})

    blocks.update({
        "rw": av["RW"], "gyro": av["GYRO"], "sst": av["SST"],
        "delay": av["DELAY"], "obs": av["OBS"],
    })
    links += [
        ("delay.y", "rw.u"),
        ("rw.y", "plant.u"),
        ("rw.y", "tsum.in_cmd"),
        ("plant.theta", "sst.u"),
        ("plant.omega", "gyro.u"),
        ("sst.y", "obs.theta_m"),
        ("gyro.y", "obs.omega_m"),
    ]
    ext_in += [
        ("n_sst", [("obs.theta_m", wts["Wn_SST"] * np.eye(3))]),
        ("n_gyro", [("obs.omega_m", wts["Wn_GYRO"] * np.eye(3))]),
        ("u", [("delay.u", None), ("unorm.u", None)]),
    ]
    ext_out = [
        ("theta_ape", "wape.y"),
        ("theta_rpe", "rpe_scale.y"),
        ("u_n", "unorm.y"),
        ("t_s", "tsum.y"),
        ("theta_hat", "obs.theta_hat"),
        ("omega_hat", "obs.omega_hat"),
    ]
    return GeneralizedPlant(interconnect(blocks, links, ext_in, ext_out),
                            meta={"ideal": False})


def close_loop(gp: GeneralizedPlant, gains: ControllerGains) -> StateSpace:
    """Close the controller on the generalized plant.

    Returns the map from the exogenous inputs to the performance
    channels. An unstable closure is returned as-is so analysis can see
    it (norm evaluations then report it as unbounded).
    """
    ss = gp.ss
    usl = ss.input_slice("u")
    yt = ss.output_slice("theta_hat")
    yw = ss.output_slice("omega_hat")
    yrow = np.r_[np.arange(yt.start, yt.stop), np.arange(yw.start, yw.stop)]
    wcols = []
    win_ports = []
    for name in EXOG_INPUTS:
        sl = ss.input_slice(name)
        wcols.extend(range(sl.start, sl.stop))
        win_ports.append((name, sl.stop - sl.start))
    zrows = []
    zout_ports = []
    for name in PERF_OUTPUTS:
        sl = ss.output_slice(name)
        zrows.extend(range(sl.start, sl.stop))
        zout_ports.append((name, sl.stop - sl.start))
    wcols = np.asarray(wcols)
    zrows = np.asarray(zrows)

    K = gains.matrix()
    Bu = ss.B[:, usl]
    Cy = ss.C[yrow, :]
    Dyw = ss.D[np.ix_(yrow, wcols)]
    Dyu = ss.D[np.ix_(yrow, np.arange(usl.start, usl.stop))]
    if np.max(np.abs(Dyu)) > 0:
        raise ValueError("estimator outputs must not feed through from u")
    A_cl = ss.A - Bu @ K @ Cy
    B_cl = ss.B[:, wcols] - Bu @ K @ Dyw
    Cz = ss.C[zrows, :]
    Dzw = ss.D[np.ix_(zrows, wcols)]
    Dzu = ss.D[np.ix_(zrows, np.arange(usl.start, usl.stop))]
    C_cl = Cz - Dzu @ K @ Cy
    D_cl = Dzw - Dzu @ K @ Dyw
    return StateSpace(A_cl, B_cl, C_cl, D_cl, win_ports, zout_ports)
