"""Desk-scale flexible-spacecraft benchmark assembly.

A rigid hub carries two solar arrays (yoke beam + panel), two radar-boom
tubes and a side-looking radar panel, all generated analytically from a
12-entry structural design vector. The free-floating plant exposes the
external wrench and control torque at a reference point B placed at the
overall nominal CoM, plus attitude/rate outputs integrated from the
angular acceleration.

Appendage modal data can be overridden per body with a JSON dataset, in
which case the analytic generator is bypassed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .params import ParameterSpec, sadm_dcm, sigma4_to_angle, validate_assignment
from .statespace import StateSpace, interconnect, reduce_minimal
from .substructure import (
    ModalAppendageData,
    RigidBodySpec,
    cantilever_beam_modal,
    connect_child,
    modal_data_from_json,
    rigid_multiport,
    scale_frequencies,
    two_port_from_modal,
)

OMEGA_L = 76.0 * math.pi   # launch stiffness threshold, rad/s

DESIGN_BOUNDS = {
    "e_y": (1.1e11, 1.23e11),
    "rho_y": (2.18e3, 4.5e3),
    "b_y": (1.5e-2, 5.0e-2),
    "d_y": (1.5e-2, 5.0e-2),
    "t_y": (1.0e-3, 2.0e-3),
    "t_sp": (2.0e-4, 4.0e-4),
    "t_cp": (1.0e-2, 3.5e-2),
    "lr_y": (0.42, 1.0),
    "ar_p": (0.75, 4.0 / 3.0),
    "r_srs": (1.25e-2, 2.0e-2),
    "t_srs": (3.8e-4, 6.0e-4),
    "t_cv": (5.0e-4, 1.5e-3),
}

# parameters whose growth adds structural mass (Young's modulus and the
# panel aspect ratio reshape without adding material)
MASS_DRIVERS = ("rho_y", "b_y", "d_y", "t_y", "t_sp", "t_cp", "lr_y",
                "r_srs", "t_srs", "t_cv")


@dataclass(frozen=True)
class DesignVector:
    """Structural design variables (SI units)."""

    e_y: float      # yoke Young modulus, Pa
    rho_y: float    # yoke density, kg/m^3
    b_y: float      # yoke section width, m
    d_y: float      # yoke section height, m
    t_y: float      # yoke wall thickness, m
    t_sp: float     # panel skin thickness, m
    t_cp: float     # panel core thickness, m
    lr_y: float     # yoke length ratio
    ar_p: float     # panel aspect ratio
    r_srs: float    # radar boom outer radius, m
    t_srs: float    # radar boom wall thickness, m
    t_cv: float     # radar panel core thickness, m

    def __post_init__(self):
        for name, (lo, hi) in DESIGN_BOUNDS.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ValueError(f"design variable {name}={v} outside "
                                 f"[{lo}, {hi}]")

    @staticmethod
    def nominal() -> "DesignVector":
        return DesignVector(**{k: 0.5 * (lo + hi)
                               for k, (lo, hi) in DESIGN_BOUNDS.items()})

    @staticmethod
    def mass_max() -> "DesignVector":
        vals = {k: 0.5 * (lo + hi) for k, (lo, hi) in DESIGN_BOUNDS.items()}
        for k in MASS_DRIVERS:
            vals[k] = DESIGN_BOUNDS[k][1]
        return DesignVector(**vals)

    def with_values(self, values: Mapping[str, float]) -> "DesignVector":
        return replace(self, **dict(values))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in DESIGN_BOUNDS}


def design_specs(subset=None) -> list[ParameterSpec]:
    names = list(DESIGN_BOUNDS) if subset is None else list(subset)
    nom = DesignVector.nominal()
    return [ParameterSpec(n, getattr(nom, n), *DESIGN_BOUNDS[n], kind="design")
            for n in names]


# fractional uncertainties; sigma4 parameterizes the array rotation
UNCERTAINTY_SPECS = [
    ParameterSpec("hub_mass", 0.0, -0.15, 0.15, occurrences=3),
    ParameterSpec("hub_ixx", 0.0, -0.15, 0.15, occurrences=1),
    ParameterSpec("hub_iyy", 0.0, -0.15, 0.15, occurrences=1),
    ParameterSpec("hub_izz", 0.0, -0.15, 0.15, occurrences=1),
    ParameterSpec("sa_mode1", 0.0, -0.25, 0.25, occurrences=4),
    ParameterSpec("sa_mode2", 0.0, -0.25, 0.25, occurrences=4),
    ParameterSpec("sar_mode1", 0.0, -0.25, 0.25, occurrences=2),
    ParameterSpec("sar_mode2", 0.0, -0.25, 0.25, occurrences=2),
    ParameterSpec("sigma4", 0.0, -1.0, 1.0, occurrences=32),
]


def uncertainty_specs(include_sigma4: bool = True) -> list[ParameterSpec]:
    if include_sigma4:
        return list(UNCERTAINTY_SPECS)
    return [s for s in UNCERTAINTY_SPECS if s.name != "sigma4"]


@dataclass(frozen=True)
class BenchConfig:
    """Hub properties, appendage constants and solver knobs."""

    hub_mass: float = 1173.0
    hub_inertia: tuple = (2415.33, 1695.25, 2929.28)
    sa_attach: float = 1.0          # array root offset along +/- y, m
    srs_attach: tuple = ((0.9, 0.0, 0.8), (-0.9, 0.0, 0.8))
    srs_cant: float = 30.0          # boom cant from +z toward +/- x, deg
    sar_attach: tuple = (0.0, 0.0, -1.0)

    yoke_length_ref: float = 1.2    # m at lr_y = 1

    panel_e: float = 70.0e9
    panel_nu: float = 0.33
    panel_rho_skin: float = 2700.0  # kg/m^3
    panel_rho_core: float = 50.0
    panel_area: float = 15.0        # m^2 per wing

    srs_e: float = 1.2e11
    srs_rho: float = 1600.0
    srs_length: float = 5.0

    sar_e: float = 60.0e9
    sar_rho_skin: float = 1600.0
    sar_rho_core: float = 50.0
    sar_skin_t: float = 5.0e-4
    sar_length: float = 4.0
    sar_width: float = 2.5

    zeta: float = 0.005
    n_modes: int = 4                # per appendage (two per bending plane)
    theta_sa: float = 0.0
    reduce_tol: float | None = None
    # monotone table lambda(ar_p); calibrated so the nominal design clears
    # the launch threshold with a 20% margin
    lambda_table: tuple = ((0.75, 0.0), (4.0 / 3.0, 0.0))
    modal_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.hub_mass <= 0:
            raise ValueError("hub mass must be positive")
        ars = [p[0] for p in self.lambda_table]
        lams = [p[1] for p in self.lambda_table]
        if any(l < 0 for l in lams):
            raise ValueError("lambda table values must be positive")
        if ars != sorted(ars):
            raise ValueError("lambda table must be sorted by aspect ratio")


def default_config() -> BenchConfig:
    return BenchConfig(lambda_table=_DEFAULT_LAMBDA_TABLE)


# ---------------------------------------------------------------------------
# appendage generators
# ---------------------------------------------------------------------------

def yoke_modal(cfg: BenchConfig, chi: DesignVector) -> ModalAppendageData:
    b, d, t = chi.b_y, chi.d_y, chi.t_y
    area = b * d - (b - 2 * t) * (d - 2 * t)
    iz = (d * b ** 3 - (d - 2 * t) * (b - 2 * t) ** 3) / 12.0
    iy = (b * d ** 3 - (b - 2 * t) * (d - 2 * t) ** 3) / 12.0
    return cantilever_beam_modal(
        chi.lr_y * cfg.yoke_length_ref, chi.e_y * iz, chi.rho_y * area,
        zeta=cfg.zeta, n_modes=cfg.n_modes, name="yoke",
        ei_transverse=chi.e_y * iy)


def panel_dims(cfg: BenchConfig, chi: DesignVector) -> tuple[float, float]:
    l_p = math.sqrt(cfg.panel_area * chi.ar_p)
    w_p = math.sqrt(cfg.panel_area / chi.ar_p)
    return l_p, w_p


def panel_areal_densities(cfg: BenchConfig, chi: DesignVector):
    """Per-area skin and core masses (kg/m^2)."""
    return 2.0 * chi.t_sp * cfg.panel_rho_skin, chi.t_cp * cfg.panel_rho_core


def panel_modal(cfg: BenchConfig, chi: DesignVector) -> ModalAppendageData:
    l_p, w_p = panel_dims(cfg, chi)
    rho_s, rho_c = panel_areal_densities(cfg, chi)
    ei_bend = cfg.panel_e * chi.t_sp * (chi.t_cp + chi.t_sp) ** 2 / 2.0 * w_p
    ei_inplane = cfg.panel_e * chi.t_sp * w_p ** 3 / 6.0
    return cantilever_beam_modal(
        l_p, ei_inplane, (rho_s + rho_c) * w_p,
        zeta=cfg.zeta, n_modes=cfg.n_modes, name="panel",
        ei_transverse=ei_bend)


def srs_modal(cfg: BenchConfig, chi: DesignVector) -> ModalAppendageData:
    r, t = chi.r_srs, chi.t_srs
    area = math.pi * (r * r - (r - t) ** 2)
    inertia = math.pi / 4.0 * (r ** 4 - (r - t) ** 4)
    return cantilever_beam_modal(
        cfg.srs_length, cfg.srs_e * inertia, cfg.srs_rho * area,
        zeta=cfg.zeta, n_modes=cfg.n_modes, name="srs")


def sar_modal(cfg: BenchConfig, chi: DesignVector) -> ModalAppendageData:
    ts = cfg.sar_skin_t
    rho_a = (2 * ts * cfg.sar_rho_skin + chi.t_cv * cfg.sar_rho_core) * cfg.sar_width
    ei_bend = cfg.sar_e * ts * (chi.t_cv + ts) ** 2 / 2.0 * cfg.sar_width
    ei_inplane = cfg.sar_e * ts * cfg.sar_width ** 3 / 6.0
    return cantilever_beam_modal(
        cfg.sar_length, ei_inplane, rho_a,
        zeta=cfg.zeta, n_modes=cfg.n_modes, name="sar",
        ei_transverse=ei_bend)


def _load_override(path) -> ModalAppendageData:
    with open(path) as f:
        return modal_data_from_json(json.load(f))


def scale_mode_pairs(data: ModalAppendageData, d1: float, d2: float
                     ) -> ModalAppendageData:
    """Scale the two lowest modes by (1+d1) and the next two by (1+d2)."""
    if d1 == 0.0 and d2 == 0.0:
        return data
    delta = np.zeros(data.n_modes)
    order = np.argsort(data.freq_rad_s)
    delta[order[0:2]] = d1
    delta[order[2:4]] = d2
    return scale_frequencies(data, delta)


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def _mount_frames(cfg: BenchConfig) -> dict:
    """Proper rotation per appendage (local beam x to its deployed axis)."""
    y_hat = np.array([0.0, 1.0, 0.0])
    r_plus = np.column_stack(([0, 1, 0], [0, 0, 1], [1, 0, 0])).astype(float)
    # mirror image of the +y mount through the x-z plane
    r_minus = np.column_stack(([0, -1, 0], [0, 0, 1], [-1, 0, 0])).astype(float)
    cant = math.radians(cfg.srs_cant)
    frames = {"sa_plus": r_plus, "sa_minus": r_minus}
    for label, sign in (("srs_plus", 1.0), ("srs_minus", -1.0)):
        d = np.array([sign * math.sin(cant), 0.0, math.cos(cant)])
        frames[label] = np.column_stack((d, y_hat, np.cross(d, y_hat)))
    d_sar = np.array([0.0, 0.0, -1.0])
    frames["sar"] = np.column_stack((d_sar, y_hat, np.cross(d_sar, y_hat)))
    return frames


# ---------------------------------------------------------------------------
# plant assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Plant:
    """Assembled free-floating spacecraft model with bookkeeping."""

    ss: StateSpace
    mass_total: float            # analytic bookkeeping, kg
    com_b: np.ndarray            # reference point B (overall nominal CoM)
    appendage_masses: dict
    chi: DesignVector
    delta: dict
    theta_sa: float
    n_flex_states: int


def build_plant(cfg: BenchConfig, chi: DesignVector,
                delta: Mapping[str, float] | None = None,
                theta_sa: float | None = None,
                datasets: Mapping[str, ModalAppendageData] | None = None,
                ) -> Plant:
    """Assemble the benchmark for one design/uncertainty/rotation triple.

    ``delta`` holds fractional deviations named per ``UNCERTAINTY_SPECS``;
    the array rotation comes from ``theta_sa`` when given, else from the
    ``sigma4`` entry, else from the config default. ``datasets`` replaces
    the analytic generator per appendage kind (yoke/panel/srs/sar), e.g.
    with surrogate-evaluated or file-loaded modal data; file overrides
    from the config are applied the same way.
    """
    delta = dict(validate_assignment(UNCERTAINTY_SPECS, delta or {}))
    d = lambda k: delta.get(k, 0.0)
    if theta_sa is None:
        theta_sa = (sigma4_to_angle(delta["sigma4"]) if "sigma4" in delta
                    else cfg.theta_sa)

    hub_mass = cfg.hub_mass * (1.0 + d("hub_mass"))
    hub_inertia = np.diag([
        cfg.hub_inertia[0] * (1.0 + d("hub_ixx")),
        cfg.hub_inertia[1] * (1.0 + d("hub_iyy")),
        cfg.hub_inertia[2] * (1.0 + d("hub_izz")),
    ])

    datasets = datasets or {}

    def gen(kind, fallback):
        if kind in datasets:
            return datasets[kind]
        if kind in cfg.modal_overrides:
            return _load_override(cfg.modal_overrides[kind])
        return fallback()

    yoke = gen("yoke", lambda: yoke_modal(cfg, chi))
    panel = gen("panel", lambda: panel_modal(cfg, chi))
    srs = gen("srs", lambda: srs_modal(cfg, chi))
    sar = gen("sar", lambda: sar_modal(cfg, chi))
    for a in (yoke, panel, srs, sar):
        if a.n_modes and np.min(a.freq_rad_s) <= 0:
            raise ValueError(f"appendage {a.name}: nonpositive first frequency")

    yoke = scale_mode_pairs(yoke, d("sa_mode1"), d("sa_mode2"))
    panel = scale_mode_pairs(panel, d("sa_mode1"), d("sa_mode2"))
    sar = scale_mode_pairs(sar, d("sar_mode1"), d("sar_mode2"))

    frames = _mount_frames(cfg)
    r_sadm = sadm_dcm(theta_sa, axis="y")
    dcms = {
        "sa_plus": r_sadm @ frames["sa_plus"],
        "sa_minus": r_sadm @ frames["sa_minus"],
        "srs_plus": frames["srs_plus"],
        "srs_minus": frames["srs_minus"],
        "sar": frames["sar"],
    }
    attach = {
        "sa_plus": np.array([0.0, cfg.sa_attach, 0.0]),
        "sa_minus": np.array([0.0, -cfg.sa_attach, 0.0]),
        "srs_plus": np.asarray(cfg.srs_attach[0], float),
        "srs_minus": np.asarray(cfg.srs_attach[1], float),
        "sar": np.asarray(cfg.sar_attach, float),
    }

    yoke_len = chi.lr_y * cfg.yoke_length_ref
    masses = {}
    moments = []
    app_masses = {}
    for side in ("sa_plus", "sa_minus"):
        R = dcms[side]
        p0 = attach[side]
        m_y = yoke.mass()
        c_y = p0 + R @ yoke.com_offset()
        tip = p0 + R @ np.array([yoke_len, 0.0, 0.0])
        m_p = panel.mass()
        c_p = tip + R @ panel.com_offset()
        masses[f"{side}_yoke"] = (m_y, c_y)
        masses[f"{side}_panel"] = (m_p, c_p)
        app_masses[f"{side}"] = m_y + m_p
    for side in ("srs_plus", "srs_minus"):
        m_s = srs.mass()
        c_s = attach[side] + dcms[side] @ srs.com_offset()
        masses[side] = (m_s, c_s)
        app_masses[side] = m_s
    m_v = sar.mass()
    masses["sar"] = (m_v, attach["sar"] + dcms["sar"] @ sar.com_offset())
    app_masses["sar"] = m_v

    total = hub_mass + sum(m for m, _ in masses.values())
    com_b = sum(m * c for m, c in masses.values()) / total  # hub CoM at origin

    hub = rigid_multiport(
        RigidBodySpec(hub_mass, np.zeros(3), hub_inertia, dict(attach)),
        com_b)

    # chain panel on yoke once, reuse for both wings
    array_block = connect_child(two_port_from_modal(yoke), "tip",
                                two_port_from_modal(panel), child_prefix="panel_")
    net = hub
    for side in ("sa_plus", "sa_minus"):
        net = connect_child(net, side, array_block, dcm=dcms[side],
                            child_prefix=f"{side}_")
    for side in ("srs_plus", "srs_minus"):
        net = connect_child(net, side, two_port_from_modal(srs), dcm=dcms[side],
                            child_prefix=f"{side}_")
    net = connect_child(net, "sar", two_port_from_modal(sar), dcm=dcms["sar"],
                        child_prefix="sar_")

    embed_torque = np.vstack([np.zeros((3, 3)), np.eye(3)])
    core = interconnect(
        {"net": net},
        links=[],
        ext_in=[("w_ext", [("net.wrench_b", None)]),
                ("u", [("net.wrench_b", embed_torque)])],
        ext_out=[("acc_b", "net.acc_b")],
    )
    if cfg.reduce_tol is not None:
        core = reduce_minimal(core, tol=cfg.reduce_tol)
    elif core.n_states > 200:
        # large assemblies are trimmed automatically; explicit reduce_tol
        # overrides this default
        core = reduce_minimal(core, tol=1e-8)
    n_flex = core.n_states

    att = StateSpace(
        np.block([[np.zeros((3, 3)), np.zeros((3, 3))],
                  [np.eye(3), np.zeros((3, 3))]]),
        np.vstack([np.eye(3), np.zeros((3, 3))]),
        np.vstack([np.hstack([np.zeros((3, 3)), np.eye(3)]),
                   np.hstack([np.eye(3), np.zeros((3, 3))])]),
        np.zeros((6, 3)),
        [("ang_acc", 3)], [("theta", 3), ("omega", 3)])
    pick_ang = np.hstack([np.zeros((3, 3)), np.eye(3)])
    full = interconnect(
        {"core": core, "att": att},
        links=[("core.acc_b", "att.ang_acc", pick_ang)],
        ext_in=[("w_ext", [("core.w_ext", None)]),
                ("u", [("core.u", None)])],
        ext_out=[("theta", "att.theta"), ("omega", "att.omega"),
                 ("acc_b", "core.acc_b")],
    )
    return Plant(full, float(total), com_b, app_masses, chi, delta,
                 float(theta_sa), n_flex)


def total_mass(plant: Plant, omega0: float = 1e-4) -> float:
    """Mass from the low-frequency x-force to x-acceleration channel."""
    from .norms import dc_gain

    sub = plant.ss.subsystem(["w_ext"], ["acc_b"])
    g = dc_gain(sub, omega0=omega0)[0, 0]
    if not np.isfinite(g) or g <= 0:
        raise ValueError("mass channel gain is not finite and positive")
    return float(1.0 / g)


def rigid_inertia(plant: Plant, omega0: float = 1e-4) -> np.ndarray:
    """Whole-spacecraft inertia at B from the torque channel DC gain."""
    from .norms import _response_at

    sub = plant.ss.subsystem(["w_ext"], ["acc_b"])
    resp = _response_at(sub, np.array([omega0]))[0].real
    block = resp[3:6, 3:6]
    try:
        return np.linalg.inv(block)
    except np.linalg.LinAlgError as exc:
        raise ValueError("torque-to-angular-acceleration block is singular"
                         ) from exc


# ---------------------------------------------------------------------------
# launch constraint
# ---------------------------------------------------------------------------

def lambda_factor(cfg: BenchConfig, ar_p: float) -> float:
    ars = np.array([p[0] for p in cfg.lambda_table])
    lams = np.array([p[1] for p in cfg.lambda_table])
    if not ars[0] <= ar_p <= ars[-1]:
        raise ValueError(f"ar_p={ar_p} outside the lambda table domain "
                         f"[{ars[0]}, {ars[-1]}]")
    return float(np.interp(ar_p, ars, lams))


def launch_frequency(chi: DesignVector, cfg: BenchConfig) -> float:
    """Stowed-panel stiffness frequency (empirical), rad/s."""
    rho_s, rho_c = panel_areal_densities(cfg, chi)
    l_p, w_p = panel_dims(cfg, chi)
    beta = (rho_s + rho_c) / (l_p * w_p)
    h = 2.0 * chi.t_sp
    i_p = (chi.t_cp / 2.0 + h / 4.0) ** 2
    r_p = 12.0 * i_p / h ** 3
    lam = lambda_factor(cfg, chi.ar_p)
    return lam * math.sqrt(r_p * cfg.panel_e * h ** 3 /
                           (12.0 * beta * (1.0 - cfg.panel_nu) ** 2))


def launch_passes(omega_sto: float) -> bool:
    return omega_sto > OMEGA_L


# monotone-decreasing stowed-stiffness factor over the aspect-ratio range,
# pinned so the nominal design clears the launch threshold by 20% while the
# all-min-thickness corner fails it
_DEFAULT_LAMBDA_TABLE = (
    (0.75, 0.03267175271113673),
    (25.0 / 24.0, 0.02722646059261394),
    (4.0 / 3.0, 0.021781168474091155),
)
