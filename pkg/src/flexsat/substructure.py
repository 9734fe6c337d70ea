"""Two-port flexible substructure blocks and rigid multi-port bodies.

A flexible appendage clamped at a parent node P with one or more free
child nodes C is represented by a state-space block whose inputs are the
wrenches applied at the free nodes plus the acceleration twist imposed
at P, and whose outputs are the acceleration twists at the free nodes
plus the wrench transmitted back to the parent. Blocks are built from
modal data (frequencies, damping, participation factors, mode-shape
projections, rigid mass) and chained by closing wrench/acceleration
loops, optionally through a rotation between body frames.

Conventions: wrenches are [force(3); torque(3)], acceleration twists
[linear(3); angular(3)], everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .statespace import PortError, StateSpace, interconnect


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == v x w."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def transport(r) -> np.ndarray:
    """Twist transport phi(r) = [[I, skew(r)], [0, I]].

    twist_at_X = phi(r_Y - r_X) @ twist_at_Y and, dually,
    wrench_at_Y = phi(r_Y - r_X).T @ wrench_applied_at_X.
    """
    out = np.eye(6)
    out[0:3, 3:6] = skew(r)
    return out


def rotation_blkdiag(dcm: np.ndarray) -> np.ndarray:
    """6x6 block-diagonal rotation acting on wrenches or twists."""
    out = np.zeros((6, 6))
    out[0:3, 0:3] = dcm
    out[3:6, 3:6] = dcm
    return out


def _check_dcm(dcm: np.ndarray):
    dcm = np.asarray(dcm, dtype=float)
    if dcm.shape != (3, 3):
        raise ValueError("dcm must be 3x3")
    if not np.allclose(dcm.T @ dcm, np.eye(3), atol=1e-9):
        raise ValueError("dcm must be orthonormal")
    if not math.isclose(np.linalg.det(dcm), 1.0, abs_tol=1e-9):
        raise ValueError("dcm must be proper (det = +1)")
    return dcm


# ---------------------------------------------------------------------------
# modal data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreePort:
    """Free (child-side) connection node of a flexible appendage."""

    name: str
    phi_c: np.ndarray        # 6 x n_modes mode-shape projections at the node
    cp_vector: np.ndarray    # vector from the node C to the clamped node P

    def tau(self) -> np.ndarray:
        """Rigid kinematic map from P-twist to C-twist."""
        return transport(self.cp_vector)


@dataclass(frozen=True)
class ModalAppendageData:
    """Clamped-interface modal export of one flexible appendage.

    Attributes
    ----------
    freq_rad_s, damping : arrays of length n_modes
    lp : (n_modes, 6) participation factors w.r.t. the clamped node P
    ports : free ports with mode-shape projections and geometry
    mr : (6, 6) rigid mass matrix about P
    """

    name: str
    freq_rad_s: np.ndarray
    damping: np.ndarray
    lp: np.ndarray
    ports: tuple[FreePort, ...]
    mr: np.ndarray

    def __post_init__(self):
        freq = np.atleast_1d(np.asarray(self.freq_rad_s, dtype=float))
        zeta = np.atleast_1d(np.asarray(self.damping, dtype=float))
        lp = np.asarray(self.lp, dtype=float).reshape(len(freq), 6)
        mr = np.asarray(self.mr, dtype=float)
        object.__setattr__(self, "freq_rad_s", freq)
        object.__setattr__(self, "damping", zeta)
        object.__setattr__(self, "lp", lp)
        object.__setattr__(self, "mr", mr)
        object.__setattr__(self, "ports", tuple(
            FreePort(p.name, np.asarray(p.phi_c, float).reshape(6, len(freq)),
                     np.asarray(p.cp_vector, float).reshape(3))
            for p in self.ports))
        if np.any(freq <= 0):
            raise ValueError(f"{self.name}: modal frequencies must be positive")
        if len(zeta) != len(freq):
            raise ValueError(f"{self.name}: damping length mismatch")
        if np.any(zeta <= 0) or np.any(zeta >= 1):
            raise ValueError(f"{self.name}: damping ratios must lie in (0, 1)")
        if mr.shape != (6, 6) or not np.allclose(mr, mr.T, atol=1e-9 * _mnorm(mr)):
            raise ValueError(f"{self.name}: Mr must be symmetric 6x6")
        if np.min(np.linalg.eigvalsh(0.5 * (mr + mr.T))) <= 0:
            raise ValueError(f"{self.name}: Mr must be positive definite")
        mrr = self.residual_mass()
        if np.min(np.linalg.eigvalsh(0.5 * (mrr + mrr.T))) < -1e-8 * _mnorm(mr):
            raise ValueError(f"{self.name}: residual mass Mr - Lp'Lp is not PSD")

    @property
    def n_modes(self) -> int:
        return len(self.freq_rad_s)

    def residual_mass(self) -> np.ndarray:
        return self.mr - self.lp.T @ self.lp

    def mass(self) -> float:
        """Total rigid mass (translation diagonal of Mr)."""
        return float(self.mr[0, 0])

    def com_offset(self) -> np.ndarray:
        """CoM position relative to P, recovered from the Mr coupling block."""
        s = self.mr[3:6, 0:3] / self.mass()
        return np.array([s[2, 1], s[0, 2], s[1, 0]])


def _mnorm(m) -> float:
    return float(max(np.max(np.abs(m)), 1.0))


def scale_frequencies(data: ModalAppendageData, delta) -> ModalAppendageData:
    """Return a copy with frequencies scaled to (1 + delta_k) * w_k.

    ``delta`` is a scalar or a per-mode array; damping, participation
    factors and mode shapes are left untouched.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.ndim == 0:
        delta = np.full(data.n_modes, float(delta))
    if delta.shape != (data.n_modes,):
        raise ValueError(
            f"delta length {delta.shape} does not match {data.n_modes} modes")
    if np.any(1.0 + delta <= 0):
        raise ValueError("1 + delta must stay positive")
    return replace(data, freq_rad_s=data.freq_rad_s * (1.0 + delta))


# ---------------------------------------------------------------------------
# block construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPortModel:
    """Two-port substructure block with its source modal data.

    Input ports: ``wrench_<port>`` per free port then ``acc_p``;
    output ports: ``acc_<port>`` per free port then ``wrench_p``.
    """

    ss: StateSpace
    data: ModalAppendageData

    @property
    def n_modes(self) -> int:
        return self.data.n_modes


def two_port_from_modal(data: ModalAppendageData) -> TwoPortModel:
    """Assemble the two-port state-space block from modal data.

    With n modes: A = [[0, I], [-diag(w^2), -diag(2 z w)]]; the static
    block couples free-node wrenches and the clamped-node acceleration
    through the mode shapes, participation factors, rigid kinematics and
    residual mass. The zero-mode case degenerates to the rigid reaction
    W_parent = -Mr @ acc_p.
    """
    n = data.n_modes
    k = np.diag(data.freq_rad_s ** 2)
    c = np.diag(2.0 * data.damping * data.freq_rad_s)
    phi = np.vstack([p.phi_c for p in data.ports]) if data.ports else np.zeros((0, n))
    tau = np.vstack([p.tau() for p in data.ports]) if data.ports else np.zeros((0, 6))
    lp = data.lp
    mrr = data.residual_mass()
    npp = phi.shape[0]

    A = np.block([
        [np.zeros((n, n)), np.eye(n)],
        [-k, -c],
    ]) if n else np.zeros((0, 0))
    B = np.block([
        [np.zeros((n, npp)), np.zeros((n, 6))],
        [phi.T, -lp],
    ]) if n else np.zeros((0, npp + 6))
    C = np.block([
        [-phi @ k, -phi @ c],
        [lp.T @ k, lp.T @ c],
    ]) if n else np.zeros((npp + 6, 0))
    coup = tau - phi @ lp
    # interface reaction feedthrough is -(Mr - Lp'Lp) = -Mrr; deriving the
    # clamped-interface equilibrium gives Lp'Lp - Mr, the residual-mass form
    D = np.block([
        [phi @ phi.T, coup],
        [coup.T, -mrr],
    ])
    inputs = [(f"wrench_{p.name}", 6) for p in data.ports] + [("acc_p", 6)]
    outputs = [(f"acc_{p.name}", 6) for p in data.ports] + [("wrench_p", 6)]
    return TwoPortModel(StateSpace(A, B, C, D, inputs, outputs), data)


@dataclass(frozen=True)
class RigidBodySpec:
    """Rigid body with labeled connection points (coordinates in body frame)."""

    mass: float
    com: np.ndarray
    inertia_com: np.ndarray
    points: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "com", np.asarray(self.com, float).reshape(3))
        object.__setattr__(self, "inertia_com",
                           np.asarray(self.inertia_com, float).reshape(3, 3))
        if self.mass <= 0:
            raise ValueError("rigid body mass must be > 0")
        J = self.inertia_com
        if not np.allclose(J, J.T, atol=1e-9 * _mnorm(J)):
            raise ValueError("inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (J + J.T))) <= 0:
            raise ValueError("inertia must be positive definite")


def rigid_multiport(spec: RigidBodySpec, ref_point) -> StateSpace:
    """Static multi-port rigid body.

    Inputs are the wrenches applied at every connection point plus the
    external wrench at the reference point B; outputs are the
    acceleration twists at the same locations. Kinematics are transported
    rigidly through the CoM (linearized, no gyroscopic terms).
    """
    ref = np.asarray(ref_point, float).reshape(3)
    names = list(spec.points)
    locs = [np.asarray(spec.points[k], float).reshape(3) for k in names]
    for i in range(len(locs)):
        for j in range(i + 1, len(locs)):
            if np.allclose(locs[i], locs[j]):
                raise ValueError(f"connection points {names[i]!r} and "
                                 f"{names[j]!r} coincide")
    all_names = names + ["b"]
    all_locs = locs + [ref]
    m_inv = np.zeros((6, 6))
    m_inv[0:3, 0:3] = np.eye(3) / spec.mass
    m_inv[3:6, 3:6] = np.linalg.inv(spec.inertia_com)
    to_g = [transport(spec.com - r) for r in all_locs]
    np_all = len(all_names)
    D = np.zeros((6 * np_all, 6 * np_all))
    for j in range(np_all):
        for i in range(np_all):
            D[6 * j:6 * j + 6, 6 * i:6 * i + 6] = to_g[j] @ m_inv @ to_g[i].T
    inputs = [(f"wrench_{k}", 6) for k in all_names]
    outputs = [(f"acc_{k}", 6) for k in all_names]
    return StateSpace(np.zeros((0, 0)), np.zeros((0, 6 * np_all)),
                      np.zeros((6 * np_all, 0)), D, inputs, outputs)


def connect_child(parent, port: str, child, dcm=None,
                  child_prefix: str | None = None) -> StateSpace:
    """Attach a child block on a parent connection point.

    The child's transmitted wrench is rotated into the parent frame by
    ``dcm`` (child-frame vectors to parent-frame vectors) and summed on
    the parent's ``wrench_<port>`` input; the parent's ``acc_<port>``
    twist is rotated by ``dcm.T`` into the child's clamped-node input.
    Remaining ports of both blocks stay exposed; the child's survivors
    are prefixed to keep names unique.
    """
    pss = parent.ss if isinstance(parent, TwoPortModel) else parent
    css = child.ss if isinstance(child, TwoPortModel) else child
    dcm = np.eye(3) if dcm is None else _check_dcm(np.asarray(dcm, float))
    R6 = rotation_blkdiag(dcm)
    prefix = child_prefix if child_prefix is not None else f"{port}_"
    links = [
        (f"p.acc_{port}", "c.acc_p", R6.T),
        ("c.wrench_p", f"p.wrench_{port}", R6),
    ]
    ext_in = []
    ext_out = []
    for g in pss.input_ports:
        if g.name != f"wrench_{port}":
            ext_in.append((g.name, f"p.{g.name}"))
        else:
            # keep the parent attachment input exposed so siblings or
            # external wrenches can still act at the same point
            ext_in.append((g.name, f"p.{g.name}"))
    for g in pss.output_ports:
        if g.name != f"acc_{port}":
            ext_out.append((g.name, f"p.{g.name}"))
    for g in css.input_ports:
        if g.name != "acc_p":
            ext_in.append((f"{prefix}{g.name}", f"c.{g.name}"))
    for g in css.output_ports:
        if g.name != "wrench_p":
            ext_out.append((f"{prefix}{g.name}", f"c.{g.name}"))
    return interconnect({"p": pss, "c": css}, links, ext_in, ext_out)


def invert_channels(model, channels: Sequence[tuple[str, str]]) -> StateSpace:
    """Exchange the role of selected input/output port pairs.

    Each pair (input_port, output_port) of equal width is swapped: the
    returned block accepts the old output as an input and produces the
    old input signal, realizing a boundary-condition change. Requires the
    direct feedthrough of the selected channels to be invertible.
    """
    ss = model.ss if isinstance(model, TwoPortModel) else model
    in_names = ss.input_names()
    out_names = ss.output_names()
    u2_idx, y2_idx = [], []
    for iname, oname in channels:
        isl = ss.input_slice(iname)
        osl = ss.output_slice(oname)
        if isl.stop - isl.start != osl.stop - osl.start:
            raise PortError(f"channel ({iname}, {oname}): width mismatch")
        u2_idx.extend(range(isl.start, isl.stop))
        y2_idx.extend(range(osl.start, osl.stop))
    u2 = np.asarray(u2_idx, int)
    y2 = np.asarray(y2_idx, int)
    u1 = np.setdiff1d(np.arange(ss.n_inputs), u2)
    y1 = np.setdiff1d(np.arange(ss.n_outputs), y2)
    D22 = ss.D[np.ix_(y2, u2)]
    try:
        cond = np.linalg.cond(D22)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(
            f"channels {list(channels)} have singular feedthrough "
            f"(cond={cond:.2e}); cannot invert")
    D22i = np.linalg.inv(D22)
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    B1, B2 = B[:, u1], B[:, u2]
    C1, C2 = C[y1, :], C[y2, :]
    D11 = D[np.ix_(y1, u1)]
    D12 = D[np.ix_(y1, u2)]
    D21 = D[np.ix_(y2, u1)]
    A_new = A - B2 @ D22i @ C2
    Bn = np.zeros((ss.n_states, ss.n_inputs))
    Bn[:, u1] = B1 - B2 @ D22i @ D21
    Bn[:, u2] = B2 @ D22i
    Cn = np.zeros((ss.n_outputs, ss.n_states))
    Cn[y1, :] = C1 - D12 @ D22i @ C2
    Cn[y2, :] = -D22i @ C2
    Dn = np.zeros_like(D)
    Dn[np.ix_(y1, u1)] = D11 - D12 @ D22i @ D21
    Dn[np.ix_(y1, u2)] = D12 @ D22i
    Dn[np.ix_(y2, u1)] = -D22i @ D21
    Dn[np.ix_(y2, u2)] = D22i
    swap_in = {i: o for i, o in channels}
    swap_out = {o: i for i, o in channels}
    new_inputs = [(swap_in.get(g.name, g.name), g.width) for g in ss.input_ports]
    new_outputs = [(swap_out.get(g.name, g.name), g.width) for g in ss.output_ports]
    return StateSpace(A_new, Bn, Cn, Dn, new_inputs, new_outputs)


# ---------------------------------------------------------------------------
# analytic clamped-free beam generator
# ---------------------------------------------------------------------------

_MAX_ANALYTIC_MODES = 20


def _clamped_free_roots(n: int) -> np.ndarray:
    """First n roots of cos(x) cosh(x) = -1 (as cos(x) + sech(x) = 0)."""
    roots = []
    for k in range(1, n + 1):
        if k == 1:
            lo, hi = 1.5, 2.5
        else:
            c = (2 * k - 1) * math.pi / 2.0
            lo, hi = c - 0.3, c + 0.3
        roots.append(brentq(lambda x: math.cos(x) + 1.0 / math.cosh(x), lo, hi,
                            xtol=1e-14, rtol=8.9e-16))
    return np.asarray(roots)


def _shape_terms(xi: float, z: np.ndarray):
    """Clamped-free mode shape and z-derivatives, evaluated cancellation-free.

    xi is the root beta*L, z = beta*x in [0, xi].
    Returns (phi, dphi/dz, d2phi/dz2).
    """
    sh, ch = np.sinh(xi), np.cosh(xi)
    s, c = math.sin(xi), math.cos(xi)
    sigma = (ch + c) / (sh + s)
    # 1 - sigma without subtracting near-equal large numbers
    delta = (-math.exp(-xi) + s - c) / (sh + s)
    one_plus = 1.0 + sigma
    em, ep = np.exp(-z), np.exp(z)
    cosh_m_ssinh = 0.5 * (em * one_plus + ep * delta)
    sinh_m_scosh = 0.5 * (-em * one_plus + ep * delta)
    phi = cosh_m_ssinh - np.cos(z) + sigma * np.sin(z)
    dphi = sinh_m_scosh + np.sin(z) + sigma * np.cos(z)
    ddphi = cosh_m_ssinh + np.cos(z) - sigma * np.sin(z)
    return phi, dphi, ddphi


def _plane_rows(rho_a, x, phi_arr, tip_v, tip_s, axis):
    """Participation row and tip-projection column for one planar mode."""
    i_f = rho_a * simpson(phi_arr, x=x)
    i_m = rho_a * simpson(phi_arr * x, x=x)
    lp_row = np.zeros(6)
    phi_col = np.zeros(6)
    if axis == 1:      # deflection along y, rotation about z
        lp_row[1], lp_row[5] = i_f, i_m
        phi_col[1], phi_col[5] = tip_v, tip_s
    else:              # deflection along z, rotation about -y
        lp_row[2], lp_row[4] = i_f, -i_m
        phi_col[2], phi_col[4] = tip_v, -tip_s
    return lp_row, phi_col


def _residual_pseudo_modes(length, ei_pl, rho_a, x, kept):
    """Ritz pseudo-modes spanning the truncated static tip compliance.

    ``kept`` holds (w, phi, dphi, ddphi) of the retained modes (physical
    x-derivatives). The residual static shapes under a unit tip force and
    unit tip moment are M- and K-orthogonal to the retained modes, so the
    reduced 2x2 eigenproblem yields mass-normalized modes that extend the
    basis consistently.
    """
    psi = [
        ((3 * length * x ** 2 - x ** 3) / (6 * ei_pl),
         x * (2 * length - x) / (2 * ei_pl),
         (length - x) / ei_pl),
        (x ** 2 / (2 * ei_pl), x / ei_pl, np.full_like(x, 1.0 / ei_pl)),
    ]
    shapes = []
    for j, (p, dp, ddp) in enumerate(psi):
        a, da, dda = p.copy(), dp.copy(), ddp.copy()
        for w, phi, dphi, ddphi in kept:
            coef = (phi[-1] if j == 0 else dphi[-1]) / (w * w)
            a -= coef * phi
            da -= coef * dphi
            dda -= coef * ddphi
        shapes.append((a, da, dda))
    m_res = np.empty((2, 2))
    k_res = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            m_res[i, j] = rho_a * simpson(shapes[i][0] * shapes[j][0], x=x)
            k_res[i, j] = ei_pl * simpson(shapes[i][2] * shapes[j][2], x=x)
    scale = rho_a * length * (length ** 3 / (3 * ei_pl)) ** 2
    if np.max(np.abs(m_res)) < 1e-14 * scale:
        return []
    import scipy.linalg as sla
    w2, q = sla.eigh(k_res, m_res)
    out = []
    last_kept = kept[-1][0]
    for k in range(2):
        if not np.isfinite(w2[k]) or w2[k] <= last_kept ** 2:
            continue
        arr = q[0, k] * shapes[0][0] + q[1, k] * shapes[1][0]
        darr = q[0, k] * shapes[0][1] + q[1, k] * shapes[1][1]
        if arr[-1] < 0:
            arr, darr = -arr, -darr
        out.append((math.sqrt(w2[k]), arr, arr[-1], darr[-1]))
    return out


def cantilever_beam_modal(length: float, ei: float, rho_a: float,
                          zeta: float = 0.005, n_modes: int = 4,
                          tip_point=None, name: str = "beam",
                          ei_transverse: float | None = None,
                          polar_gyration: float | None = None,
                          static_correction: bool = False,
                          ) -> ModalAppendageData:
    """Analytic clamped-free Euler-Bernoulli beam modal data.

    The beam runs along local +x from the clamped node P at the origin to
    the free node C at ``tip_point`` (default (length, 0, 0)). Bending is
    modeled in the two transverse planes (deflections along local y and
    z); axial and torsion channels are rigid. ``n_modes`` counts modes
    over both planes together, allocated alternately starting with the
    y-plane. ``ei_transverse`` sets the z-plane stiffness when the
    section is not symmetric; ``polar_gyration`` (default length/200)
    sets the small torsional gyration radius that keeps the rigid mass
    matrix positive definite.

    Frequencies follow w_k = (beta_k L)^2 sqrt(EI/rhoA) / L^2 from the
    roots of cos(bL) cosh(bL) = -1; shapes are mass normalized and signed
    so the first tip-deflection component is positive.

    With ``static_correction`` two residual-compliance pseudo-modes per
    modeled plane are appended (Ritz vectors spanning the static tip
    force/moment response left out by the truncated modal series). They
    restore quasi-static interface flexibility, which chained assemblies
    need; without them the joint rotation series converges only ~1/N.
    """
    if length <= 0 or ei <= 0 or rho_a <= 0:
        raise ValueError("length, ei and rho_a must be positive")
    if not 0 < zeta < 1:
        raise ValueError("zeta must lie in (0, 1)")
    if n_modes < 0:
        raise ValueError("n_modes must be >= 0")
    if n_modes > _MAX_ANALYTIC_MODES:
        raise ValueError(
            f"n_modes={n_modes} exceeds the analytic mode cap "
            f"({_MAX_ANALYTIC_MODES})")
    tip = np.array([length, 0.0, 0.0]) if tip_point is None else \
        np.asarray(tip_point, float).reshape(3)
    ei2 = ei if ei_transverse is None else float(ei_transverse)
    n_y = (n_modes + 1) // 2
    n_z = n_modes // 2
    n_roots = max(n_y, n_z)
    roots = _clamped_free_roots(n_roots) if n_roots else np.zeros(0)

    x = np.linspace(0.0, length, 4001)
    mass = rho_a * length

    def plane_modes(n_pl: int, ei_pl: float, axis: int):
        """Per-plane (freqs, lp rows, phi_c columns); axis 1 = y, 2 = z."""
        freqs, lps, phis = [], [], []
        kept = []  # (w, phi_h, dphi_h arrays) for the residual construction
        for k in range(n_pl):
            xi = roots[k]
            beta = xi / length
            w = xi * xi * math.sqrt(ei_pl / rho_a) / (length * length)
            phi, dphi, ddphi = _shape_terms(xi, beta * x)
            norm = math.sqrt(rho_a * simpson(phi * phi, x=x))
            phi_h = phi / norm
            dphi_h = dphi * beta / norm
            ddphi_h = ddphi * beta * beta / norm
            if phi_h[-1] < 0:
                phi_h, dphi_h, ddphi_h = -phi_h, -dphi_h, -ddphi_h
            kept.append((w, phi_h, dphi_h, ddphi_h))
            freqs.append(w)
            row, col = _plane_rows(rho_a, x, phi_h, phi_h[-1], dphi_h[-1], axis)
            lps.append(row)
            phis.append(col)
        if static_correction and n_pl:
            for w, arr, tip_v, tip_s in _residual_pseudo_modes(
                    length, ei_pl, rho_a, x, kept):
                freqs.append(w)
                row, col = _plane_rows(rho_a, x, arr, tip_v, tip_s, axis)
                lps.append(row)
                phis.append(col)
        return freqs, lps, phis

    fy, ly, py = plane_modes(n_y, ei, 1)
    fz, lz, pz = plane_modes(n_z, ei2, 2)
    # alternate y/z per root: a branch-stable ordering (mode k of a plane
    # always sits at the same index regardless of the section parameters),
    # which keeps parametric fits of the data smooth; the order coincides
    # with frequency order for symmetric sections
    freqs, lps, phis = [], [], []
    for k in range(max(len(fy), len(fz))):
        if k < len(fy):
            freqs.append(fy[k]); lps.append(ly[k]); phis.append(py[k])
        if k < len(fz):
            freqs.append(fz[k]); lps.append(lz[k]); phis.append(pz[k])
    freqs = np.asarray(freqs) if freqs else np.zeros(0)
    lp = np.asarray(lps).reshape(len(freqs), 6) if len(freqs) else \
        np.zeros((0, 6))
    phi_c = np.asarray(phis).T if len(freqs) else np.zeros((6, 0))

    rg = length / 200.0 if polar_gyration is None else float(polar_gyration)
    com = np.array([length / 2.0, 0.0, 0.0])
    j_p = np.diag([mass * rg * rg,
                   mass * length * length / 3.0,
                   mass * length * length / 3.0])
    mr = np.zeros((6, 6))
    mr[0:3, 0:3] = mass * np.eye(3)
    mr[0:3, 3:6] = -mass * skew(com)
    mr[3:6, 0:3] = mass * skew(com)
    mr[3:6, 3:6] = j_p
    port = FreePort("tip", phi_c, -tip)
    return ModalAppendageData(name, freqs, np.full(len(freqs), zeta), lp,
                              (port,), mr)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def modal_data_to_json(data: ModalAppendageData) -> dict:
    """Serializable dict; residual mass and kinematics are derived on load."""
    return {
        "name": data.name,
        "n_modes": data.n_modes,
        "freq_rad_s": data.freq_rad_s.tolist(),
        "damping": data.damping.tolist(),
        "Lp": data.lp.tolist(),
        "ports": [
            {"name": p.name, "PhiC": p.phi_c.tolist(),
             "CP_vector": p.cp_vector.tolist()}
            for p in data.ports
        ],
        "Mr": data.mr.tolist(),
    }


def modal_data_from_json(d: dict) -> ModalAppendageData:
    """Load and validate a modal dataset.

    Beyond the structural invariants, the mode-sign convention is
    enforced: each mode's first nonzero tip-deflection component (on the
    first port) must be positive; datasets from tools with other sign
    conventions must be pre-normalized.
    """
    n = int(d["n_modes"])
    freq = np.asarray(d["freq_rad_s"], float)
    if len(freq) != n:
        raise ValueError("n_modes does not match freq_rad_s length")
    ports = tuple(
        FreePort(p["name"], np.asarray(p["PhiC"], float),
                 np.asarray(p["CP_vector"], float))
        for p in d["ports"]
    )
    data = ModalAppendageData(d["name"], freq, np.asarray(d["damping"], float),
                              np.asarray(d["Lp"], float), ports,
                              np.asarray(d["Mr"], float))
    if data.ports and data.n_modes:
        phi_t = data.ports[0].phi_c[0:3, :]
        scale = np.max(np.abs(phi_t)) or 1.0
        for k in range(data.n_modes):
            col = phi_t[:, k]
            nz = np.nonzero(np.abs(col) > 1e-12 * scale)[0]
            if len(nz) and col[nz[0]] < 0:
                raise ValueError(
                    f"{data.name}: mode {k + 1} violates the sign convention "
                    "(first tip-deflection component must be positive)")
    return data
