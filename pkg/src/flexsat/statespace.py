"""Continuous-time state-space blocks with named ports and interconnection.

All dynamic objects in the toolkit are immutable ``StateSpace`` values:
a real (A, B, C, D) quadruple whose input and output vectors are split
into named, ordered port groups. Wiring is always done by port name;
positional wiring is deliberately not offered.

``interconnect`` closes an arbitrary block diagram (sums at input ports,
fan-out from output ports, well-posedness check on the algebraic loop)
and is the single primitive behind substructure assembly, the avionics
loop, and controller closure.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg


class PortError(ValueError):
    """Port name or width inconsistency."""


class AlgebraicLoopError(ValueError):
    """Ill-posed algebraic loop (singular I - L D) in an interconnection."""


@dataclass(frozen=True)
class PortGroup:
    """Named group of consecutive scalar channels."""

    name: str
    width: int

    def __post_init__(self):
        if not self.name:
            raise PortError("port name must be non-empty")
        if self.width < 1:
            raise PortError(f"port {self.name!r} must have width >= 1")


def _as_ports(ports: Iterable) -> tuple[PortGroup, ...]:
    out = []
    for p in ports:
        if isinstance(p, PortGroup):
            out.append(p)
        else:
            name, width = p
            out.append(PortGroup(str(name), int(width)))
    names = [p.name for p in out]
    if len(set(names)) != len(names):
        raise PortError(f"duplicate port names: {names}")
    return tuple(out)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class StateSpace:
    """Immutable continuous-time LTI block ``x' = Ax + Bu, y = Cx + Du``.

    Parameters
    ----------
    A, B, C, D : array_like
        Real system matrices. ``A`` may be 0x0 for a static block.
    inputs, outputs : iterable of (name, width) or PortGroup
        Ordered port groups. Widths must sum to the column count of B/D
        and the row count of C/D respectively.
    """

    __slots__ = ("A", "B", "C", "D", "input_ports", "output_ports")

    def __init__(self, A, B, C, D, inputs, outputs):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        D = np.atleast_2d(np.asarray(D, dtype=float))
        if A.size == 0:
            A = A.reshape(0, 0)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.size == 0:
            B = B.reshape(n, max(B.shape[1] if B.ndim == 2 else 0, D.shape[1]))
        if C.size == 0:
            C = C.reshape(D.shape[0], n)
        m = B.shape[1]
        p = C.shape[0]
        if B.shape != (n, m):
            raise ValueError(f"B must be {n}x{m}, got {B.shape}")
        if C.shape != (p, n):
            raise ValueError(f"C must be {p}x{n}, got {C.shape}")
        if D.shape != (p, m):
            raise ValueError(f"D must be {p}x{m}, got {D.shape}")
        in_ports = _as_ports(inputs)
        out_ports = _as_ports(outputs)
        if sum(g.width for g in in_ports) != m:
            raise PortError(
                f"input port widths {[(g.name, g.width) for g in in_ports]} "
                f"do not sum to {m}"
            )
        if sum(g.width for g in out_ports) != p:
            raise PortError(
                f"output port widths {[(g.name, g.width) for g in out_ports]} "
                f"do not sum to {p}"
            )
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))
        object.__setattr__(self, "C", _freeze(C))
        object.__setattr__(self, "D", _freeze(D))
        object.__setattr__(self, "input_ports", in_ports)
        object.__setattr__(self, "output_ports", out_ports)

    def __setattr__(self, name, value):
        raise AttributeError("StateSpace is immutable")

    # -- introspection -----------------------------------------------------

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def input_slice(self, name: str) -> slice:
        return _port_slice(self.input_ports, name, "input")

    def output_slice(self, name: str) -> slice:
        return _port_slice(self.output_ports, name, "output")

    def input_names(self) -> list[str]:
        return [g.name for g in self.input_ports]

    def output_names(self) -> list[str]:
        return [g.name for g in self.output_ports]

    def __repr__(self):
        ins = ", ".join(f"{g.name}({g.width})" for g in self.input_ports)
        outs = ", ".join(f"{g.name}({g.width})" for g in self.output_ports)
        return f"StateSpace(n={self.n_states}, in=[{ins}], out=[{outs}])"

    # -- simple transformations --------------------------------------------

    def subsystem(self, inputs: Sequence[str], outputs: Sequence[str]) -> "StateSpace":
        """Restrict to the named input and output port groups (shared A)."""
        isl = [self.input_slice(n) for n in inputs]
        osl = [self.output_slice(n) for n in outputs]
        icols = np.concatenate([np.arange(s.start, s.stop) for s in isl])
        orows = np.concatenate([np.arange(s.start, s.stop) for s in osl])
        return StateSpace(
            self.A,
            self.B[:, icols],
            self.C[orows, :],
            self.D[np.ix_(orows, icols)],
            [(n, s.stop - s.start) for n, s in zip(inputs, isl)],
            [(n, s.stop - s.start) for n, s in zip(outputs, osl)],
        )

    def renamed(self, inputs: Mapping[str, str] | None = None,
                outputs: Mapping[str, str] | None = None) -> "StateSpace":
        """Return a copy with selected port groups renamed."""
        inputs = inputs or {}
        outputs = outputs or {}
        return StateSpace(
            self.A, self.B, self.C, self.D,
            [(inputs.get(g.name, g.name), g.width) for g in self.input_ports],
            [(outputs.get(g.name, g.name), g.width) for g in self.output_ports],
        )


def _port_slice(groups: tuple[PortGroup, ...], name: str, kind: str) -> slice:
    at = 0
    for g in groups:
        if g.name == name:
            return slice(at, at + g.width)
        at += g.width
    known = [g.name for g in groups]
    raise PortError(f"unknown {kind} port {name!r}; known: {known}")


def static_gain(D, inputs, outputs) -> StateSpace:
    """State-free block y = D u."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return StateSpace(np.zeros((0, 0)), np.zeros((0, D.shape[1])),
                      np.zeros((D.shape[0], 0)), D, inputs, outputs)


def siso_tf(num: Sequence[float], den: Sequence[float],
            input_name: str = "u", output_name: str = "y") -> StateSpace:
    """Controllable-canonical realization of a proper SISO transfer function.

    ``num`` and ``den`` are descending-power coefficient lists with
    deg(num) <= deg(den).
    """
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    if den[0] == 0:
        raise ValueError("leading denominator coefficient must be nonzero")
    if len(num) > len(den):
        raise ValueError("transfer function must be proper")
    num = np.concatenate([np.zeros(len(den) - len(num)), num]) / den[0]
    den = den / den[0]
    n = len(den) - 1
    if n == 0:
        return static_gain([[num[0]]], [(input_name, 1)], [(output_name, 1)])
    b2 = num[0]
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -den[:0:-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    # y = (num - b2*den) acting on states + b2 * u
    rem = num[1:] - b2 * den[1:]
    C = rem[::-1].reshape(1, n)
    D = np.array([[b2]])
    return StateSpace(A, B, C, D, [(input_name, 1)], [(output_name, 1)])


def diagonal_repeat(block: StateSpace, copies: int,
                    inputs=None, outputs=None) -> StateSpace:
    """Block-diagonal replication of a block, with merged wide ports.

    A SISO block replicated 3 times becomes a 3-wide block whose single
    input/output port groups keep the original names unless overridden.
    """
    if copies < 1:
        raise ValueError("copies must be >= 1")
    A = scipy.linalg.block_diag(*[block.A] * copies) if block.n_states else np.zeros((0, 0))
    m, p = block.n_inputs, block.n_outputs
    n = block.n_states
    B = np.zeros((n * copies, m * copies))
    C = np.zeros((p * copies, n * copies))
    D = np.zeros((p * copies, m * copies))
    for k in range(copies):
        B[k * n:(k + 1) * n, k * m:(k + 1) * m] = block.B
        C[k * p:(k + 1) * p, k * n:(k + 1) * n] = block.C
        D[k * p:(k + 1) * p, k * m:(k + 1) * m] = block.D
    # interleave channel ordering so port groups stay contiguous:
    # new input k-th copy of group g lands at  g.offset*copies + k*g.width
    iperm = _repeat_perm(block.input_ports, copies)
    operm = _repeat_perm(block.output_ports, copies)
    B = B[:, iperm]
    C = C[operm, :]
    D = D[np.ix_(operm, iperm)]
    in_ports = [(g.name, g.width * copies) for g in block.input_ports]
    out_ports = [(g.name, g.width * copies) for g in block.output_ports]
    if inputs is not None:
        in_ports = [(nm, g.width * copies) for nm, g in zip(inputs, block.input_ports)]
    if outputs is not None:
        out_ports = [(nm, g.width * copies) for nm, g in zip(outputs, block.output_ports)]
    return StateSpace(A, B, C, D, in_ports, out_ports)


def _repeat_perm(groups: tuple[PortGroup, ...], copies: int) -> np.ndarray:
    """Permutation mapping grouped-by-port layout to copy-major layout."""
    total = sum(g.width for g in groups)
    perm = np.zeros(total * copies, dtype=int)
    at_new = 0
    at_old = 0
    for g in groups:
        for k in range(copies):
            src = k * total + at_old
            perm[at_new:at_new + g.width] = np.arange(src, src + g.width)
            at_new += g.width
        at_old += g.width
    return perm


# ---------------------------------------------------------------------------
# interconnection
# ---------------------------------------------------------------------------

def _addr(blocks: Mapping[str, StateSpace], address: str, kind: str):
    """Resolve 'block.port' into (block name, port slice in the stacked vector)."""
    if "." not in address:
        raise PortError(f"address {address!r} must be 'block.port'")
    bname, pname = address.split(".", 1)
    if bname not in blocks:
        raise PortError(f"unknown block {bname!r}; known: {sorted(blocks)}")
    return bname, pname


def interconnect(blocks: Mapping[str, StateSpace],
                 links: Sequence,
                 ext_in: Sequence,
                 ext_out: Sequence) -> StateSpace:
    """Close a named block diagram and expose selected external ports.

    Parameters
    ----------
    blocks : mapping name -> StateSpace
    links : sequence of (src, dst) or (src, dst, gain)
        ``src`` is an output address 'block.port', ``dst`` an input
        address. ``gain`` is a (dst_width x src_width) matrix, identity
        when omitted. Multiple links into one input port sum.
    ext_in : sequence of (name, dst) or (name, [(dst, gain), ...])
        External inputs, fanned into one or more input ports.
    ext_out : sequence of (name, src) or (name, src, gain)
        External outputs read from block output ports.

    Raises
    ------
    AlgebraicLoopError
        If the interconnection feedthrough loop is singular.
    PortError
        On unknown addresses or width mismatches.
    """
    names = list(blocks)
    sys_list = [blocks[k] for k in names]
    n_states = [s.n_states for s in sys_list]
    n_in = [s.n_inputs for s in sys_list]
    n_out = [s.n_outputs for s in sys_list]
    x_off = np.concatenate([[0], np.cumsum(n_states)])
    u_off = {k: off for k, off in zip(names, np.concatenate([[0], np.cumsum(n_in)]))}
    y_off = {k: off for k, off in zip(names, np.concatenate([[0], np.cumsum(n_out)]))}
    nx, nu, ny = int(sum(n_states)), int(sum(n_in)), int(sum(n_out))

    A = scipy.linalg.block_diag(*[s.A for s in sys_list]) if nx else np.zeros((0, 0))
    B = np.zeros((nx, nu))
    C = np.zeros((ny, nx))
    D = np.zeros((ny, nu))
    for i, s in enumerate(sys_list):
        B[x_off[i]:x_off[i + 1], u_off[names[i]]:u_off[names[i]] + n_in[i]] = s.B
        C[y_off[names[i]]:y_off[names[i]] + n_out[i], x_off[i]:x_off[i + 1]] = s.C
        D[y_off[names[i]]:y_off[names[i]] + n_out[i],
          u_off[names[i]]:u_off[names[i]] + n_in[i]] = s.D

    def in_index(address: str) -> np.ndarray:
        b, p = _addr(blocks, address, "input")
        sl = blocks[b].input_slice(p)
        return np.arange(u_off[b] + sl.start, u_off[b] + sl.stop)

    def out_index(address: str) -> np.ndarray:
        b, p = _addr(blocks, address, "output")
        sl = blocks[b].output_slice(p)
        return np.arange(y_off[b] + sl.start, y_off[b] + sl.stop)

    L = np.zeros((nu, ny))
    for link in links:
        src, dst = link[0], link[1]
        gain = link[2] if len(link) > 2 else None
        si = out_index(src)
        di = in_index(dst)
        if gain is None:
            if len(si) != len(di):
                raise PortError(f"link {src} -> {dst}: width {len(si)} vs {len(di)}")
            gain = np.eye(len(di))
        gain = np.atleast_2d(np.asarray(gain, dtype=float))
        if gain.shape != (len(di), len(si)):
            raise PortError(
                f"link {src} -> {dst}: gain shape {gain.shape}, "
                f"expected {(len(di), len(si))}"
            )
        L[np.ix_(di, si)] += gain

    ext_in_ports = []
    S_cols = []
    for entry in ext_in:
        name, dsts = entry
        if isinstance(dsts, str):
            dsts = [(dsts, None)]
        width = None
        cols = None
        for dst_entry in dsts:
            if isinstance(dst_entry, str):
                dst, gain = dst_entry, None
            else:
                dst, gain = dst_entry
            di = in_index(dst)
            if gain is None:
                gain = np.eye(len(di))
            gain = np.atleast_2d(np.asarray(gain, dtype=float))
            if gain.shape[0] != len(di):
                raise PortError(f"ext input {name!r} -> {dst}: gain rows {gain.shape[0]}"
                                f" != port width {len(di)}")
            if width is None:
                width = gain.shape[1]
                cols = np.zeros((nu, width))
            elif gain.shape[1] != width:
                raise PortError(f"ext input {name!r}: inconsistent widths")
            cols[di, :] += gain
        ext_in_ports.append((name, width))
        S_cols.append(cols)
    S = np.hstack(S_cols) if S_cols else np.zeros((nu, 0))

    ext_out_ports = []
    T_rows = []
    for entry in ext_out:
        if len(entry) == 2:
            name, src = entry
            gain = None
        else:
            name, src, gain = entry
        si = out_index(src)
        if gain is None:
            gain = np.eye(len(si))
        gain = np.atleast_2d(np.asarray(gain, dtype=float))
        if gain.shape[1] != len(si):
            raise PortError(f"ext output {name!r} <- {src}: gain cols {gain.shape[1]}"
                            f" != port width {len(si)}")
        rows = np.zeros((gain.shape[0], ny))
        rows[:, si] = gain
        ext_out_ports.append((name, gain.shape[0]))
        T_rows.append(rows)
    T = np.vstack(T_rows) if T_rows else np.zeros((0, ny))

    # close u = L y + S w
    M = np.eye(nu) - L @ D
    if nu:
        try:
            cond = np.linalg.cond(M)
        except np.linalg.LinAlgError:
            cond = np.inf
        if not np.isfinite(cond) or cond > 1e12:
            raise AlgebraicLoopError(
                "algebraic loop is ill-posed: I - L D is singular "
                f"(cond={cond:.2e})"
            )
        Minv_LC = np.linalg.solve(M, L @ C) if nx else np.zeros((nu, 0))
        Minv_S = np.linalg.solve(M, S)
    else:
        Minv_LC = np.zeros((0, nx))
        Minv_S = np.zeros((0, S.shape[1]))

    A_cl = A + B @ Minv_LC if nx else A
    B_cl = B @ Minv_S
    C_all = C + D @ Minv_LC if nx else C
    D_all = D @ Minv_S
    return StateSpace(A_cl, B_cl, T @ C_all, T @ D_all, ext_in_ports, ext_out_ports)


def series(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Cascade g2(g1(u)): single-port blocks only."""
    if len(g1.output_ports) != 1 or len(g2.input_ports) != 1:
        raise PortError("series requires single-port interfaces")
    return interconnect(
        {"g1": g1, "g2": g2},
        links=[(f"g1.{g1.output_ports[0].name}", f"g2.{g2.input_ports[0].name}")],
        ext_in=[(g1.input_ports[0].name, f"g1.{g1.input_ports[0].name}")],
        ext_out=[(g2.output_ports[0].name, f"g2.{g2.output_ports[0].name}")],
    )


# ---------------------------------------------------------------------------
# analysis helpers
# ---------------------------------------------------------------------------

def stable(g: StateSpace) -> bool:
    """True iff every eigenvalue of A has strictly negative real part."""
    if g.n_states == 0:
        return True
    return bool(np.max(np.linalg.eigvals(g.A).real) < 0.0)


def reduce_minimal(g: StateSpace, tol: float = 1e-8) -> StateSpace:
    """Drop near-unreachable/unobservable states by balanced residualization.

    Stable systems are balanced and the weakest Hankel directions are
    residualized (DC gain preserved exactly); the retained set satisfies
    2 * sum(dropped Hankel values) <= tol * max(1, largest Hankel value),
    so the frequency response moves by less than 10*tol in H-infinity.
    Unstable systems are passed through unchanged with a warning.
    """
    if g.n_states == 0:
        return g
    if not stable(g):
        warnings.warn("reduce_minimal: unstable system passed through unchanged")
        return g
    A, B, C = g.A, g.B, g.C
    Wc = scipy.linalg.solve_continuous_lyapunov(A, -B @ B.T)
    Wo = scipy.linalg.solve_continuous_lyapunov(A.T, -C.T @ C)
    Lc = _safe_cholesky(Wc)
    Lo = _safe_cholesky(Wo)
    U, hsv, Vt = np.linalg.svd(Lo.T @ Lc)
    if hsv[0] <= 0:
        # zero system
        return StateSpace(np.zeros((0, 0)), np.zeros((0, g.n_inputs)),
                          np.zeros((g.n_outputs, 0)), g.D,
                          g.input_ports, g.output_ports)
    budget = tol * max(1.0, hsv[0])
    tail = 0.0
    keep = len(hsv)
    for k in range(len(hsv) - 1, -1, -1):
        if tail + 2.0 * hsv[k] > budget:
            break
        tail += 2.0 * hsv[k]
        keep = k
    if keep == len(hsv):
        return g
    s_inv_sqrt = 1.0 / np.sqrt(hsv)
    Tmat = Lc @ Vt.T * s_inv_sqrt
    Tinv = (s_inv_sqrt[:, None] * U.T) @ Lo.T
    Ab = Tinv @ A @ Tmat
    Bb = Tinv @ B
    Cb = C @ Tmat
    r = keep
    if r == 0:
        Ar = np.zeros((0, 0))
        Br = np.zeros((0, g.n_inputs))
        Cr = np.zeros((g.n_outputs, 0))
        Dr = g.D - Cb @ np.linalg.solve(Ab, Bb)
    else:
        A11, A12 = Ab[:r, :r], Ab[:r, r:]
        A21, A22 = Ab[r:, :r], Ab[r:, r:]
        X = np.linalg.solve(A22, np.hstack([A21, Bb[r:, :]]))
        XA21, XB2 = X[:, :r], X[:, r:]
        Ar = A11 - A12 @ XA21
        Br = Bb[:r, :] - A12 @ XB2
        Cr = Cb[:, :r] - Cb[:, r:] @ XA21
        Dr = g.D - Cb[:, r:] @ XB2
    return StateSpace(Ar, Br, Cr, Dr, g.input_ports, g.output_ports)


def _safe_cholesky(W: np.ndarray) -> np.ndarray:
    W = 0.5 * (W + W.T)
    try:
        return np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(W)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)


def export_frequency_response_csv(g: StateSpace, omega: np.ndarray,
                                  path=None) -> str:
    """Write frequency-response data as CSV.

    Columns: omega, sigma_max, then per scalar channel |G| and phase in
    degrees, channels named ``<out><i>_<in><j>`` from the port groups.
    Returns the CSV text; also writes it to ``path`` when given.
    """
    from .norms import frequency_response

    resp, smax = frequency_response(g, omega)
    out_names = []
    for gout in g.output_ports:
        for i in range(gout.width):
            out_names.append(gout.name if gout.width == 1 else f"{gout.name}{i + 1}")
    in_names = []
    for gin in g.input_ports:
        for j in range(gin.width):
            in_names.append(gin.name if gin.width == 1 else f"{gin.name}{j + 1}")
    header = ["omega", "sigma_max"]
    for o in out_names:
        for i in in_names:
            header += [f"mag_{o}_{i}", f"phase_deg_{o}_{i}"]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for k, wk in enumerate(omega):
        row = [f"{wk:.12g}", f"{smax[k]:.12g}"]
        for i in range(len(out_names)):
            for j in range(len(in_names)):
                z = resp[k, i, j]
                row += [f"{abs(z):.12g}", f"{np.degrees(np.angle(z)):.12g}"]
        w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text
