"""System norms and frequency-domain evaluation.

H-infinity norms are computed by bisection on gamma using the
purely-imaginary-eigenvalue test of the associated Hamiltonian matrix;
H2 norms come from the controllability Gramian (Bartels-Stewart Lyapunov
solve). Frequency responses are evaluated with batched linear solves.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .statespace import StateSpace, stable


class UnstableSystemError(ValueError):
    """Norm requested for a system whose norm is unbounded."""


class InfiniteNormError(ValueError):
    """H2 norm requested for a system with nonzero feedthrough."""


def frequency_response(g: StateSpace, omega) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate G(j*omega) on a grid.

    Parameters
    ----------
    g : StateSpace
    omega : array_like
        Strictly positive, sorted frequencies in rad/s. (A grid that is
        unsorted or touches zero is rejected; use ``dc_gain`` at zero.)

    Returns
    -------
    resp : ndarray, shape (n_omega, p, m)
        Complex response per grid point.
    sigma_max : ndarray, shape (n_omega,)
        Largest singular value per grid point.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size and (np.any(omega <= 0) or np.any(np.diff(omega) < 0)):
        raise ValueError("omega grid must be strictly positive and sorted")
    resp = _response_at(g, omega)
    smax = _sigma_max(resp)
    return resp, smax


def _response_at(g: StateSpace, omega: np.ndarray) -> np.ndarray:
    """G(j*omega) without grid validation (internal)."""
    n, m, p = g.n_states, g.n_inputs, g.n_outputs
    nw = len(omega)
    if n == 0 or nw == 0:
        return np.broadcast_to(g.D.astype(complex), (nw, p, m)).copy()
    resp = np.empty((nw, p, m), dtype=complex)
    chunk = max(1, int(4e6 // max(n * n, 1)))
    eye = np.eye(n)
    for k0 in range(0, nw, chunk):
        ws = omega[k0:k0 + chunk]
        Ms = 1j * ws[:, None, None] * eye - g.A
        X = np.linalg.solve(Ms, np.broadcast_to(g.B, (len(ws), n, m)).copy())
        resp[k0:k0 + chunk] = g.C @ X + g.D
    return resp


def _sigma_max(resp: np.ndarray) -> np.ndarray:
    if resp.shape[1] == 1 and resp.shape[2] == 1:
        return np.abs(resp[:, 0, 0])
    return np.linalg.svd(resp, compute_uv=False)[..., 0]


def dc_gain(g: StateSpace, omega0: float | None = None) -> np.ndarray:
    """Steady-state gain ``D - C A^-1 B``, or |G(j*omega0)| when A is singular.

    Free-floating assemblies carry rigid integrator modes, so their A is
    singular; callers must then supply a small evaluation frequency
    ``omega0`` and receive the response magnitude there.
    """
    if g.n_states == 0:
        return np.array(g.D)
    singular = False
    try:
        if 1.0 / np.linalg.cond(g.A) < 1e-12:
            singular = True
    except np.linalg.LinAlgError:
        singular = True
    if not singular and omega0 is None:
        return g.D - g.C @ np.linalg.solve(g.A, g.B)
    if omega0 is None:
        raise ValueError(
            "A is singular (rigid modes); evaluate at a low frequency by "
            "passing omega0, e.g. dc_gain(g, omega0=1e-4)"
        )
    return np.abs(_response_at(g, np.array([float(omega0)]))[0])


def h2_norm(g: StateSpace) -> float:
    """H2 norm sqrt(trace(C Wc C^T)) with A Wc + Wc A^T + B B^T = 0.

    Raises
    ------
    InfiniteNormError
        If D != 0 (the H2 norm is infinite).
    UnstableSystemError
        If A is not Hurwitz.
    """
    if np.any(g.D != 0.0):
        raise InfiniteNormError("infinite H2 norm: system has nonzero feedthrough")
    if g.n_states == 0:
        return 0.0
    if not stable(g):
        raise UnstableSystemError("H2 norm is unbounded for an unstable system")
    Wc = scipy.linalg.solve_continuous_lyapunov(g.A, -g.B @ g.B.T)
    val = float(np.trace(g.C @ Wc @ g.C.T))
    return float(np.sqrt(max(val, 0.0)))


def h2_norm_observability(g: StateSpace) -> float:
    """Dual H2 formula sqrt(trace(B^T Wo B)); independent cross-check."""
    if np.any(g.D != 0.0):
        raise InfiniteNormError("infinite H2 norm: system has nonzero feedthrough")
    if g.n_states == 0:
        return 0.0
    if not stable(g):
        raise UnstableSystemError("H2 norm is unbounded for an unstable system")
    Wo = scipy.linalg.solve_continuous_lyapunov(g.A.T, -g.C.T @ g.C)
    val = float(np.trace(g.B.T @ Wo @ g.B))
    return float(np.sqrt(max(val, 0.0)))


def _candidate_grid(g: StateSpace, n_log: int = 60) -> np.ndarray:
    """Frequencies likely to bracket the H-infinity peak."""
    cands = [0.0]
    if g.n_states:
        lam = np.linalg.eigvals(g.A)
        mags = np.abs(lam)
        mags = mags[mags > 0]
        imag = np.abs(lam.imag)
        cands.extend(imag[imag > 0].tolist())
        if mags.size:
            lo, hi = mags.min() * 1e-2, mags.max() * 1e2
            cands.extend(np.geomspace(max(lo, 1e-12), hi, n_log).tolist())
    cands = np.unique(np.asarray([c for c in cands if c >= 0.0]))
    return cands


def _sigma_peak(g: StateSpace, extra: np.ndarray | None = None) -> tuple[float, float]:
    """Lower bound on the H-infinity norm and the frequency attaining it."""
    grid = _candidate_grid(g)
    if extra is not None and len(extra):
        grid = np.unique(np.concatenate([grid, np.asarray(extra, float)]))
    vals = np.empty(len(grid))
    zero_mask = grid == 0.0
    if np.any(zero_mask):
        if g.n_states and 1.0 / max(np.linalg.cond(g.A), 1.0) > 1e-12:
            d0 = g.D - g.C @ np.linalg.solve(g.A, g.B)
            vals[zero_mask] = np.linalg.svd(d0, compute_uv=False)[0] if d0.size else 0.0
        else:
            vals[zero_mask] = float(np.linalg.svd(g.D, compute_uv=False)[0]) if g.D.size else 0.0
    pos = grid[~zero_mask]
    if len(pos):
        vals[~zero_mask] = _sigma_max(_response_at(g, pos))
    k = int(np.argmax(vals))
    best_w, best = float(grid[k]), float(vals[k])
    # local golden-ish zoom around the discrete argmax
    if best_w > 0.0:
        lo = grid[k - 1] if k > 0 and grid[k - 1] > 0 else best_w / 4.0
        hi = grid[k + 1] if k + 1 < len(grid) else best_w * 4.0
        for _ in range(3):
            ws = np.geomspace(max(lo, 1e-14), hi, 9)
            sv = _sigma_max(_response_at(g, ws))
            j = int(np.argmax(sv))
            if sv[j] > best:
                best, best_w = float(sv[j]), float(ws[j])
            lo = ws[max(j - 1, 0)]
            hi = ws[min(j + 1, len(ws) - 1)]
    return best, best_w


def _has_imaginary_eigenvalue(g: StateSpace, gamma: float) -> bool:
    """Hamiltonian test: sigma_max(G(jw)) = gamma for some finite w."""
    A, B, C, D = g.A, g.B, g.C, g.D
    m = g.n_inputs
    R = gamma * gamma * np.eye(m) - D.T @ D
    try:
        Rinv_Dt_C = np.linalg.solve(R, D.T @ C)
        Rinv_Bt = np.linalg.solve(R, B.T)
    except np.linalg.LinAlgError:
        return True
    Acl = A + B @ Rinv_Dt_C
    H = np.block([
        [Acl, B @ Rinv_Bt],
        [-C.T @ (np.eye(g.n_outputs) + D @ np.linalg.solve(R, D.T)) @ C, -Acl.T],
    ])
    lam = np.linalg.eigvals(H)
    tol = 1e-8 * (1.0 + np.abs(lam.imag))
    return bool(np.any(np.abs(lam.real) <= tol))


def hinf_norm(g: StateSpace, rel_tol: float = 1e-6) -> float:
    """H-infinity norm by bisection with the Hamiltonian eigenvalue test.

    Parameters
    ----------
    g : StateSpace
        Must be stable (A Hurwitz); a static block returns sigma_max(D).
    rel_tol : float
        Relative width of the final bisection bracket, > 0.

    Raises
    ------
    UnstableSystemError
        If A has an eigenvalue with nonnegative real part.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be > 0")
    if g.n_states == 0:
        return float(np.linalg.svd(g.D, compute_uv=False)[0]) if g.D.size else 0.0
    if not stable(g):
        raise UnstableSystemError("unbounded norm: system is not stable")
    sigma_d = float(np.linalg.svd(g.D, compute_uv=False)[0]) if g.D.size else 0.0
    glo, _ = _sigma_peak(g)
    glo = max(glo, sigma_d)
    if glo <= 0.0:
        return 0.0
    lo = max(glo, sigma_d * (1.0 + 1e-10) + 1e-300)
    hi = lo * (1.0 + max(rel_tol, 1e-6)) * 2.0
    for _ in range(60):
        if not _has_imaginary_eigenvalue(g, hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise RuntimeError("H-infinity bisection failed to bracket the norm")
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if _has_imaginary_eigenvalue(g, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hinf_norm_grid(g: StateSpace, extra_omegas=None) -> float:
    """Fast H-infinity lower-bound estimate from a refined sigma_max grid.

    Used inside optimizers where thousands of evaluations are needed;
    reported results are always recomputed with :func:`hinf_norm`.
    """
    if g.n_states == 0:
        return float(np.linalg.svd(g.D, compute_uv=False)[0]) if g.D.size else 0.0
    if not stable(g):
        return float("inf")
    extra = None if extra_omegas is None else np.asarray(extra_omegas, float)
    peak, _ = _sigma_peak(g, extra=extra)
    return peak
