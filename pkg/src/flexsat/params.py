"""Uncertain/design parameter declarations, sampling, and surrogates.

Parameters are named scalars with a nominal value and a physical range,
tagged either ``uncertain`` (plant variability the controller must
survive) or ``design`` (variables an optimizer owns). Multi-model sets
are produced by sampling assignments; solar-array rotation is handled by
an exact quarter-angle parameterization; and matrix-valued model data
can be fitted with multivariate polynomial surrogates over a normalized
box.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

_VERTEX_DIM_GUARD = 12


@dataclass(frozen=True)
class ParameterSpec:
    """Named scalar with nominal value, range and role."""

    name: str
    nominal: float
    lo: float
    hi: float
    kind: str = "uncertain"          # "uncertain" | "design"
    occurrences: int | None = None   # informational repetition count

    def __post_init__(self):
        if self.kind not in ("uncertain", "design"):
            raise ValueError(f"{self.name}: kind must be uncertain or design")
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: lo must be < hi")
        if not self.lo <= self.nominal <= self.hi:
            raise ValueError(f"{self.name}: nominal outside [lo, hi]")

    def clip(self, value: float) -> float:
        return float(min(max(value, self.lo), self.hi))


def validate_assignment(specs: Sequence[ParameterSpec],
                        assignment: Mapping[str, float]) -> dict:
    """Check names and ranges; returns a plain dict copy."""
    by_name = {s.name: s for s in specs}
    out = {}
    for name, value in assignment.items():
        if name not in by_name:
            raise KeyError(f"unknown parameter {name!r}; known: {sorted(by_name)}")
        s = by_name[name]
        if not s.lo <= value <= s.hi:
            raise ValueError(
                f"{name}={value} outside [{s.lo}, {s.hi}]")
        out[name] = float(value)
    return out


def nominal_assignment(specs: Sequence[ParameterSpec]) -> dict:
    return {s.name: s.nominal for s in specs}


def sample_assignments(specs: Sequence[ParameterSpec], scheme: str,
                       count: int | None = None, seed: int | None = None,
                       grid_counts: Mapping[str, int] | None = None,
                       ) -> list[dict]:
    """Deterministic assignment sampling.

    scheme = "vertices": all 2^d range corners (d capped at 12);
    "random": ``count`` uniform samples from a seeded generator;
    "grid": cartesian product of per-parameter linear spans given by
    ``grid_counts``.
    """
    names = [s.name for s in specs]
    if scheme == "vertices":
        if len(specs) > _VERTEX_DIM_GUARD:
            raise ValueError(
                f"vertices scheme limited to {_VERTEX_DIM_GUARD} parameters, "
                f"got {len(specs)}")
        corners = itertools.product(*[(s.lo, s.hi) for s in specs])
        return [dict(zip(names, c)) for c in corners]
    if scheme == "random":
        if count is None or count < 1:
            raise ValueError("random scheme requires count >= 1")
        rng = np.random.default_rng(seed)
        lo = np.array([s.lo for s in specs])
        hi = np.array([s.hi for s in specs])
        pts = lo + rng.random((count, len(specs))) * (hi - lo)
        return [dict(zip(names, p)) for p in pts]
    if scheme == "grid":
        if not grid_counts:
            raise ValueError("grid scheme requires per-parameter point counts")
        axes = []
        for s in specs:
            n = int(grid_counts.get(s.name, 2))
            if n < 2:
                raise ValueError(f"grid count for {s.name} must be >= 2")
            axes.append(np.linspace(s.lo, s.hi, n))
        return [dict(zip(names, c)) for c in itertools.product(*axes)]
    raise ValueError(f"unknown sampling scheme {scheme!r}")


# ---------------------------------------------------------------------------
# solar-array rotation
# ---------------------------------------------------------------------------

_AXES = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]),
         "z": np.array([0, 0, 1.0])}


def sadm_dcm(theta: float, axis="y") -> np.ndarray:
    """Exact rotation by theta about the drive axis (Rodrigues form)."""
    a = _AXES[axis] if isinstance(axis, str) else np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def sigma4_to_angle(sigma4: float) -> float:
    """Quarter-angle parameter to rotation angle: theta = 4 atan(sigma4)."""
    return 4.0 * float(np.arctan(sigma4))


def sigma4_grid(n_points: int) -> np.ndarray:
    """Angles for n equispaced quarter-angle values in [0, 1].

    The [0, 1] half-range is enough because the assembly response is
    symmetric in the rotation angle (mirror arrays).
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    sig = np.linspace(0.0, 1.0, n_points)
    return 4.0 * np.arctan(sig)


# ---------------------------------------------------------------------------
# polynomial surrogates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Surrogate:
    """Per-entry multivariate polynomial fit of named matrices.

    Inputs are normalized to [-1, 1] over the fit box; evaluation outside
    the box raises. Targets whose name starts with ``freq`` are sorted on
    evaluation (a reorder warns about mode crossing inside the box).
    """

    param_names: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray
    degree: int
    exponents: np.ndarray            # (n_basis, d)
    coeffs: dict = field(default_factory=dict)   # name -> (n_basis, *shape)
    shapes: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def _basis_exponents(d: int, degree: int) -> np.ndarray:
    exps = [e for e in itertools.product(range(degree + 1), repeat=d)
            if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), e))
    return np.asarray(exps, dtype=int)


def _design_matrix(z: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    # z: (n, d) normalized samples
    return np.prod(z[:, None, :] ** exponents[None, :, :], axis=2)


def fit_surrogate(specs: Sequence[ParameterSpec],
                  samples: Sequence[tuple[Mapping[str, float], Mapping[str, np.ndarray]]],
                  degree: int = 3,
                  holdout: Sequence[tuple[Mapping[str, float], Mapping[str, np.ndarray]]] = (),
                  ) -> Surrogate:
    """Least-squares polynomial fit of matrix data over the parameter box.

    ``samples`` pairs an assignment with named matrices of fixed shapes.
    Diagnostics report the in-sample and (when ``holdout`` is given)
    held-out maximum relative errors per target.
    """
    names = tuple(s.name for s in specs)
    lo = np.array([s.lo for s in specs])
    hi = np.array([s.hi for s in specs])
    exps = _basis_exponents(len(specs), degree)
    if len(samples) < len(exps):
        raise ValueError(
            f"need at least {len(exps)} samples for degree {degree} in "
            f"{len(specs)} parameters, got {len(samples)}")

    def normalize(assignments):
        pts = np.array([[a[n] for n in names] for a in assignments], dtype=float)
        return 2.0 * (pts - lo) / (hi - lo) - 1.0

    z = normalize([a for a, _ in samples])
    phi = _design_matrix(z, exps)
    rank = np.linalg.matrix_rank(phi)
    if rank < len(exps):
        raise ValueError(
            f"rank-deficient polynomial basis (rank {rank} < {len(exps)}); "
            "lower the degree or add samples")

    target_names = list(samples[0][1])
    shapes = {}
    coeffs = {}
    diag = {"in_sample_max_rel_err": {}, "held_out_max_rel_err": {}}
    for t in target_names:
        mats = [np.asarray(m[t], dtype=float) for _, m in samples]
        shapes[t] = mats[0].shape
        for m in mats:
            if m.shape != shapes[t]:
                raise ValueError(f"target {t!r}: inconsistent shapes")
        Y = np.stack([m.ravel() for m in mats])
        ck, *_ = np.linalg.lstsq(phi, Y, rcond=None)
        coeffs[t] = ck.reshape((len(exps),) + shapes[t])
        pred = phi @ ck
        diag["in_sample_max_rel_err"][t] = _max_rel_err(pred, Y)
    if holdout:
        zh = normalize([a for a, _ in holdout])
        phih = _design_matrix(zh, exps)
        for t in target_names:
            Yh = np.stack([np.asarray(m[t], float).ravel() for _, m in holdout])
            pred = phih @ coeffs[t].reshape(len(exps), -1)
            diag["held_out_max_rel_err"][t] = _max_rel_err(pred, Yh)
    return Surrogate(names, lo, hi, degree, exps, coeffs, shapes, diag)


def _max_rel_err(pred: np.ndarray, truth: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(truth))), 1e-300)
    denom = np.maximum(np.abs(truth), 1e-9 * scale)
    return float(np.max(np.abs(pred - truth) / denom))


def eval_surrogate(s: Surrogate, assignment: Mapping[str, float],
                   box_tol: float = 1e-9, sort_freq: bool = True) -> dict:
    """Evaluate all fitted targets at one assignment (inside the box).

    Frequency-vector targets (name starting with ``freq``) are sorted,
    with a warning when the fitted branches crossed inside the box; pass
    ``sort_freq=False`` to keep the raw branch ordering (needed when the
    frequencies must stay aligned with jointly fitted mode-shape data).
    """
    pt = np.array([assignment[n] for n in s.param_names], dtype=float)
    z = 2.0 * (pt - s.lo) / (s.hi - s.lo) - 1.0
    if np.any(np.abs(z) > 1.0 + box_tol):
        bad = [n for n, v in zip(s.param_names, z) if abs(v) > 1.0 + box_tol]
        raise ValueError(f"assignment outside the surrogate box for {bad}")
    phi = _design_matrix(z.reshape(1, -1), s.exponents)[0]
    out = {}
    for t, ck in s.coeffs.items():
        val = np.tensordot(phi, ck, axes=(0, 0))
        if sort_freq and t.startswith("freq") and val.ndim == 1:
            sorted_val = np.sort(val)
            if not np.array_equal(sorted_val, val):
                warnings.warn(
                    f"surrogate target {t!r} reordered after evaluation "
                    "(mode crossing inside the box)")
            val = sorted_val
        out[t] = val
    return out


def surrogate_to_json(s: Surrogate) -> dict:
    return {
        "param_names": list(s.param_names),
        "lo": s.lo.tolist(),
        "hi": s.hi.tolist(),
        "degree": s.degree,
        "exponents": s.exponents.tolist(),
        "coeffs": {t: c.tolist() for t, c in s.coeffs.items()},
        "shapes": {t: list(sh) for t, sh in s.shapes.items()},
        "diagnostics": s.diagnostics,
    }


def surrogate_from_json(d: dict) -> Surrogate:
    return Surrogate(
        tuple(d["param_names"]),
        np.asarray(d["lo"], float),
        np.asarray(d["hi"], float),
        int(d["degree"]),
        np.asarray(d["exponents"], int),
        {t: np.asarray(c, float) for t, c in d["coeffs"].items()},
        {t: tuple(sh) for t, sh in d["shapes"].items()},
        d.get("diagnostics", {}),
    )


def save_surrogate(s: Surrogate, path) -> None:
    with open(path, "w") as f:
        json.dump(surrogate_to_json(s), f)


def load_surrogate(path) -> Surrogate:
    with open(path) as f:
        return surrogate_from_json(json.load(f))
