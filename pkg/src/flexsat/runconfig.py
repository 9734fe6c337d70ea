"""Validated run configuration shared by the service and the CLI.

A run config is a single JSON document: benchmark constants, control
requirements, the uncertainty table, design-space settings and solver
options. Unknown keys are rejected everywhere so typos fail fast, and a
config hash plus library versions make every run reproducible.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from typing import Optional

import numpy as np
import scipy
from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import __version__
from .acs import ControllerGains, Requirements
from .benchmark import (
    DESIGN_BOUNDS,
    BenchConfig,
    DesignVector,
    UNCERTAINTY_SPECS,
    default_config,
)
from .params import ParameterSpec


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RequirementsModel(StrictModel):
    ape: tuple[float, float, float] = (0.08e-3, 0.2e-3, 0.08e-3)
    rpe: tuple[float, float, float] = (0.5e-3, 0.5e-3, 0.5e-3)
    dt_rpe: float = 15.0
    t_ext: tuple[float, float, float] = (1.9e-3, 1.9e-3, 1.9e-3)
    u_max: tuple[float, float, float] = (0.215, 0.215, 0.215)
    gamma: float = 1.5
    psd_sst: float = (3.5e-5) ** 2
    psd_gyro: float = (1.4e-6) ** 2

    def build(self) -> Requirements:
        return Requirements(**self.model_dump())


class UncertaintyEntry(StrictModel):
    name: str
    nominal: float = 0.0
    lo: float
    hi: float
    kind: str = "uncertain"
    occurrences: Optional[int] = None

    def build(self) -> ParameterSpec:
        return ParameterSpec(self.name, self.nominal, self.lo, self.hi,
                             self.kind, self.occurrences)


class BenchModel(StrictModel):
    hub_mass: float = 1173.0
    hub_inertia: tuple[float, float, float] = (2415.33, 1695.25, 2929.28)
    sa_attach: float = 1.0
    yoke_length_ref: float = 1.2
    panel_e: float = 70.0e9
    panel_nu: float = 0.33
    panel_rho_skin: float = 2700.0
    panel_rho_core: float = 50.0
    panel_area: float = 15.0
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
    n_modes: int = 4
    theta_sa: float = 0.0
    reduce_tol: Optional[float] = None
    lambda_table: Optional[list[tuple[float, float]]] = None
    modal_overrides: dict[str, str] = Field(default_factory=dict)

    def build(self) -> BenchConfig:
        data = self.model_dump()
        if data["lambda_table"] is None:
            data["lambda_table"] = default_config().lambda_table
        else:
            data["lambda_table"] = tuple(tuple(p) for p in data["lambda_table"])
        return BenchConfig(**data)


class SolverModel(StrictModel):
    starts: int = 5
    budget: int = 400
    penalty: float = 1e3
    step0: float = 0.3
    step_min: float = 1e-3
    constraint_margin: float = 0.01
    rel_tol: float = 1e-6
    model_scheme: str = "reduced"


class PsoModel(StrictModel):
    n_iter: int = 20
    n_swarm: int = 20


class GainsModel(StrictModel):
    kp: tuple[float, float, float]
    kv: tuple[float, float, float]

    def build(self) -> ControllerGains:
        return ControllerGains(self.kp, self.kv)


class RunConfig(StrictModel):
    """Complete, schema-validated description of one run."""

    bench: BenchModel = Field(default_factory=BenchModel)
    requirements: RequirementsModel = Field(default_factory=RequirementsModel)
    uncertainty: Optional[list[UncertaintyEntry]] = None
    design_subset: list[str] = ["t_sp", "t_cp", "r_srs", "t_cv"]
    design_ranges: dict[str, tuple[float, float]] = Field(default_factory=dict)
    chi: dict[str, float] = Field(default_factory=dict)
    delta: dict[str, float] = Field(default_factory=dict)
    theta_sa: Optional[float] = None
    gains: Optional[GainsModel] = None
    solver: SolverModel = Field(default_factory=SolverModel)
    pso: PsoModel = Field(default_factory=PsoModel)
    mass_weight: float = 1.0
    control_weight: float = 1.0
    n_theta: int = 50
    wc_budget: int = 200
    seed: int = 0
    workers: int = 1

    @field_validator("design_subset")
    @classmethod
    def _known_design_names(cls, v):
        bad = [n for n in v if n not in DESIGN_BOUNDS]
        if bad:
            raise ValueError(f"unknown design variables {bad}; "
                             f"known: {sorted(DESIGN_BOUNDS)}")
        return v

    @field_validator("design_ranges")
    @classmethod
    def _ranges_inside_bounds(cls, v):
        for name, (lo, hi) in v.items():
            if name not in DESIGN_BOUNDS:
                raise ValueError(f"unknown design variable {name!r}")
            blo, bhi = DESIGN_BOUNDS[name]
            if not (blo <= lo < hi <= bhi):
                raise ValueError(
                    f"range for {name} must lie inside [{blo}, {bhi}]")
        return v

    @field_validator("chi")
    @classmethod
    def _chi_names(cls, v):
        bad = [n for n in v if n not in DESIGN_BOUNDS]
        if bad:
            raise ValueError(f"unknown design variables {bad}")
        return v

    def bench_config(self) -> BenchConfig:
        return self.bench.build()

    def requirements_obj(self) -> Requirements:
        return self.requirements.build()

    def design_vector(self) -> DesignVector:
        return DesignVector.nominal().with_values(self.chi)

    def uncertainty_specs(self) -> list[ParameterSpec]:
        if self.uncertainty is None:
            return list(UNCERTAINTY_SPECS)
        known = {s.name for s in UNCERTAINTY_SPECS}
        specs = []
        for e in self.uncertainty:
            if e.name not in known:
                raise ValueError(f"unknown uncertainty parameter {e.name!r}; "
                                 f"known: {sorted(known)}")
            specs.append(e.build())
        return specs

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def load_run_config(path) -> RunConfig:
    with open(path) as f:
        return RunConfig.model_validate(json.load(f))


def manifest(config: RunConfig) -> dict:
    """Reproducibility record: config hash, seed and library versions."""
    return {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "workers": config.workers,
        "versions": {
            "flexsat": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
            "platform": platform.system(),
        },
    }
