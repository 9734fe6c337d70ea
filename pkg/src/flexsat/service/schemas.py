"""Request/response models of the compute service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from ..runconfig import RunConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(StrictModel):
    status: str
    version: str


class BuildRequest(StrictModel):
    config: RunConfig


class BuildResponse(StrictModel):
    mass_kg: float
    mass_bookkeeping_kg: float
    inertia_diag: tuple[float, float, float]
    n_states: int
    n_flex_states: int
    rigid_modes: int
    theta_sa: float
    com_b: tuple[float, float, float]
    flex_freqs_rad_s: list[float]
    omega_sto: float
    launch_pass: bool


class TuneRequest(StrictModel):
    config: RunConfig


class GainsPayload(StrictModel):
    kp: tuple[float, float, float]
    kv: tuple[float, float, float]


class TuneResponse(StrictModel):
    gains: GainsPayload
    indices: dict
    feasible: bool
    objective: float
    n_evals: int
    trace: list[float]
    wall_time_s: float


class CodesignRequest(StrictModel):
    config: RunConfig


class CodesignResponse(StrictModel):
    result: dict
    wall_time_s: float


class SurrogateFitRequest(StrictModel):
    config: RunConfig


class SurrogateFitResponse(StrictModel):
    surrogates: dict
    diagnostics: dict


class ValidateRequest(StrictModel):
    config: RunConfig
    channel: str
    n_theta: Optional[int] = None


class ValidateResponse(StrictModel):
    result: dict
    wall_time_s: float


class SweepRequest(StrictModel):
    config: RunConfig
    parameter: str
    grid: list[float]
    omega_grid: Optional[list[float]] = None


class SweepResponse(StrictModel):
    result: dict


class ReportRequest(StrictModel):
    config: RunConfig
    results: list[dict] = Field(default_factory=list)


class ReportResponse(StrictModel):
    files: dict[str, str]
