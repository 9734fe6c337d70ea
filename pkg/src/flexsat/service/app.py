"""FastAPI compute service wrapping the co-design pipeline.

The service is compute-only: it never touches the filesystem (reports
are rendered into an in-memory file map), so the same process can serve
many clients and the CLI stays responsible for persisting artifacts.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..acs import initial_gains
from ..benchmark import (
    build_plant,
    launch_frequency,
    launch_passes,
    rigid_inertia,
    total_mass,
)
from ..codesign import (
    CodesignOptions,
    build_model_set,
    distributed_codesign,
    fit_benchmark_surrogates,
    monolithic_codesign,
)
from ..params import surrogate_to_json
from ..runconfig import RunConfig
from ..synthesis import TuneOptions, tune
from ..wcvalidate import (
    CHANNELS,
    WorstCaseOptions,
    WorstCaseResult,
    benchmark_channel_gain,
    sigma_sweep,
    validation_report,
    worst_case_gain,
)
from . import schemas as sc


def _tune_options(config: RunConfig) -> TuneOptions:
    s = config.solver
    return TuneOptions(starts=s.starts, budget=s.budget, penalty=s.penalty,
                       seed=config.seed, step0=s.step0, step_min=s.step_min,
                       constraint_margin=s.constraint_margin,
                       rel_tol=s.rel_tol)


def _codesign_options(config: RunConfig) -> CodesignOptions:
    return CodesignOptions(
        n_iter=config.pso.n_iter, n_swarm=config.pso.n_swarm,
        seed=config.seed, workers=config.workers,
        model_scheme=config.solver.model_scheme,
        design_subset=tuple(config.design_subset),
        design_ranges=tuple((n, lo, hi)
                            for n, (lo, hi) in config.design_ranges.items()),
        uncertainty=tuple(config.uncertainty_specs()
                          if config.uncertainty is not None else ()),
        tune=_tune_options(config),
        mass_weight=config.mass_weight,
        control_weight=config.control_weight,
    )


def _gains_for(config: RunConfig, cfg, chi, req):
    if config.gains is not None:
        return config.gains.build()
    plant = build_plant(cfg, chi)
    return initial_gains(np.diag(rigid_inertia(plant)), req)


def create_app() -> FastAPI:
    app = FastAPI(title="flexsat", version=__version__)

    @app.exception_handler(ValueError)
    async def _value_error(request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _key_error(request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/v1/health", response_model=sc.HealthResponse)
    def health():
        return sc.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/build", response_model=sc.BuildResponse)
    def build(req_body: sc.BuildRequest):
        config = req_body.config
        cfg = config.bench_config()
        chi = config.design_vector()
        plant = build_plant(cfg, chi, delta=config.delta,
                            theta_sa=config.theta_sa)
        lam = np.linalg.eigvals(plant.ss.A)
        wf = np.sort(np.abs(lam.imag))
        wf = wf[wf > 1e-6][::2]
        w_sto = launch_frequency(chi, cfg)
        return sc.BuildResponse(
            mass_kg=total_mass(plant),
            mass_bookkeeping_kg=plant.mass_total,
            inertia_diag=tuple(np.diag(rigid_inertia(plant))),
            n_states=plant.ss.n_states,
            n_flex_states=plant.n_flex_states,
            rigid_modes=int(np.sum(np.abs(lam) < 1e-9)),
            theta_sa=plant.theta_sa,
            com_b=tuple(plant.com_b),
            flex_freqs_rad_s=[float(v) for v in wf[:12]],
            omega_sto=float(w_sto),
            launch_pass=launch_passes(w_sto),
        )

    @app.post("/v1/tune", response_model=sc.TuneResponse)
    def tune_endpoint(req_body: sc.TuneRequest):
        config = req_body.config
        cfg = config.bench_config()
        req = config.requirements_obj()
        chi = config.design_vector()
        unc = (tuple(config.uncertainty_specs())
               if config.uncertainty is not None else None)
        models = build_model_set(cfg, chi, req, config.solver.model_scheme,
                                 specs=unc)
        g0 = _gains_for(config, cfg, chi, req)
        res = tune(models, g0, _tune_options(config))
        d = res.as_dict()
        return sc.TuneResponse(
            gains=sc.GainsPayload(**d["gains"]),
            indices=d["indices"], feasible=d["feasible"],
            objective=d["objective"], n_evals=d["n_evals"],
            trace=d["trace"], wall_time_s=res.wall_time_s,
        )

    @app.post("/v1/codesign/distributed", response_model=sc.CodesignResponse)
    def codesign_distributed(req_body: sc.CodesignRequest):
        config = req_body.config
        res = distributed_codesign(config.bench_config(),
                                   config.requirements_obj(),
                                   _codesign_options(config))
        return sc.CodesignResponse(result=res.as_dict(),
                                   wall_time_s=res.wall_time_s)

    @app.post("/v1/codesign/monolithic", response_model=sc.CodesignResponse)
    def codesign_monolithic(req_body: sc.CodesignRequest):
        config = req_body.config
        cfg = config.bench_config()
        res = monolithic_codesign(cfg, config.requirements_obj(),
                                  surrogates=None,
                                  options=_codesign_options(config))
        return sc.CodesignResponse(result=res.as_dict(),
                                   wall_time_s=res.wall_time_s)

    @app.post("/v1/surrogate/fit", response_model=sc.SurrogateFitResponse)
    def surrogate_fit(req_body: sc.SurrogateFitRequest):
        config = req_body.config
        cfg = config.bench_config()
        surs = fit_benchmark_surrogates(cfg, tuple(config.design_subset),
                                        seed=config.seed)
        return sc.SurrogateFitResponse(
            surrogates={b: surrogate_to_json(s) for b, s in surs.items()},
            diagnostics={b: s.diagnostics for b, s in surs.items()},
        )

    @app.post("/v1/validate", response_model=sc.ValidateResponse)
    def validate(req_body: sc.ValidateRequest):
        config = req_body.config
        if req_body.channel not in CHANNELS:
            raise HTTPException(
                status_code=422,
                detail=f"unknown channel {req_body.channel!r}; "
                       f"use one of {sorted(CHANNELS)}")
        cfg = config.bench_config()
        req = config.requirements_obj()
        chi = config.design_vector()
        gains = _gains_for(config, cfg, chi, req)
        gain_fn = benchmark_channel_gain(cfg, chi, req, gains,
                                         req_body.channel)
        res = worst_case_gain(
            gain_fn, config.uncertainty_specs(), req_body.channel,
            n_theta=req_body.n_theta or config.n_theta,
            options=WorstCaseOptions(budget=config.wc_budget,
                                     workers=config.workers))
        return sc.ValidateResponse(result=res.as_dict(),
                                   wall_time_s=res.wall_time_s)

    @app.post("/v1/sweep", response_model=sc.SweepResponse)
    def sweep(req_body: sc.SweepRequest):
        config = req_body.config
        cfg = config.bench_config()
        chi = config.design_vector()
        try:
            res = sigma_sweep(cfg, chi, req_body.parameter, req_body.grid,
                              omega_grid=req_body.omega_grid)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return sc.SweepResponse(result=res.as_dict())

    @app.post("/v1/report", response_model=sc.ReportResponse)
    def report(req_body: sc.ReportRequest):
        results = []
        for d in req_body.results:
            results.append(WorstCaseResult(
                channel=d["channel"], worst_gain=d["worst_gain"],
                worst_delta=d["worst_delta"], worst_theta=d["worst_theta"],
                per_theta=[tuple(p) for p in d["per_theta"]],
                nominal_gain=d["nominal_gain"], n_evals=d["n_evals"],
                wall_time_s=0.0))
        with tempfile.TemporaryDirectory() as tmp:
            paths = validation_report(results, tmp)
            files = {Path(p).name: Path(p).read_text()
                     for p in paths.values()}
        return sc.ReportResponse(files=files)

    return app


app = create_app()
