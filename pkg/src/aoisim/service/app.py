"""HTTP surface over the experiment harness.

Runs execute synchronously inside the request; a full default experiment takes
a few seconds, a large sweep can take minutes, so clients should use generous
timeouts.
"""
from __future__ import annotations

import dataclasses

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..energy import TraceError
from ..harness import Simulation, make_config, sweep_csv
from .schemas import (
    HealthResponse,
    RunRequest,
    RunResponse,
    RunSummaryModel,
    SweepRequest,
    SweepResponse,
)

app = FastAPI(
    title="aoisim",
    description="Energy-harvesting sensor simulator: split deep-RL status-update "
    "policies optimizing age of information.",
    version=__version__,
)

_NON_CONFIG_FIELDS = {"include_timeseries"}


def _config_from_request(req):
    overrides = req.model_dump(exclude_none=True, exclude=_NON_CONFIG_FIELDS)
    try:
        return make_config(**overrides)
    except (ValueError, TraceError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _execute(cfg, include_timeseries):
    try:
        sim = Simulation(cfg)
        summary = sim.run()
    except TraceError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return RunResponse(
        summary=RunSummaryModel(**summary.to_dict()),
        timeseries_csv=sim.timeseries_csv() if include_timeseries else None,
    )


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunResponse)
def run_simulation(req: RunRequest):
    cfg = _config_from_request(req)
    return _execute(cfg, req.include_timeseries)


@app.post("/sweep", response_model=SweepResponse)
def run_sweep(req: SweepRequest):
    base = _config_from_request(req.base)
    rows = []
    from ..harness import run as run_one

    for policy in req.policies:
        for profile in req.profiles:
            for cap in req.capacitances:
                for seed in req.seeds:
                    cfg = dataclasses.replace(
                        base, policy=policy, profile=profile,
                        capacitance_farads=cap, seed=seed, out_dir=None,
                    )
                    try:
                        cfg.validate()
                        rows.append(run_one(cfg))
                    except (ValueError, TraceError) as exc:
                        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return SweepResponse(
        rows=[RunSummaryModel(**s.to_dict()) for s in rows],
        sweep_csv=sweep_csv(rows),
    )
