"""Request/response models for the simulation service."""
from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field

PolicyName = Literal["split-drl", "unconstrained-drl", "threshold", "ideal-uniform"]
ProfileName = Literal["low", "medium", "high"]


class RunRequest(BaseModel):
    """One simulation run; unset fields fall back to the experiment defaults."""

    policy: PolicyName = "split-drl"
    profile: ProfileName = "medium"
    capacitance_farads: float = Field(4.0, gt=0)
    train_days: int = Field(10, ge=0)
    eval_days: int = Field(7, ge=0)
    seed: int = 0
    updates_per_day: Literal[1, 2, 3] = 1
    sync_period_steps: Optional[int] = None

    e_m_mj: Optional[float] = None
    e_ann_mj: Optional[float] = None
    e_tr_min_mj: Optional[float] = None
    e_tr_max_mj: Optional[float] = None
    eta: Optional[float] = None
    step_seconds: Optional[float] = None
    initial_charge_frac: Optional[float] = None
    daylight_hours: Optional[float] = None

    gamma: Optional[float] = None
    batch_size: Optional[int] = None
    memory_size: Optional[int] = None
    target_sync_period: Optional[int] = None
    eps_start: Optional[float] = None
    eps_end: Optional[float] = None
    eps_decay_steps: Optional[int] = None
    learning_rate: Optional[float] = None

    aoi_scale: Optional[float] = None
    tx_bonus_slope: Optional[float] = None
    aoi_knee: Optional[float] = None
    tx_base: Optional[float] = None
    energy_penalty: Optional[float] = None
    energy_threshold_frac: Optional[float] = None

    trace: Optional[str] = None
    lux_coeff: Optional[float] = None

    include_timeseries: bool = False


class RunSummaryModel(BaseModel):
    policy: str
    profile: str
    capacitance_farads: float
    updates_per_day: Optional[int]
    seed: int
    steps: int
    days: int
    train_days: int
    eval_days: int
    aoi_avg_minutes: float
    aoi_avg_eval_minutes: Optional[float]
    aoi_peak_minutes: Optional[float]
    daily_aoi_minutes: List[float]
    downtime_hours: float
    downtime_eval_hours: Optional[float]
    tx_attempts_per_day: float
    tx_success_per_day: float
    weight_installs_per_day: float
    updates_received: int
    final_energy_j: float


class RunResponse(BaseModel):
    summary: RunSummaryModel
    timeseries_csv: Optional[str] = None


class SweepRequest(BaseModel):
    """Cross-product sweep: policy x profile x capacitance x seed, in order."""

    policies: List[PolicyName] = ["split-drl"]
    profiles: List[ProfileName] = ["medium"]
    capacitances: List[float] = [4.0]
    seeds: List[int] = [0]
    base: RunRequest = RunRequest()


class SweepResponse(BaseModel):
    rows: List[RunSummaryModel]
    sweep_csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
