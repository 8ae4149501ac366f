"""Capacitor energy dynamics, harvest-current traces, and the radio cost model.

All amounts are joules internally. Config surfaces use millijoules where noted,
matching the experiment config file keys.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROFILE_DAILY_JOULES = {"low": 6.0, "medium": 14.0, "high": 20.0}

SECONDS_PER_DAY = 86_400.0


class TraceError(ValueError):
    """Raised for unreadable or malformed harvest trace files."""


@dataclass
class EnergyConfig:
    capacitance_farads: float = 4.0
    supply_volts: float = 3.0
    e_m_j: float = 1.5e-3          # per-step wake/sense overhead
    e_ann_j: float = 0.9           # receiving one full weight transfer
    e_tr_min_j: float = 35e-3      # transmitting 1 observation
    e_tr_max_j: float = 100e-3     # transmitting a full buffer of M observations
    step_seconds: float = 120.0
    success_prob: float = 0.9
    initial_charge_frac: float = 0.5
    max_update_observations: int = 4

    @property
    def capacity_j(self):
        """Joule capacity of the storage capacitor: 1/2 * C * U^2."""
        return 0.5 * self.capacitance_farads * self.supply_volts**2

    @property
    def steps_per_day(self):
        return int(round(SECONDS_PER_DAY / self.step_seconds))

    def validate(self):
        positives = {
            "capacitance_farads": self.capacitance_farads,
            "supply_volts": self.supply_volts,
            "e_m_j": self.e_m_j,
            "e_tr_min_j": self.e_tr_min_j,
            "e_tr_max_j": self.e_tr_max_j,
            "step_seconds": self.step_seconds,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.e_ann_j < 0:
            raise ValueError("e_ann_j must be non-negative")
        if self.e_tr_min_j > self.e_tr_max_j:
            raise ValueError("e_tr_min_j cannot exceed e_tr_max_j")
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError("success_prob must be in [0, 1]")
        if not 0.0 <= self.initial_charge_frac <= 1.0:
            raise ValueError("initial_charge_frac must be in [0, 1]")
        return self


@dataclass
class EnergyState:
    """Stored charge plus an exact in/out ledger for conservation checks."""

    stored_j: float
    harvest_amps: float = 0.0
    total_in_j: float = 0.0
    total_out_j: float = 0.0

    @classmethod
    def initial(cls, cfg):
        return cls(stored_j=cfg.initial_charge_frac * cfg.capacity_j)


@dataclass
class HarvestTrace:
    """One harvest-current sample per simulation step."""

    currents: np.ndarray
    step_seconds: float
    profile: str | None = None

    def __len__(self):
        return len(self.currents)

    def current(self, t):
        """Harvest current at 1-based step t."""
        if not 1 <= t <= len(self.currents):
            raise IndexError(f"step {t} outside trace of length {len(self.currents)}")
        return float(self.currents[t - 1])

    def daily_joules(self, supply_volts=3.0):
        """Harvested energy per whole day of the trace."""
        per_day = int(round(SECONDS_PER_DAY / self.step_seconds))
        days = len(self.currents) // per_day
        return [
            float(np.sum(self.currents[d * per_day : (d + 1) * per_day]) * supply_volts * self.step_seconds)
            for d in range(days)
        ]


def harvest(state, trace, t, cfg):
    """Add one step of harvested energy, clamped at the capacitor capacity."""
    amps = trace.current(t)
    state.harvest_amps = amps
    gain = cfg.supply_volts * amps * cfg.step_seconds
    stored = min(cfg.capacity_j, state.stored_j + gain)
    state.total_in_j += stored - state.stored_j
    state.stored_j = stored
    return state


def debit(state, amount):
    """Spend energy if available. Returns True on success, False when the
    charge is insufficient (a modeled outcome, not a fault)."""
    if amount < 0:
        raise ValueError("debit amount must be non-negative")
    if state.stored_j < amount:
        return False
    state.stored_j -= amount
    state.total_out_j += amount
    return True


def conservation_residual(state, initial_j):
    """|E - (E0 + in - out)|; exact bookkeeping keeps this at rounding level."""
    return abs(state.stored_j - (initial_j + state.total_in_j - state.total_out_j))


def tx_cost(m, cfg):
    """Energy to transmit a status update carrying m observations.

    Linear interpolation between the single-observation and full-buffer costs.
    """
    top = cfg.max_update_observations
    if not 1 <= m <= top:
        raise ValueError(f"update size {m} outside 1..{top}")
    if top == 1:
        return cfg.e_tr_min_j
    frac = (m - 1) / (top - 1)
    return cfg.e_tr_min_j + frac * (cfg.e_tr_max_j - cfg.e_tr_min_j)


def synth_trace(profile, days, seed, cfg=None, daylight_hours=12.0):
    """Seeded synthetic solar trace: half-sine daylight shape with multiplicative
    noise, rescaled so each day's harvested energy hits the profile target."""
    if profile not in PROFILE_DAILY_JOULES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {sorted(PROFILE_DAILY_JOULES)}")
    if days < 1:
        raise ValueError("days must be >= 1")
    cfg = cfg or EnergyConfig()
    target = PROFILE_DAILY_JOULES[profile]
    per_day = cfg.steps_per_day
    daylight_steps = int(round(daylight_hours * 3600.0 / cfg.step_seconds))
    sunrise = (per_day - daylight_steps) // 2

    rng = np.random.default_rng(seed)
    shape = np.zeros(per_day)
    k = np.arange(daylight_steps)
    shape[sunrise : sunrise + daylight_steps] = np.sin(math.pi * (k + 0.5) / daylight_steps)

    currents = np.zeros(days * per_day)
    for d in range(days):
        noisy = shape * (1.0 + rng.uniform(-0.1, 0.1, per_day))
        energy = float(np.sum(noisy) * cfg.supply_volts * cfg.step_seconds)
        currents[d * per_day : (d + 1) * per_day] = noisy * (target / energy)
    return HarvestTrace(currents=currents, step_seconds=cfg.step_seconds, profile=profile)


def load_trace(path, cfg=None, lux_coeff=None):
    """Read a harvest trace CSV.

    Accepts either `step,current_amps` rows or `timestamp,lux` rows; the latter
    needs `lux_coeff` (amperes per lux) for the linear conversion.
    """
    cfg = cfg or EnergyConfig()
    path = Path(path)
    if not path.exists():
        raise TraceError(f"trace file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"trace file is empty: {path}") from None
        header = [h.strip().lower() for h in header]
        if header == ["step", "current_amps"]:
            to_amps = None
        elif header == ["timestamp", "lux"]:
            if lux_coeff is None:
                raise TraceError("lux trace requires a lux-to-amperes coefficient")
            to_amps = float(lux_coeff)
        else:
            raise TraceError(f"unrecognized trace header {header!r}")
        currents = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise TraceError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                value = float(row[1])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: non-numeric value {row[1]!r}") from None
            amps = value * to_amps if to_amps is not None else value
            if amps < 0:
                raise TraceError(f"{path}:{lineno}: negative harvest current {amps}")
            currents.append(amps)
    if not currents:
        raise TraceError(f"trace file has no data rows: {path}")
    return HarvestTrace(currents=np.array(currents), step_seconds=cfg.step_seconds, profile="file")
