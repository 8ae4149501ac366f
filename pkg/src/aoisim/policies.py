"""Baseline update policies sharing the device/environment loop.

All policies pay the same wake and radio costs; only the decision rule and the
weight-sync machinery differ. The unconstrained DRL baseline is the split
scheme with a zero-cost, every-gate weight sync, so the two coincide exactly
when the split costs degenerate.
"""
from __future__ import annotations

import numpy as np

from .device import Device
from .energy import EnergyState

SPLIT_DRL = "split-drl"
UNCONSTRAINED_DRL = "unconstrained-drl"
THRESHOLD = "threshold"
IDEAL_UNIFORM = "ideal-uniform"
POLICY_KINDS = (SPLIT_DRL, UNCONSTRAINED_DRL, THRESHOLD, IDEAL_UNIFORM)

DRL_POLICIES = (SPLIT_DRL, UNCONSTRAINED_DRL)


def threshold_decide(energy_j, capacity_j, rng):
    """Transmit with probability proportional to the stored energy level."""
    return 1 if rng.random() < energy_j / capacity_j else 0


def uniform_schedule(n_per_day, num_steps, steps_per_day):
    """Steps at which a uniform policy transmits: n per day, evenly spaced."""
    if n_per_day <= 0:
        return set()
    sched = set()
    days = (num_steps + steps_per_day - 1) // steps_per_day
    for d in range(days):
        for k in range(n_per_day):
            step = d * steps_per_day + int((k + 0.5) * steps_per_day / n_per_day) + 1
            if step <= num_steps:
                sched.add(step)
    return sched


def simulate_schedule(schedule, trace, energy_cfg, channel_rng):
    """Dry-run a transmission schedule through the real device mechanics.

    Returns (downtime_steps, missed) where missed counts scheduled steps at
    which the device was asleep or could not afford the transmission.
    """
    dev = Device(energy_cfg=energy_cfg)
    payload_rng = np.random.default_rng(0)
    downtime = 0
    missed = 0
    for t in range(1, len(trace) + 1):
        out = dev.step(trace, t, lambda s, tt: 1 if tt in schedule else 0,
                       channel_rng, payload_rng)
        if out.energy_short:
            downtime += 1
        if t in schedule and not out.tx_attempted:
            missed += 1
    return downtime, missed


def ideal_uniform_schedule(trace, energy_cfg, channel_seed=0):
    """Oracle schedule: the largest uniform per-day transmission count that the
    whole trace can sustain with zero downtime and no missed slots.

    The oracle sees the full trace, so feasibility is checked by simulating the
    energy ledger end to end; binary search finds the largest sustainable rate.
    Returns an empty schedule when even one transmission per day is infeasible.
    """
    steps_per_day = energy_cfg.steps_per_day

    def feasible(n):
        sched = uniform_schedule(n, len(trace), steps_per_day)
        downtime, missed = simulate_schedule(
            sched, trace, energy_cfg, np.random.default_rng(channel_seed)
        )
        return downtime == 0 and missed == 0

    if not feasible(0):
        return set()
    lo, hi = 0, steps_per_day
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid - 1
    return uniform_schedule(lo, len(trace), steps_per_day)
