"""The energy-constrained source device.

Each step it harvests, wakes if it can afford the sensing overhead, records an
observation, asks the active policy for an action, and transmits its buffered
observations when affordable. Cached network weights are only ever replaced by
a checksum-valid blob pulled once the update timer and energy gate both open;
the device itself never trains.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .energy import EnergyState, debit, harvest, tx_cost

# Update-timer thresholds in steps for 1/2/3 weight refreshes per day; the
# uneven spacing leaves the afternoon harvest surplus available for the
# later transfers.
UPDATE_PERIOD_STEPS = {1: 660, 2: 240, 3: 180}


@dataclass
class ObservationRecord:
    """One awake step's telemetry, buffered on the device and shipped to the sink."""

    step: int
    energy_j: float
    age_steps: int
    harvest_amps: float
    humidity: float
    temperature: float
    action: int = 0
    tx_attempted: bool = False
    tx_succeeded: bool = False

    def state_vector(self):
        return np.array([self.energy_j, float(self.age_steps), self.harvest_amps])


@dataclass
class DeviceStepOutcome:
    slept: bool = False
    action: int | None = None
    tx_attempted: bool = False
    tx_succeeded: bool = False
    delivered: list | None = None
    weights_installed: bool = False
    energy_short: bool = False     # could not afford to transmit this step
    record: "ObservationRecord | None" = None


@dataclass
class Device:
    """Device-side state: cached weights, energy store, AoI mirror, buffers."""

    energy_cfg: object
    net: nn.QNetwork | None = None
    sync_period: int | None = None     # steps between permitted weight installs
    sync_cost_j: float | None = None   # energy per install (default: e_ann_j)
    energy: EnergyState = None
    age_steps: int = 0
    buffer: list = field(default_factory=list)
    sync_timer: int = 0
    install_count: int = 0

    def __post_init__(self):
        if self.energy is None:
            self.energy = EnergyState.initial(self.energy_cfg)
        if self.sync_cost_j is None:
            self.sync_cost_j = self.energy_cfg.e_ann_j

    def set_update_schedule(self, updates_per_day):
        """Pick the update-timer threshold for 1, 2 or 3 installs per day."""
        try:
            self.sync_period = UPDATE_PERIOD_STEPS[updates_per_day]
        except KeyError:
            raise ValueError(f"updates_per_day must be 1, 2 or 3, got {updates_per_day}") from None

    def pending_tx_size(self):
        return min(max(len(self.buffer), 1), self.energy_cfg.max_update_observations)

    def step(self, trace, t, decide, rng_channel, rng_payload, downlink_blob=None):
        """Run one time step; returns what happened.

        `decide(state_vector, t) -> action` supplies the policy. The downlink
        blob, when present, is the sink's latest published weights.
        """
        cfg = self.energy_cfg
        harvest(self.energy, trace, t, cfg)
        self.age_steps += 1

        out = DeviceStepOutcome()
        if self.energy.stored_j <= cfg.e_m_j:
            # cannot even wake: no observation, no debit, no timer movement
            out.slept = True
            out.energy_short = True
            return out

        debit(self.energy, cfg.e_m_j)
        record = ObservationRecord(
            step=t,
            energy_j=self.energy.stored_j,
            age_steps=self.age_steps,
            harvest_amps=self.energy.harvest_amps,
            humidity=40.0 + 10.0 * rng_payload.random(),
            temperature=18.0 + 8.0 * rng_payload.random(),
        )
        self.buffer.append(record)
        if len(self.buffer) > cfg.max_update_observations:
            self.buffer.pop(0)
        out.record = record

        action = int(decide(record.state_vector(), t))
        record.action = action
        out.action = action

        cost = tx_cost(len(self.buffer), cfg)
        out.energy_short = self.energy.stored_j < cost
        if action == 1 and not out.energy_short:
            debit(self.energy, cost)
            record.tx_attempted = True
            out.tx_attempted = True
            if rng_channel.random() < cfg.success_prob:
                record.tx_succeeded = True
                out.tx_succeeded = True
                out.delivered = list(self.buffer)
                self.buffer.clear()
                # delivery is acknowledged within the slot, so the local AoI
                # mirror resets alongside the sink's
                self.age_steps = 0

        if self.net is not None and self.sync_period is not None:
            if (
                self.sync_timer >= self.sync_period
                and downlink_blob is not None
                and self.energy.stored_j >= self.sync_cost_j
            ):
                debit(self.energy, self.sync_cost_j)
                self.net = nn.deserialize(downlink_blob)
                self.sync_timer = 0
                self.install_count += 1
                out.weights_installed = True
            else:
                self.sync_timer += 1
        return out
