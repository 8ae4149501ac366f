"""The resource-unconstrained sink: parses status updates into experiences,
scores them, trains the policy network, and publishes weight blobs.

Rewards live here because the scoring needs the rolling past-day average age,
which only the sink tracks.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import dqn, nn
from .aoi import AoIProcess


@dataclass
class RewardParams:
    """Constants of the per-step reward; defaults follow the system design."""

    wait_base: float = 1.0
    aoi_scale: float = 0.1
    tx_bonus_slope: float = 2.5
    aoi_knee: float = 40.0
    tx_base: float = 2.0
    energy_penalty: float = -1000.0
    energy_threshold_frac: float = 0.15


def reward(action, day_avg_age, energy_j, capacity_j, params=None):
    """Score one step.

    Waiting earns `wait_base` minus a fraction of the past-day average age.
    Transmitting earns a bonus that shrinks as the averaged age approaches the
    knee, plus a flat base, minus the same age fraction. Dropping at or below
    the low-energy threshold adds a large flat penalty.
    """
    p = params or RewardParams()
    if day_avg_age < 0:
        raise ValueError("day-average age cannot be negative")
    if action == 0:
        r = p.wait_base - p.aoi_scale * day_avg_age
    elif action == 1:
        r = p.tx_base - p.aoi_scale * day_avg_age
        if day_avg_age <= p.aoi_knee:
            r += p.tx_bonus_slope * (p.aoi_knee - day_avg_age)
    else:
        raise ValueError(f"action must be 0 or 1, got {action}")
    if energy_j <= p.energy_threshold_frac * capacity_j:
        r += p.energy_penalty
    return r


class Sink:
    """Sink-side state: nets, optimizer, replay memory, AoI ground truth."""

    def __init__(self, net_seed, dqn_cfg, reward_params, capacity_j, rng_train,
                 day_window_steps=720):
        self.cfg = dqn_cfg
        self.reward_params = reward_params
        self.capacity_j = capacity_j
        self.rng_train = rng_train
        self.policy = nn.init_network(net_seed)
        self.target = nn.clone(self.policy)
        self.opt = nn.AdamState(learning_rate=dqn_cfg.learning_rate)
        self.memory = dqn.ReplayMemory(dqn_cfg.memory_capacity)
        self.aoi = AoIProcess(day_window_steps=day_window_steps)
        self.train_steps = 0
        self._seen_steps = set()
        self._tail = None           # freshest record awaiting its successor
        self.published_blob = None
        self._published_version = None
        self.publish()

    def tick(self, t):
        self.aoi.tick(t)

    def publish(self):
        """Re-serialize the policy whenever its parameters have changed."""
        if self._published_version != self.policy.version:
            self.published_blob = nn.serialize(self.policy)
            self._published_version = self.policy.version

    def experience_reward(self, record):
        """Reward assigned to the experience whose state is this record."""
        return reward(
            record.action,
            self.aoi.day_mean(record.step),
            record.energy_j,
            self.capacity_j,
            self.reward_params,
        )

    def ingest_update(self, records, t):
        """Turn one received status update into replay experiences.

        Records must arrive sorted by step without duplicates. Retransmitted
        records (already seen steps) are dropped; consecutive-step pairs become
        experiences, and the freshest record is staged until its successor
        arrives in a later update. Returns the number of experiences stored.
        """
        if not records:
            return 0
        steps = [r.step for r in records]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"records must be sorted by step without duplicates: {steps}")
        if steps[-1] > t:
            raise ValueError("record from the future")
        self.aoi.receive(t, steps[-1])

        fresh = [r for r in records if r.step not in self._seen_steps]
        self._seen_steps.update(r.step for r in fresh)
        chain = ([self._tail] if self._tail is not None else []) + fresh
        stored = 0
        for prev, nxt in zip(chain, chain[1:]):
            if nxt.step != prev.step + 1:
                continue  # the device slept or evicted the gap
            self.memory.push(
                dqn.Experience(
                    s=prev.state_vector(),
                    a=prev.action,
                    r=self.experience_reward(prev),
                    s_next=nxt.state_vector(),
                )
            )
            stored += 1
        if fresh:
            self._tail = fresh[-1]
        return stored

    def train(self):
        """One batch update when enough experiences exist; syncs the target
        network every `target_sync_period` training steps."""
        loss = dqn.train_step(self.policy, self.target, self.memory, self.cfg,
                              self.opt, self.rng_train)
        if loss is not None:
            self.train_steps += 1
            if self.train_steps % self.cfg.target_sync_period == 0:
                nn.sync_target(self.policy, self.target)
        self.publish()
        return loss
