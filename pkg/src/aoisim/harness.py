"""Experiment driver: seeded runs, parameter sweeps, CSV/JSON artifacts.

A run wires the device and sink into one lock-step loop over a harvest trace:
a training phase with the exploration schedule, then an evaluation phase with
exploration frozen at its floor and the sink no longer training. Everything is
a pure function of the config, so identical configs produce byte-identical
artifacts.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dqn, nn, policies
from .aoi import AoIProcess
from .device import Device
from .dqn import DqnConfig, epsilon_at, select_action
from .energy import (
    EnergyConfig,
    conservation_residual,
    load_trace,
    synth_trace,
)
from .sink import RewardParams, Sink, reward

# Stream labels for per-role random generators, combined with the run seed.
_RNG_ACTION, _RNG_CHANNEL, _RNG_PAYLOAD, _RNG_TRAIN, _RNG_TRACE = range(1, 6)

TIMESERIES_HEADER = "step,E,I_EH,delta,action,tx_success,reward,loss,weight_install"


@dataclass
class RunConfig:
    """Flat experiment configuration; keys double as the config-file surface.

    Energy amounts are in millijoules here (matching the file format) and are
    converted to joules internally.
    """

    policy: str = policies.SPLIT_DRL
    profile: str = "medium"
    capacitance_farads: float = 4.0
    train_days: int = 10
    eval_days: int = 7
    seed: int = 0
    updates_per_day: int = 1
    sync_period_steps: int | None = None   # overrides updates_per_day when set

    e_m_mj: float = 1.5
    e_ann_mj: float = 900.0
    e_tr_min_mj: float = 35.0
    e_tr_max_mj: float = 100.0
    eta: float = 0.9
    step_seconds: float = 120.0
    initial_charge_frac: float = 0.5
    buffer_len: int = 4
    daylight_hours: float = 12.0

    gamma: float = 0.99
    batch_size: int = 64
    memory_size: int = 100_000
    target_sync_period: int = 100
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 1440
    learning_rate: float = 1e-3

    aoi_scale: float = 0.1
    tx_bonus_slope: float = 2.5
    aoi_knee: float = 40.0
    tx_base: float = 2.0
    energy_penalty: float = -1000.0
    energy_threshold_frac: float = 0.15

    trace: str | None = None
    lux_coeff: float | None = None
    out_dir: str | None = None
    write_timeseries: bool = True

    def validate(self):
        if self.policy not in policies.POLICY_KINDS:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {policies.POLICY_KINDS}")
        if self.trace is None and self.profile not in ("low", "medium", "high"):
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.train_days < 0 or self.eval_days < 0 or self.train_days + self.eval_days < 1:
            raise ValueError("need at least one simulated day")
        if self.updates_per_day not in (1, 2, 3):
            raise ValueError("updates_per_day must be 1, 2 or 3")
        self.energy_config()
        self.dqn_config()
        return self

    def energy_config(self):
        return EnergyConfig(
            capacitance_farads=self.capacitance_farads,
            e_m_j=self.e_m_mj * 1e-3,
            e_ann_j=self.e_ann_mj * 1e-3,
            e_tr_min_j=self.e_tr_min_mj * 1e-3,
            e_tr_max_j=self.e_tr_max_mj * 1e-3,
            step_seconds=self.step_seconds,
            success_prob=self.eta,
            initial_charge_frac=self.initial_charge_frac,
            max_update_observations=self.buffer_len,
        ).validate()

    def dqn_config(self):
        return DqnConfig(
            batch_size=self.batch_size,
            discount=self.gamma,
            target_sync_period=self.target_sync_period,
            eps_start=self.eps_start,
            eps_end=self.eps_end,
            eps_decay_steps=self.eps_decay_steps,
            learning_rate=self.learning_rate,
            memory_capacity=self.memory_size,
        ).validate()

    def reward_config(self):
        return RewardParams(
            aoi_scale=self.aoi_scale,
            tx_bonus_slope=self.tx_bonus_slope,
            aoi_knee=self.aoi_knee,
            tx_base=self.tx_base,
            energy_penalty=self.energy_penalty,
            energy_threshold_frac=self.energy_threshold_frac,
        )


@dataclass
class RunSummary:
    policy: str
    profile: str
    capacitance_farads: float
    updates_per_day: int | None
    seed: int
    steps: int
    days: int
    train_days: int
    eval_days: int
    aoi_avg_minutes: float
    aoi_avg_eval_minutes: float | None
    aoi_peak_minutes: float | None
    daily_aoi_minutes: list
    downtime_hours: float
    downtime_eval_hours: float | None
    tx_attempts_per_day: float
    tx_success_per_day: float
    weight_installs_per_day: float
    updates_received: int
    final_energy_j: float

    def to_dict(self):
        return dataclasses.asdict(self)


class Simulation:
    """One seeded run of a policy over a harvest trace."""

    def __init__(self, cfg):
        cfg.validate()
        self.cfg = cfg
        self.energy_cfg = cfg.energy_config()
        self.dqn_cfg = cfg.dqn_config()
        self.steps_per_day = self.energy_cfg.steps_per_day

        if cfg.trace is not None:
            self.trace = load_trace(cfg.trace, self.energy_cfg, cfg.lux_coeff)
        else:
            self.trace = synth_trace(
                cfg.profile,
                days=cfg.train_days + cfg.eval_days,
                seed=[cfg.seed, _RNG_TRACE],
                cfg=self.energy_cfg,
                daylight_hours=cfg.daylight_hours,
            )
        self.total_steps = len(self.trace)
        self.train_steps = min(cfg.train_days * self.steps_per_day, self.total_steps)

        self.rng_action = np.random.default_rng([cfg.seed, _RNG_ACTION])
        self.rng_channel = np.random.default_rng([cfg.seed, _RNG_CHANNEL])
        self.rng_payload = np.random.default_rng([cfg.seed, _RNG_PAYLOAD])

        is_drl = cfg.policy in policies.DRL_POLICIES
        self.sink = None
        self.schedule = None
        if is_drl:
            self.sink = Sink(
                net_seed=cfg.seed,
                dqn_cfg=self.dqn_cfg,
                reward_params=cfg.reward_config(),
                capacity_j=self.energy_cfg.capacity_j,
                rng_train=np.random.default_rng([cfg.seed, _RNG_TRAIN]),
                day_window_steps=self.steps_per_day,
            )
            self.aoi = self.sink.aoi
        else:
            self.aoi = AoIProcess(day_window_steps=self.steps_per_day)
        self.reward_params = cfg.reward_config()

        device_net = nn.init_network(cfg.seed) if is_drl else None
        if cfg.policy == policies.UNCONSTRAINED_DRL:
            sync_period, sync_cost = 1, 0.0
        elif cfg.policy == policies.SPLIT_DRL:
            sync_period = cfg.sync_period_steps
            if sync_period is None:
                from .device import UPDATE_PERIOD_STEPS

                sync_period = UPDATE_PERIOD_STEPS[cfg.updates_per_day]
            sync_cost = self.energy_cfg.e_ann_j
        else:
            sync_period, sync_cost = None, 0.0
        self.device = Device(
            energy_cfg=self.energy_cfg,
            net=device_net,
            sync_period=sync_period,
            sync_cost_j=sync_cost,
        )
        if cfg.policy == policies.IDEAL_UNIFORM:
            self.schedule = policies.ideal_uniform_schedule(
                self.trace, self.energy_cfg, channel_seed=[cfg.seed, _RNG_CHANNEL]
            )
        self._decide = self._make_decide()

        self.rows = []
        self.tx_attempts = 0
        self.tx_successes = 0
        self._downtime_at_eval_start = None

    def _make_decide(self):
        cfg = self.cfg
        if cfg.policy in policies.DRL_POLICIES:

            def decide(state, t):
                eps = epsilon_at(t, self.dqn_cfg) if t <= self.train_steps else self.dqn_cfg.eps_end
                return select_action(self.device.net, state, eps, self.rng_action)

        elif cfg.policy == policies.THRESHOLD:
            capacity = self.energy_cfg.capacity_j

            def decide(state, t):
                return policies.threshold_decide(state[0], capacity, self.rng_action)

        else:

            def decide(state, t):
                return 1 if t in self.schedule else 0

        return decide

    def step(self, t):
        self.aoi.tick(t)
        blob = self.sink.published_blob if self.sink is not None else None
        out = self.device.step(self.trace, t, self._decide, self.rng_channel,
                               self.rng_payload, blob)
        self.aoi.note_downtime(out.energy_short)
        if out.tx_attempted:
            self.tx_attempts += 1
        if out.tx_succeeded:
            self.tx_successes += 1
        if out.tx_succeeded and out.delivered:
            if self.sink is not None:
                self.sink.ingest_update(out.delivered, t)
            else:
                self.aoi.receive(t, max(r.step for r in out.delivered))
        # The sink trains at every step; the train/eval day split only
        # controls the exploration schedule and the measurement windows.
        loss = None
        if self.sink is not None:
            loss = self.sink.train()

        step_reward = None
        if out.record is not None:
            step_reward = reward(
                out.record.action,
                self.aoi.day_mean(out.record.step),
                out.record.energy_j,
                self.energy_cfg.capacity_j,
                self.reward_params,
            )
        self.rows.append(
            (
                t,
                self.device.energy.stored_j,
                self.trace.current(t),
                self.aoi.sample_at(t),
                out.action,
                out.tx_succeeded,
                step_reward,
                loss,
                out.weights_installed,
            )
        )

    def run(self):
        initial = self.device.energy.stored_j
        for t in range(1, self.total_steps + 1):
            if t == self.train_steps + 1:
                self._downtime_at_eval_start = self.aoi.downtime_steps
            self.step(t)
        residual = conservation_residual(self.device.energy, initial)
        assert residual <= 1e-9, f"energy ledger broken by {residual} J"
        return self.summary()

    def summary(self):
        cfg = self.cfg
        spd = self.steps_per_day
        mpm = self.energy_cfg.step_seconds / 60.0  # minutes per step
        total = self.total_steps
        days = total / spd
        whole_days = total // spd
        eval_steps = total - self.train_steps

        aoi_eval = None
        downtime_eval_hours = None
        if eval_steps > 0:
            aoi_eval = self.aoi.window_mean(self.train_steps + 1, total) * mpm
            base = self._downtime_at_eval_start or 0
            downtime_eval_hours = (
                (self.aoi.downtime_steps - base) * self.energy_cfg.step_seconds / 3600.0
            )
        daily = [
            self.aoi.window_mean(d * spd + 1, (d + 1) * spd) * mpm for d in range(whole_days)
        ]
        return RunSummary(
            policy=cfg.policy,
            profile=self.trace.profile or cfg.profile,
            capacitance_farads=cfg.capacitance_farads,
            updates_per_day=cfg.updates_per_day if cfg.policy == policies.SPLIT_DRL else None,
            seed=cfg.seed,
            steps=total,
            days=whole_days,
            train_days=cfg.train_days,
            eval_days=cfg.eval_days,
            aoi_avg_minutes=self.aoi.average_aoi(total) * mpm,
            aoi_avg_eval_minutes=aoi_eval,
            aoi_peak_minutes=(self.aoi.peak_aoi() * mpm) if self.aoi.peaks else None,
            daily_aoi_minutes=daily,
            downtime_hours=self.aoi.downtime_steps * self.energy_cfg.step_seconds / 3600.0,
            downtime_eval_hours=downtime_eval_hours,
            tx_attempts_per_day=self.tx_attempts / days,
            tx_success_per_day=self.tx_successes / days,
            weight_installs_per_day=self.device.install_count / days,
            updates_received=self.aoi.received,
            final_energy_j=self.device.energy.stored_j,
        )

    def timeseries_csv(self):
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return str(int(v))
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [TIMESERIES_HEADER]
        for row in self.rows:
            lines.append(",".join(cell(v) for v in row))
        return "\n".join(lines) + "\n"


def run(cfg):
    """Execute one run; writes timeseries.csv and summary.json under
    cfg.out_dir when set. Returns the RunSummary."""
    sim = Simulation(cfg)
    summary = sim.run()
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.write_timeseries:
            (out / "timeseries.csv").write_text(sim.timeseries_csv())
        (out / "summary.json").write_text(summary_json(summary))
    return summary


def summary_json(summary):
    return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"


SWEEP_COLUMNS = (
    "policy,profile,capacitance_farads,updates_per_day,seed,aoi_avg_minutes,"
    "aoi_avg_eval_minutes,aoi_peak_minutes,downtime_hours,tx_attempts_per_day,"
    "tx_success_per_day,weight_installs_per_day,final_energy_j"
)


def sweep_csv(summaries):
    """Tidy one-row-per-run CSV, in input order."""
    lines = [SWEEP_COLUMNS]
    for s in summaries:
        cells = []
        for name in SWEEP_COLUMNS.split(","):
            v = getattr(s, name)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def sweep(cfgs, out_dir=None):
    """Run a list of configs in order; one summary row each."""
    summaries = []
    for cfg in cfgs:
        sub = dataclasses.replace(cfg, out_dir=None)
        summaries.append(run(sub))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(sweep_csv(summaries))
        (out / "summaries.json").write_text(
            json.dumps([s.to_dict() for s in summaries], indent=2, sort_keys=True) + "\n"
        )
    return summaries


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def parse_config_value(name, raw):
    if name not in _CONFIG_FIELDS:
        raise ValueError(f"unknown config key {name!r}")
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    ftype = _CONFIG_FIELDS[name].type
    if "bool" in str(ftype):
        return raw.lower() in ("1", "true", "yes", "on")
    if "int" in str(ftype):
        return int(raw)
    if "float" in str(ftype):
        return float(raw)
    return raw


def load_config_file(path):
    """Parse a flat `key = value` config file into RunConfig overrides."""
    overrides = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        name, raw = (part.strip() for part in line.split("=", 1))
        overrides[name] = parse_config_value(name, raw)
    return overrides


def make_config(**overrides):
    """RunConfig from keyword overrides with validation."""
    cfg = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()
