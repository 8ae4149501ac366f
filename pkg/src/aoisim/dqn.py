"""Replay memory, epsilon-greedy action selection, and the DQN training step.

The sink trains a policy network against a periodically synchronized target
network; the device only ever runs the cached network in inference mode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn

ACTION_WAIT = 0
ACTION_TRANSMIT = 1


@dataclass
class Experience:
    """One (s, a, r, s') transition reconstructed at the sink.

    Episodes are continuing, so `terminal` stays False in normal operation.
    """

    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool = False


class ReplayMemory:
    """Fixed-capacity FIFO ring over flat arrays for fast batch sampling."""

    def __init__(self, capacity=100_000, state_dim=3):
        self.capacity = int(capacity)
        self._s = np.zeros((self.capacity, state_dim))
        self._a = np.zeros(self.capacity, dtype=np.int64)
        self._r = np.zeros(self.capacity)
        self._s_next = np.zeros((self.capacity, state_dim))
        self._size = 0
        self._head = 0

    def __len__(self):
        return self._size

    def push(self, exp):
        i = self._head
        self._s[i] = exp.s
        self._a[i] = exp.a
        self._r[i] = exp.r
        self._s_next[i] = exp.s_next
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, n, rng):
        """Uniform sample of n experiences without replacement, as batch arrays."""
        idx = rng.choice(self._size, size=n, replace=False)
        return self._s[idx], self._a[idx], self._r[idx], self._s_next[idx]

    def snapshot(self):
        """All stored experiences, oldest first (for tests and audits)."""
        if self._size < self.capacity:
            order = range(self._size)
        else:
            order = [(self._head + k) % self.capacity for k in range(self.capacity)]
        return [
            Experience(self._s[i].copy(), int(self._a[i]), float(self._r[i]), self._s_next[i].copy())
            for i in order
        ]


@dataclass
class DqnConfig:
    batch_size: int = 64
    discount: float = 0.99
    target_sync_period: int = 100       # in training steps
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 1440         # linear anneal, ~2 simulated days
    learning_rate: float = 1e-3
    memory_capacity: int = 100_000

    def validate(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if self.batch_size > self.memory_capacity:
            raise ValueError("batch size cannot exceed memory capacity")
        for eps in (self.eps_start, self.eps_end):
            if not 0.0 <= eps <= 1.0:
                raise ValueError("epsilon values must be in [0, 1]")
        return self


def epsilon_at(step, cfg):
    """Exploration rate at a global step: linear decay, then a constant floor.

    Both the device and the sink-side bookkeeping use the same step clock, so
    the cached and trained policies explore identically.
    """
    if step >= cfg.eps_decay_steps:
        return cfg.eps_end
    frac = step / cfg.eps_decay_steps
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def select_action(net, s, eps, rng):
    """Epsilon-greedy over the two Q-values; ties break toward not transmitting."""
    if rng.random() < eps:
        return int(rng.integers(0, 2))
    q, _ = nn.forward(net, np.asarray(s, dtype=float)[None, :], nn.INFER)
    return ACTION_TRANSMIT if q[0, 1] > q[0, 0] else ACTION_WAIT


def train_step(policy, target, memory, cfg, opt, rng):
    """One minibatch update of the policy network.

    Returns the MSE loss, or None when the memory has fewer than batch_size
    experiences (the update is skipped and nothing changes).
    """
    n = cfg.batch_size
    if len(memory) < n:
        return None
    s, a, r, s_next = memory.sample(n, rng)
    q_next, _ = nn.forward(target, s_next, nn.INFER)
    y = r + cfg.discount * q_next.max(axis=1)
    q, cache = nn.forward(policy, s, nn.TRAIN, rng)
    rows = np.arange(n)
    err = q[rows, a] - y
    loss = float(np.mean(err * err))
    dq = np.zeros_like(q)
    dq[rows, a] = 2.0 * err / n
    grads = nn.backward(policy, cache, dq)
    nn.adam_step(policy, grads, opt)
    return loss
