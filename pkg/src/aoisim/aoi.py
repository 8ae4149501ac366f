"""Age-of-information bookkeeping at the sink.

The age process grows by one per step and resets to (t - generation time) when
a fresher status update arrives. One sample per step is recorded, reflecting
any reception that happened within that step, so the stored sequence matches a
brute-force recomputation from the reception log.
"""
from __future__ import annotations


class AoIProcess:
    """Incremental age process with peaks, downtime and a rolling-day mean."""

    def __init__(self, day_window_steps=720):
        self.day_window_steps = int(day_window_steps)
        self.age = 0
        self.last_gen = 0
        self.peaks = []
        self.received = 0
        self.stale = 0
        self.downtime_steps = 0
        self._last_step = 0
        # _samples[i] is the end-of-step age at step i+1; _prefix[i] the sum of
        # the first i samples, kept for O(1) rolling means.
        self._samples = []
        self._prefix = [0]

    @property
    def step(self):
        return self._last_step

    def tick(self, t):
        """Advance to step t. Must be called exactly once per step, in order."""
        if t != self._last_step + 1:
            raise ValueError(f"tick({t}) out of order; last step was {self._last_step}")
        self._last_step = t
        self.age += 1
        self._samples.append(self.age)
        self._prefix.append(self._prefix[-1] + self.age)

    def receive(self, t, gen_time):
        """Record a status update received at step t, generated at gen_time.

        Stale updates (not fresher than the current one) are counted and
        ignored. Returns True when the update was accepted.
        """
        if t != self._last_step:
            raise ValueError(f"receive({t}) before tick({t})")
        if gen_time > t:
            raise ValueError("generation time lies in the future")
        if gen_time <= self.last_gen:
            self.stale += 1
            return False
        self.peaks.append(self.age)
        self.last_gen = gen_time
        self.age = t - gen_time
        self._samples[-1] = self.age
        self._prefix[-1] = self._prefix[-2] + self.age
        self.received += 1
        return True

    def note_downtime(self, insufficient):
        if insufficient:
            self.downtime_steps += 1

    def average_aoi(self, horizon=None):
        """Mean age over steps 1..horizon (default: all recorded steps)."""
        n = len(self._samples) if horizon is None else int(horizon)
        if n <= 0 or n > len(self._samples):
            raise ValueError(f"horizon {horizon} outside recorded range")
        return self._prefix[n] / n

    def peak_aoi(self):
        """Mean of the per-reception age peaks."""
        if not self.peaks:
            raise ValueError("no updates received yet")
        return sum(self.peaks) / len(self.peaks)

    def day_mean(self, t):
        """Rolling past-day mean age at step t; zero until one full day exists."""
        if not 1 <= t <= self._last_step:
            raise ValueError(f"step {t} outside recorded range")
        w = self.day_window_steps
        if t < w:
            return 0.0
        return (self._prefix[t] - self._prefix[t - w]) / w

    def sample_at(self, t):
        """End-of-step age at step t."""
        return self._samples[t - 1]

    def window_mean(self, start, stop):
        """Mean age over steps start..stop inclusive."""
        if not 1 <= start <= stop <= self._last_step:
            raise ValueError("window outside recorded range")
        return (self._prefix[stop] - self._prefix[start - 1]) / (stop - start + 1)
