"""Arrival processes with lazy materialization.

MSDUs are stamped with exact arrival times but only turned into objects when
the MAC is about to serve (or expire) them, so heavily oversubscribed runs do
not pay one event per offered packet. For CBR this is an exact reformulation
of per-arrival events; for Poisson the arrival times are pre-drawn per flow
from its own substream, keeping them independent of the serving scheme.
"""

from __future__ import annotations

import math
from typing import Optional

from .kernel import NS_PER_S, RngStream, SimTime


class ArrivalSource:
    """Ordered arrival times for one direction. ``next_index`` is the first
    arrival not yet materialized or discarded."""

    def __init__(self):
        self.next_index = 0

    def arrival_time(self, index: int) -> SimTime:
        raise NotImplementedError

    def count_up_to(self, t: SimTime) -> int:
        """Number of arrivals with time <= t."""
        raise NotImplementedError

    # -- shared helpers -----------------------------------------------------

    def has_pending(self, now: SimTime) -> bool:
        return self.peek_next() is not None and self.arrival_time(self.next_index) <= now

    def peek_next(self) -> Optional[SimTime]:
        raise NotImplementedError

    def pop(self, now: SimTime) -> SimTime:
        """Materialize the next arrival (must be due)."""
        t = self.arrival_time(self.next_index)
        assert t <= now
        self.next_index += 1
        return t

    def discard_before(self, cutoff: SimTime, warmup: SimTime) -> tuple[int, int]:
        """Discard pending arrivals strictly older than ``cutoff`` (queue-delay
        expiry). Returns (total discarded, discarded with arrival >= warmup)."""
        n_before = self.count_up_to(cutoff - 1)
        if n_before <= self.next_index:
            return (0, 0)
        total = n_before - self.next_index
        n_before_warmup = self.count_up_to(warmup - 1) if warmup > 0 else 0
        in_window = n_before - max(self.next_index, n_before_warmup)
        self.next_index = n_before
        return (total, max(0, in_window))

    def pending_count(self, t: SimTime) -> int:
        """Arrivals due by t and not yet materialized."""
        return max(0, self.count_up_to(t) - self.next_index)

    def pending_count_in_window(self, t: SimTime, warmup: SimTime) -> int:
        n = self.count_up_to(t)
        lo = max(self.next_index, self.count_up_to(warmup - 1) if warmup > 0 else 0)
        return max(0, n - lo)

    def count_in_window(self, warmup: SimTime, t: SimTime) -> int:
        before = self.count_up_to(warmup - 1) if warmup > 0 else 0
        return max(0, self.count_up_to(t) - before)


class CbrSource(ArrivalSource):
    """Constant bit rate: fixed inter-arrival = msdu_size / rate."""

    def __init__(self, rate_mbps: float, msdu_size_bits: int, phase_ns: SimTime = 0):
        super().__init__()
        if rate_mbps < 0:
            raise ValueError("rate must be nonnegative")
        self.rate_mbps = rate_mbps
        self.msdu_size_bits = msdu_size_bits
        self.phase_ns = phase_ns
        if rate_mbps == 0:
            self.interval_ns = None
        else:
            self.interval_ns = max(1, int(round(msdu_size_bits / (rate_mbps * 1e6) * NS_PER_S)))

    def arrival_time(self, index: int) -> SimTime:
        assert self.interval_ns is not None
        return self.phase_ns + (index + 1) * self.interval_ns

    def count_up_to(self, t: SimTime) -> int:
        if self.interval_ns is None or t < self.phase_ns + self.interval_ns:
            return 0
        return (t - self.phase_ns) // self.interval_ns

    def peek_next(self) -> Optional[SimTime]:
        if self.interval_ns is None:
            return None
        return self.arrival_time(self.next_index)


class PoissonSource(ArrivalSource):
    """Poisson arrivals at the configured mean rate, pre-drawn lazily from a
    dedicated substream."""

    _CHUNK = 1024

    def __init__(self, rate_mbps: float, msdu_size_bits: int, rng: RngStream):
        super().__init__()
        if rate_mbps < 0:
            raise ValueError("rate must be nonnegative")
        self.rate_mbps = rate_mbps
        self.msdu_size_bits = msdu_size_bits
        self.rng = rng
        self._times: list[SimTime] = []
        self._mean_ns = None if rate_mbps == 0 else msdu_size_bits / (rate_mbps * 1e6) * NS_PER_S

    def _extend_past(self, t: SimTime) -> None:
        if self._mean_ns is None:
            return
        while not self._times or self._times[-1] <= t:
            last = self._times[-1] if self._times else 0
            for _ in range(self._CHUNK):
                last += max(1, int(round(self.rng.exponential(self._mean_ns))))
                self._times.append(last)

    def arrival_time(self, index: int) -> SimTime:
        if self._mean_ns is None:
            raise IndexError("zero-rate source has no arrivals")
        while index >= len(self._times):
            self._extend_past(self._times[-1] if self._times else 0)
        return self._times[index]

    def count_up_to(self, t: SimTime) -> int:
        if self._mean_ns is None:
            return 0
        self._extend_past(t)
        import bisect

        return bisect.bisect_right(self._times, t)

    def peek_next(self) -> Optional[SimTime]:
        if self._mean_ns is None:
            return None
        return self.arrival_time(self.next_index)
