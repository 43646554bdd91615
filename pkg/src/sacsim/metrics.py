"""KPI accumulation: throughput, mean per-packet delay, and MSDU drop rate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .kernel import NS_PER_MS, NS_PER_S, SimTime


class DoubleTerminal(Exception):
    """An MSDU was reported both delivered and dropped."""


class ConservationError(Exception):
    """The arrived = delivered + dropped + residual identity failed."""


@dataclass(frozen=True, slots=True)
class KpiRecord:
    throughput_mbps: float
    mean_delay_ms: Optional[float]  # None when nothing was delivered
    drop_rate: float
    counts: dict

    def as_row(self) -> dict:
        row = {
            "throughput_mbps": self.throughput_mbps,
            "mean_delay_ms": self.mean_delay_ms,
            "drop_rate": self.drop_rate,
        }
        row.update(self.counts)
        return row


class KpiAccumulator:
    """Per-run KPI counters. Only MSDUs arriving at or after ``warmup`` count;
    the observation window for throughput is [warmup, run_end]."""

    def __init__(self, warmup: SimTime = 0):
        self.warmup = warmup
        self.delivered = 0
        self.delivered_bits = 0
        self.delay_sum_ns = 0
        self.dropped = 0
        self.retransmissions = 0
        self.preamble_failures = 0
        self.retrains = 0
        self.beamtracking_updates = 0
        self.ppdu_count = 0
        self.total_airtime_ns = 0
        self._terminal_ids: set = set()

    def _in_window(self, arrival_time: SimTime) -> bool:
        return arrival_time >= self.warmup

    def _mark_terminal(self, msdu_id) -> None:
        if msdu_id in self._terminal_ids:
            raise DoubleTerminal(f"MSDU {msdu_id} reached two terminal states")
        self._terminal_ids.add(msdu_id)

    def record_delivered(self, msdu_id, size_bits: int, arrival_time: SimTime, delivery_time: SimTime) -> None:
        self._mark_terminal(msdu_id)
        if not self._in_window(arrival_time):
            return
        self.delivered += 1
        self.delivered_bits += size_bits
        self.delay_sum_ns += delivery_time - arrival_time
    def record_dropped(self, msdu_id, arrival_time: SimTime) -> None:
        self._mark_terminal(msdu_id)
        if self._in_window(arrival_time):
            self.dropped += 1

    def record_dropped_bulk(self, count: int) -> None:
        """Tolerance drops of never-materialized queue entries (already
        window-filtered by the caller)."""
        self.dropped += count

    def record_retransmission(self) -> None:
        self.retransmissions += 1

    def record_preamble_failure(self) -> None:
        self.preamble_failures += 1

    def record_retrain(self) -> None:
        self.retrains += 1

    def record_beamtracking_update(self) -> None:
        self.beamtracking_updates += 1

    def record_ppdu(self, airtime_ns: SimTime) -> None:
        self.ppdu_count += 1
        self.total_airtime_ns += airtime_ns

    def finalize(
        self,
        run_end: SimTime,
        arrived: int,
        residual_queued: int,
        residual_in_flight: int,
    ) -> KpiRecord:
        """Close the run. ``arrived``/residuals are window-filtered counts
        supplied by the MAC; residual MSDUs stay out of the drop-rate
        denominator but are reported in the counts."""
        if arrived != self.delivered + self.dropped + residual_queued + residual_in_flight:
            raise ConservationError(
                f"arrived={arrived} != delivered={self.delivered} + dropped={self.dropped}"
                f" + queued={residual_queued} + in_flight={residual_in_flight}"
            )
        window_ns = run_end - self.warmup
        if window_ns <= 0:
            raise ValueError("run_end must exceed warmup")
        throughput_mbps = self.delivered_bits / (window_ns / NS_PER_S) / 1e6
        terminal = self.delivered + self.dropped
        drop_rate = self.dropped / terminal if terminal else 0.0
        mean_delay_ms = self.delay_sum_ns / self.delivered / NS_PER_MS if self.delivered else None
        counts = {
            "arrived": arrived,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "retx": self.retransmissions,
            "preamble_fails": self.preamble_failures,
            "retrains": self.retrains,
            "beamtracking_updates": self.beamtracking_updates,
            "ppdu_count": self.ppdu_count,
            "total_airtime_ns": self.total_airtime_ns,
            "residual_queued": residual_queued,
            "residual_in_flight": residual_in_flight,
        }
        return KpiRecord(
            throughput_mbps=throughput_mbps,
            mean_delay_ms=mean_delay_ms,
            drop_rate=drop_rate,
            counts=counts,
        )
