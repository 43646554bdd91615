"""MAC/PPDU lifecycle over a single shared directional link: FIFO queueing,
A-MPDU aggregation, preamble-gated reception with per-MPDU SNR re-evaluation,
block-ack retransmission, drop policies, and beacon-interval SLS retraining
after beam link failure."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .kernel import RngStreams, SimTime, Simulator, micros, millis
from .metrics import KpiAccumulator
from .phy import (
    BeamPair,
    McsTable,
    NoLink,
    best_beam_pair_from_paths,
    preamble_sync_ok,
)
from .schemes import BasePolicy
from .traffic import ArrivalSource
from .world import DIRECTIONS, DL, UL, World


class EmptyQueue(Exception):
    """PPDU build requested from an empty queue."""


class ChannelOverlap(Exception):
    """Two airtime reservations overlapped on the shared medium."""


@dataclass(slots=True)
class Msdu:
    id: tuple
    size_bits: int
    direction: str
    arrival_time: SimTime
    retry_count: int = 0
    state: str = "queued"  # queued | in_flight | delivered | dropped
    delivery_time: Optional[SimTime] = None


@dataclass(slots=True)
class Ppdu:
    mpdus: list[Msdu]
    preamble_duration: SimTime
    payload_duration: SimTime
    trn_tail_duration: SimTime
    tx_beam: BeamPair
    launch_time: SimTime

    @property
    def airtime(self) -> SimTime:
        return self.preamble_duration + self.payload_duration + self.trn_tail_duration


@dataclass(slots=True)
class LinkState:
    current_pair: BeamPair
    link_ok: bool = True
    last_train_time: SimTime = 0
    pending_retrain: bool = False
    consecutive_preamble_fails: int = 0

    def declare_failure(self) -> None:
        self.link_ok = False
        self.pending_retrain = True


@dataclass(frozen=True, slots=True)
class MacConfig:
    aggregation_size: int = 1
    max_retries: int = 7
    max_queue_delay: SimTime = millis(50)
    sifs: SimTime = micros(3)
    difs: SimTime = micros(8)
    ack_duration: SimTime = micros(3)
    beacon_interval: SimTime = millis(100)
    sls_airtime: SimTime = millis(2)
    # Duration of the full TRN training field a beamtracking PPDU appends
    # (multiple TRN units of Golay-sequence subfields, tens of microseconds).
    trn_unit_duration: SimTime = micros(48)
    preamble_duration: SimTime = micros(2)
    mcs: int = 14
    msdu_size_bits: int = 12_000
    sync_threshold_db: float = 8.0
    failure_threshold: int = 3

    def __post_init__(self):
        if self.aggregation_size < 1:
            raise ValueError("aggregation_size must be >= 1")
        for name in (
            "max_queue_delay",
            "sifs",
            "difs",
            "ack_duration",
            "beacon_interval",
            "sls_airtime",
            "trn_unit_duration",
            "preamble_duration",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.failure_threshold < 1:
            raise ValueError("failure_threshold must be >= 1")


class MacQueue:
    """Per-direction FIFO of MSDUs backed by a lazy arrival source.
    Retransmissions re-enter at the head (they carry the oldest arrivals,
    preserving FIFO delivery order)."""

    def __init__(self, direction: str, source: ArrivalSource, msdu_size_bits: int):
        self.direction = direction
        self.source = source
        self.msdu_size_bits = msdu_size_bits
        self.q: deque[Msdu] = deque()
        self.materialized_dropped = 0
        self.bulk_dropped = 0

    def enqueue(self, msdu: Msdu) -> None:
        assert msdu.state == "queued"
        self.q.append(msdu)

    def requeue_front(self, msdus: list[Msdu]) -> None:
        for m in reversed(msdus):
            m.state = "queued"
            self.q.appendleft(m)

    def has_traffic(self, now: SimTime) -> bool:
        return bool(self.q) or self.source.has_pending(now)

    def next_arrival_time(self) -> Optional[SimTime]:
        if self.q:
            return None  # already serviceable
        return self.source.peek_next()

    def drop_expired(self, now: SimTime, max_queue_delay: SimTime, warmup: SimTime, kpi: KpiAccumulator) -> None:
        cutoff = now - max_queue_delay
        if cutoff <= 0:
            return
        while self.q and self.q[0].arrival_time < cutoff:
            m = self.q.popleft()
            m.state = "dropped"
            self.materialized_dropped += 1
            kpi.record_dropped(m.id, m.arrival_time)
        if not self.q:
            total, in_window = self.source.discard_before(cutoff, warmup)
            self.bulk_dropped += total
            if in_window:
                kpi.record_dropped_bulk(in_window)

    def take(self, k: int, now: SimTime) -> list[Msdu]:
        out: list[Msdu] = []
        while len(out) < k:
            if self.q:
                m = self.q.popleft()
            elif self.source.has_pending(now):
                t = self.source.pop(now)
                m = Msdu(
                    id=(self.direction, self.source.next_index - 1),
                    size_bits=self.msdu_size_bits,
                    direction=self.direction,
                    arrival_time=t,
                )
            else:
                break
            m.state = "in_flight"
            out.append(m)
        return out

    def queued_count(self, now: SimTime) -> int:
        return len(self.q) + self.source.pending_count(now)

    def queued_count_in_window(self, now: SimTime, warmup: SimTime) -> int:
        n = sum(1 for m in self.q if m.arrival_time >= warmup)
        return n + self.source.pending_count_in_window(now, warmup)


class MacEngine:
    """Event-driven MAC for one AP/STA pair on a single shared medium, with a
    round-robin grant between the two directions (one AP and one STA: there is
    no contention to model)."""

    def __init__(
        self,
        sim: Simulator,
        world: World,
        policy: BasePolicy,
        mcs_table: McsTable,
        config: MacConfig,
        streams: RngStreams,
        sources: dict[str, ArrivalSource],
        kpi: KpiAccumulator,
        duration: SimTime,
        warmup: SimTime = 0,
        strict_checks: bool = False,
    ):
        self.sim = sim
        self.world = world
        self.policy = policy
        self.mcs = mcs_table
        self.cfg = config
        self.streams = streams
        self.kpi = kpi
        self.duration = duration
        self.warmup = warmup
        self.strict_checks = strict_checks

        self.queues = {d: MacQueue(d, sources[d], config.msdu_size_bits) for d in DIRECTIONS}
        initial = self._global_best_pairs(0)
        self.links = {d: LinkState(current_pair=initial[d]) for d in DIRECTIONS}
        self.in_flight: dict[str, list[Msdu]] = {d: [] for d in DIRECTIONS}
        self.next_allowed: dict[str, SimTime] = {d: 0 for d in DIRECTIONS}
        self.busy_until: SimTime = 0
        self.last_grant: str = UL  # so DL goes first
        self.sls_pending: deque[str] = deque()
        self._wake_at: Optional[SimTime] = None
        self.delivered_total = 0
        self.dropped_total = 0

        self._phy_rate_bps = mcs_table.phy_rate_bps(config.mcs)

    # -- setup ---------------------------------------------------------------

    def _global_best_pairs(self, t: SimTime) -> dict[str, BeamPair]:
        """Initial association: both links start SLS-trained at t."""
        pairs = {}
        for d in DIRECTIONS:
            tx_ant, rx_ant = self.world.antennas(d)
            paths = self.world.paths_for(d, t)
            try:
                pairs[d] = best_beam_pair_from_paths(paths, self.world.scenario, tx_ant, rx_ant)
            except NoLink:
                pairs[d] = BeamPair(0, 0)
        return pairs

    def start(self) -> None:
        b = self.cfg.beacon_interval
        t = b
        while t <= self.duration:
            self.sim.schedule(t, "BeaconTick", self._on_beacon)
            t += b
        if self.policy.uses_sensing:
            period = self.policy.scheme.sensing_period
            t = 0
            while t <= self.duration:
                self.sim.schedule(t, "SensingTick", self._on_sensing_tick)
                t += period
        self._schedule_try(0)

    # -- event plumbing --------------------------------------------------------

    def _schedule_try(self, t: SimTime) -> None:
        t = max(t, self.sim.now)
        if self._wake_at is not None and self._wake_at <= t:
            return
        self._wake_at = t
        self.sim.schedule(t, "TryTx", self._on_try)

    def _on_try(self) -> None:
        self._wake_at = None
        self._try_start()

    def _on_sensing_tick(self) -> None:
        self.policy.generate_report(self.sim.now)
        overhead = self.policy.scheme.report_airtime
        if overhead > 0 and self.busy_until <= self.sim.now:
            self._reserve(self.sim.now, overhead)
        avail = self.sim.now + self.policy.scheme.sensing_latency
        self._schedule_try(avail)

    def _on_beacon(self) -> None:
        for d in DIRECTIONS:
            if self.links[d].pending_retrain and d not in self.sls_pending:
                self.sls_pending.append(d)
        self._try_start()

    def _reserve(self, start: SimTime, length: SimTime) -> SimTime:
        if start < self.busy_until:
            raise ChannelOverlap(f"reservation at {start} overlaps busy-until {self.busy_until}")
        self.busy_until = start + length
        return self.busy_until

    # -- medium access ---------------------------------------------------------

    def _eligible(self, d: str, now: SimTime) -> bool:
        link = self.links[d]
        return (not link.pending_retrain) and now >= self.next_allowed[d] and self.queues[d].has_traffic(now)

    def _try_start(self) -> None:
        now = self.sim.now
        if now < self.busy_until:
            return  # the in-flight exchange reschedules us
        if self.sls_pending:
            self._start_sls(now)
            return
        order = [d for d in DIRECTIONS if d != self.last_grant] + [self.last_grant]
        for d in order:
            if not self._eligible(d, now):
                continue
            if self._launch(d, now):
                return
        self._schedule_idle_wake(now)

    def _schedule_idle_wake(self, now: SimTime) -> None:
        candidates = []
        for d in DIRECTIONS:
            if self.links[d].pending_retrain:
                continue  # woken by the beacon/SLS chain
            t_arr = self.queues[d].next_arrival_time()
            t = self.next_allowed[d]
            if self.queues[d].q:
                candidates.append(max(t, now))
            elif t_arr is not None:
                candidates.append(max(t, t_arr))
        if candidates:
            t = min(candidates)
            if t <= self.duration:
                self._schedule_try(t)

    def _start_sls(self, now: SimTime) -> None:
        d = self.sls_pending.popleft()
        end = self._reserve(now, self.cfg.sls_airtime)
        self.sim.schedule(end, "SlsDone", lambda d=d: self._on_sls_done(d))

    def _on_sls_done(self, d: str) -> None:
        now = self.sim.now
        link = self.links[d]
        pairs = self._global_best_pairs(now)
        link.current_pair = pairs[d]
        link.link_ok = True
        link.pending_retrain = False
        link.consecutive_preamble_fails = 0
        link.last_train_time = now
        self.next_allowed[d] = now
        self.kpi.record_retrain()
        self._try_start()

    # -- transmission ------------------------------------------------------------

    def build_ppdu(self, d: str, now: SimTime) -> Ppdu:
        queue = self.queues[d]
        msdus = queue.take(self.cfg.aggregation_size, now)
        if not msdus:
            raise EmptyQueue(d)
        link = self.links[d]
        # The consecutive-fail counter deliberately survives policy-driven
        # pair changes: a selection that hops between candidates while every
        # one of them fails is still a broken beam link, and must reach the
        # failure threshold rather than dodge it by switching.
        pair = self.policy.select_pair(d, link.current_pair, now)
        if pair != link.current_pair:
            link.current_pair = pair
        payload_ns = int(round(sum(m.size_bits for m in msdus) / self._phy_rate_bps * 1e9))
        trn = self.cfg.trn_unit_duration if self.policy.trn_tail else 0
        return Ppdu(
            mpdus=msdus,
            preamble_duration=self.cfg.preamble_duration,
            payload_duration=payload_ns,
            trn_tail_duration=trn,
            tx_beam=pair,
            launch_time=now,
        )

    def _launch(self, d: str, now: SimTime) -> bool:
        queue = self.queues[d]
        queue.drop_expired(now, self.cfg.max_queue_delay, self.warmup, self.kpi)
        self._count_bulk_drops()
        if not queue.has_traffic(now):
            return False
        ppdu = self.build_ppdu(d, now)
        self.in_flight[d] = ppdu.mpdus
        self.last_grant = d
        self.kpi.record_ppdu(ppdu.airtime)
        ack_time = self._reserve(now, ppdu.airtime + self.cfg.sifs + self.cfg.ack_duration)
        self.sim.schedule(ack_time, "PpduResult", lambda: self._on_ppdu_result(d, ppdu))
        return True

    def _count_bulk_drops(self) -> None:
        if not self.strict_checks:
            return
        self._check_conservation()

    def transmit_outcome(self, d: str, ppdu: Ppdu) -> tuple[bool, list[bool]]:
        """Evaluate the PPDU over the air: preamble sync at launch, then one
        success draw per MPDU at that MPDU's airtime midpoint."""
        launch = ppdu.launch_time
        snr0 = self.world.profile_for(d, launch).snr_db(ppdu.tx_beam)
        if not preamble_sync_ok(snr0, self.cfg.sync_threshold_db):
            return False, [False] * len(ppdu.mpdus)
        bitmap = []
        offset = ppdu.preamble_duration
        for m in ppdu.mpdus:
            dur = int(round(m.size_bits / self._phy_rate_bps * 1e9))
            midpoint = launch + offset + dur // 2
            offset += dur
            pair = self.policy.mpdu_pair(d, ppdu.tx_beam, midpoint)
            snr = self.world.profile_for(d, midpoint).snr_db(pair)
            p_ok = self.mcs.mpdu_success_prob(snr, self.cfg.mcs, m.size_bits)
            bitmap.append(self.streams.channel.random() < p_ok)
        return True, bitmap

    def _on_ppdu_result(self, d: str, ppdu: Ppdu) -> None:
        now = self.sim.now  # launch + airtime + sifs + ack
        link = self.links[d]
        synced, bitmap = self.transmit_outcome(d, ppdu)
        self.in_flight[d] = []
        self.policy.note_result(d, ppdu.tx_beam, synced, now)
        if not synced:
            self.kpi.record_preamble_failure()
            link.consecutive_preamble_fails += 1
            if link.consecutive_preamble_fails >= self.cfg.failure_threshold:
                link.declare_failure()
            self._handle_unacked(d, ppdu.mpdus)
            self.next_allowed[d] = max(
                self.next_allowed[d], self.policy.next_attempt_after_fail(d, ppdu.tx_beam, now)
            )
        else:
            link.consecutive_preamble_fails = 0
            updated = self.policy.after_preamble_ok(d, ppdu.tx_beam, ppdu.launch_time + ppdu.airtime)
            if updated is not None:
                self.kpi.record_beamtracking_update()
                if updated != link.current_pair:
                    link.current_pair = updated
            acked = [m for m, ok in zip(ppdu.mpdus, bitmap) if ok]
            unacked = [m for m, ok in zip(ppdu.mpdus, bitmap) if not ok]
            for m in acked:
                m.state = "delivered"
                m.delivery_time = now
                self.delivered_total += 1
                self.kpi.record_delivered(m.id, m.size_bits, m.arrival_time, now)
            self._handle_unacked(d, unacked)
        self.queues[d].drop_expired(now, self.cfg.max_queue_delay, self.warmup, self.kpi)
        if self.strict_checks:
            self._check_conservation()
        self._schedule_try(now + self.cfg.difs)

    def _handle_unacked(self, d: str, msdus: list[Msdu]) -> None:
        keep: list[Msdu] = []
        for m in msdus:
            m.retry_count += 1
            if m.retry_count > self.cfg.max_retries:
                m.state = "dropped"
                self.queues[d].materialized_dropped += 1
                self.dropped_total += 1
                self.kpi.record_dropped(m.id, m.arrival_time)
            else:
                self.kpi.record_retransmission()
                keep.append(m)
        self.queues[d].requeue_front(keep)

    # -- accounting -----------------------------------------------------------

    def _arrived_total(self, now: SimTime) -> int:
        return sum(self.queues[d].source.count_up_to(now) for d in DIRECTIONS)

    def _check_conservation(self) -> None:
        now = self.sim.now
        arrived = self._arrived_total(now)
        queued = sum(self.queues[d].queued_count(now) for d in DIRECTIONS)
        in_flight = sum(len(self.in_flight[d]) for d in DIRECTIONS)
        delivered = self.delivered_total
        dropped = (
            sum(self.queues[d].materialized_dropped + self.queues[d].bulk_dropped for d in DIRECTIONS)
        )
        if arrived != delivered + dropped + queued + in_flight:
            raise AssertionError(
                f"conservation violated at t={now}: arrived={arrived} delivered={delivered}"
                f" dropped={dropped} queued={queued} in_flight={in_flight}"
            )

    def run(self):
        self.start()
        self.sim.run_until(self.duration)
        now = self.duration
        arrived_w = sum(self.queues[d].source.count_in_window(self.warmup, now) for d in DIRECTIONS)
        residual_q = sum(self.queues[d].queued_count_in_window(now, self.warmup) for d in DIRECTIONS)
        residual_f = sum(
            1 for d in DIRECTIONS for m in self.in_flight[d] if m.arrival_time >= self.warmup
        )
        return self.kpi.finalize(now, arrived_w, residual_q, residual_f)
