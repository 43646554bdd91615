"""Beam-management policies: baseline beamtracking, sensing-assisted (ISAC)
switching, and the zero-overhead theoretical optimum, plus the location
sensing error model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet, Optional

from .geometry import Position
from .kernel import RngStream, SimTime, millis
from .phy import BeamPair, MountedAntenna, NoLink, best_beam_pair_from_paths
from .world import DL, World

# How long a preamble-sync failure keeps a beam pair demoted in the
# sensing-assisted selection. Long enough that a slow STA rides out a whole
# stretch of noisy position estimates near a shadow boundary without
# re-picking the dead pair, short enough that the pair is reconsidered once
# the STA has clearly moved on. Demoting a live pair is cheap (the runner-up
# also syncs at these link budgets); re-picking a dead one costs a failed
# PPDU plus a deferral, so the TTL errs long.
DEMOTION_TTL: SimTime = millis(2000)


@dataclass(frozen=True, slots=True)
class BaselineScheme:
    name: str = "baseline"
    append_trn_tail: bool = True  # test hook; the 802.11ay baseline trains on every PPDU


@dataclass(frozen=True, slots=True)
class IsacScheme:
    error_radius_m: float = 0.4
    sensing_period: SimTime = millis(10)
    sensing_latency: SimTime = 0
    intra_ppdu_switch: bool = False
    report_airtime: SimTime = 0  # per-report medium cost hook, zero by default
    name: str = "isac"

    def __post_init__(self):
        if self.error_radius_m < 0:
            raise ValueError("error_radius_m must be nonnegative")
        if self.sensing_period <= 0:
            raise ValueError("sensing_period must be positive")


@dataclass(frozen=True, slots=True)
class OracleScheme:
    name: str = "oracle"


SchemeKind = BaselineScheme | IsacScheme | OracleScheme


@dataclass(frozen=True, slots=True)
class SensingReport:
    subject: str
    est_position: Position
    generated_at: SimTime
    available_at: SimTime


def sense_location(
    true_pos: Position,
    error_radius_m: float,
    rng: RngStream,
    generated_at: SimTime = 0,
    latency: SimTime = 0,
    subject: str = "sta",
) -> SensingReport:
    """Perturb the true position by an offset drawn uniformly from the
    horizontal disk of the given radius (z unchanged)."""
    if error_radius_m < 0:
        raise ValueError("error_radius_m must be nonnegative")
    if error_radius_m == 0:
        est = true_pos
    else:
        u = rng.random()
        theta = rng.uniform(0.0, 2.0 * math.pi)
        r = error_radius_m * math.sqrt(u)
        est = Position(true_pos.x + r * math.cos(theta), true_pos.y + r * math.sin(theta), true_pos.z)
    return SensingReport(
        subject=subject,
        est_position=est,
        generated_at=generated_at,
        available_at=generated_at + latency,
    )


def oracle_select_beam(world: World, direction: str, t: SimTime) -> Optional[BeamPair]:
    """Best pair at the true instantaneous positions; None if no path exists."""
    tx_ant, rx_ant = world.antennas(direction)
    paths = world.paths_for(direction, t)
    try:
        return best_beam_pair_from_paths(
            paths, world.scenario, tx_ant, rx_ant, profile=world.profile_for(direction, t)
        )
    except NoLink:
        return None


def path_family(path) -> tuple:
    """Grouping key for paths that stand or fall together: the line of sight,
    or all bounces off one surface. A blocked family is blocked for every
    beam pair aimed along it, whatever the exact sector indices."""
    return (path.kind, path.surface_index)


def isac_select_beam(
    world: World,
    direction: str,
    report: Optional[SensingReport],
    now: SimTime,
    avoid: Optional[AbstractSet[BeamPair]] = None,
    avoid_families: Optional[AbstractSet[tuple]] = None,
) -> Optional[BeamPair]:
    """Best pair at the reported (estimated) STA position; the static AP's
    position is known exactly. None when no usable report or no path.
    ``avoid`` demotes individual pairs and ``avoid_families`` whole path
    families known to have recently failed in the field; when every path is
    in a demoted family the unfiltered argmax is returned."""
    if report is None or report.available_at > now:
        return None
    ap = world.ap_position(now)
    sta_est = report.est_position
    tx_pos, rx_pos = (ap, sta_est) if direction == DL else (sta_est, ap)
    tx_ant, rx_ant = world.antennas(direction)
    paths = world.paths(tx_pos, rx_pos, now)
    if avoid_families:
        kept = [p for p in paths if path_family(p) not in avoid_families]
        if kept:
            paths = kept
    try:
        return best_beam_pair_from_paths(paths, world.scenario, tx_ant, rx_ant, avoid=avoid)
    except NoLink:
        return None


def beamtracking_neighborhood_update(
    world: World, direction: str, current: BeamPair, t: SimTime
) -> BeamPair:
    """Local refinement: best pair within +/-1 sector of the current pair on
    each end, evaluated at the true positions at time t. Tracking cannot jump
    across the sector space; a global re-acquisition is SLS's job."""
    tx_ant, rx_ant = world.antennas(direction)
    profile = world.profile_for(direction, t)
    if not profile.rx_dbm:
        return current
    n_tx = tx_ant.model.num_sectors
    n_rx = rx_ant.model.num_sectors
    best = current
    best_snr = -math.inf
    for dt in (-1, 0, 1):
        for dr in (-1, 0, 1):
            pair = BeamPair((current.tx_sector + dt) % n_tx, (current.rx_sector + dr) % n_rx)
            snr = profile.snr_db(pair)
            if snr > best_snr or (snr == best_snr and pair < best):
                best_snr = snr
                best = pair
    return best


class BasePolicy:
    """MAC hooks shared by all schemes."""

    trn_tail = False
    uses_sensing = False

    def __init__(self, world: World):
        self.world = world

    def select_pair(self, direction: str, current: BeamPair, now: SimTime) -> BeamPair:
        raise NotImplementedError

    def mpdu_pair(self, direction: str, current: BeamPair, t: SimTime) -> BeamPair:
        return current

    def after_preamble_ok(self, direction: str, current: BeamPair, ppdu_end: SimTime) -> Optional[BeamPair]:
        """Returns an updated pair (counts as a beamtracking update) or None."""
        return None

    def next_attempt_after_fail(self, direction: str, failed: BeamPair, now: SimTime) -> SimTime:
        return now

    def note_result(self, direction: str, pair: BeamPair, ok: bool, now: SimTime) -> None:
        """Feedback after each PPDU: preamble synced or not."""


class BaselinePolicy(BasePolicy):
    """802.11ay beamtracking: training tail on every PPDU, local pair
    refinement on success, SLS at the next beacon after a beam link failure."""

    def __init__(self, world: World, scheme: BaselineScheme):
        super().__init__(world)
        self.trn_tail = scheme.append_trn_tail

    def select_pair(self, direction: str, current: BeamPair, now: SimTime) -> BeamPair:
        return current

    def after_preamble_ok(self, direction: str, current: BeamPair, ppdu_end: SimTime) -> Optional[BeamPair]:
        return beamtracking_neighborhood_update(self.world, direction, current, ppdu_end)


class IsacPolicy(BasePolicy):
    """Sensing-assisted switching: the pair is re-selected from the latest
    location report before every PPDU, with zero airtime overhead."""

    uses_sensing = True

    def __init__(self, world: World, scheme: IsacScheme, sensing_rng: RngStream):
        super().__init__(world)
        self.scheme = scheme
        self.rng = sensing_rng
        self.latest_report: Optional[SensingReport] = None
        # Pairs and path families that recently failed preamble sync, per
        # direction, with the time each demotion expires. A demotion has to
        # outlive individual successes of other pairs; otherwise an STA
        # hovering near a shadow boundary re-picks the dead pair on every
        # report whose error draw lands on the wrong side. It also has to
        # expire, because the channel decorrelates as the STA moves and
        # yesterday's dead pair may be the true best one now. Failures demote
        # the whole family the pair was aimed along when that is identifiable
        # (sector indices wobble with the estimate, the family does not);
        # pair-level demotion is the fallback for sidelobe picks. Near
        # overlapping shadow edges several families can be dead at once,
        # hence sets rather than single entries.
        self._avoid: dict[str, dict[BeamPair, SimTime]] = {}
        self._avoid_fams: dict[str, dict[tuple, SimTime]] = {}
        # Selection memo: with a static AP and static blockers, the selected
        # pair is a pure function of (report, direction, demoted set), and the
        # report only changes every sensing period. Cleared on each report.
        self._sel_cache: dict = {}
        # Switch debounce: a single report is one noisy draw of the position
        # error, so abandoning a pair that is currently syncing takes two
        # consecutive reports nominating the same replacement. After a
        # preamble failure the current pair is known-bad and the debounce is
        # bypassed for the next selection.
        self._pending: dict[str, tuple[SimTime, BeamPair]] = {}
        self._switch_now: dict[str, bool] = {}

    def generate_report(self, now: SimTime) -> SensingReport:
        report = sense_location(
            self.world.sta_position(now),
            self.scheme.error_radius_m,
            self.rng,
            generated_at=now,
            latency=self.scheme.sensing_latency,
        )
        self.latest_report = report
        self._sel_cache.clear()
        return report

    def _usable_report(self, now: SimTime) -> Optional[SensingReport]:
        r = self.latest_report
        return r if r is not None and r.available_at <= now else None

    @staticmethod
    def _prune(demoted: Optional[dict], now: SimTime) -> Optional[frozenset]:
        if not demoted:
            return None
        expired = [k for k, t in demoted.items() if t <= now]
        for k in expired:
            del demoted[k]
        return frozenset(demoted) if demoted else None

    def _select(self, direction: str, now: SimTime) -> Optional[BeamPair]:
        report = self._usable_report(now)
        avoided = self._prune(self._avoid.get(direction), now)
        avoided_fams = self._prune(self._avoid_fams.get(direction), now)
        key = (direction, report is None, avoided, avoided_fams)
        try:
            return self._sel_cache[key]
        except KeyError:
            pair = isac_select_beam(
                self.world, direction, report, now, avoid=avoided, avoid_families=avoided_fams
            )
            self._sel_cache[key] = pair
            return pair

    def select_pair(self, direction: str, current: BeamPair, now: SimTime) -> BeamPair:
        pair = self._select(direction, now)
        if pair is None:
            return current
        if pair == current:
            self._pending.pop(direction, None)
            return current
        if self._switch_now.pop(direction, False):
            self._pending.pop(direction, None)
            return pair
        report_ts = self.latest_report.generated_at
        prev = self._pending.get(direction)
        if prev is not None and prev[1] == pair and prev[0] != report_ts:
            self._pending.pop(direction, None)
            return pair
        if prev is None or prev[0] != report_ts:
            self._pending[direction] = (report_ts, pair)
        return current

    def mpdu_pair(self, direction: str, current: BeamPair, t: SimTime) -> BeamPair:
        if not self.scheme.intra_ppdu_switch:
            return current
        pair = self._select(direction, t)
        return pair if pair is not None else current

    def _families_of(self, direction: str, pair: BeamPair, now: SimTime) -> frozenset:
        """Families of the estimated paths the pair is mainlobe-aligned to."""
        report = self._usable_report(now)
        if report is None:
            return frozenset()
        ap = self.world.ap_position(now)
        tx_pos, rx_pos = (ap, report.est_position) if direction == DL else (report.est_position, ap)
        tx_ant, rx_ant = self.world.antennas(direction)
        return frozenset(
            path_family(p)
            for p in self.world.paths(tx_pos, rx_pos, now)
            if tx_ant.sector_of_world(p.departure_azimuth_deg) == pair.tx_sector
            and rx_ant.sector_of_world(p.arrival_azimuth_deg) == pair.rx_sector
        )

    def note_result(self, direction: str, pair: BeamPair, ok: bool, now: SimTime) -> None:
        if not ok:
            fams = self._families_of(direction, pair, now)
            if fams:
                demoted = self._avoid_fams.setdefault(direction, {})
                for fam in fams:
                    demoted[fam] = now + DEMOTION_TTL
            else:
                self._avoid.setdefault(direction, {})[pair] = now + DEMOTION_TTL
        self._switch_now[direction] = not ok

    def next_attempt_after_fail(self, direction: str, failed: BeamPair, now: SimTime) -> SimTime:
        """The failure just demoted the pair, so re-selecting from the same
        report can already yield a different candidate; retry immediately in
        that case. Only when selection still lands on the failed pair (no
        report, or every candidate demoted) does the retry wait for the next
        report to become available."""
        candidate = self._select(direction, now)
        if candidate is not None and candidate != failed:
            return now
        period = self.scheme.sensing_period
        latency = self.scheme.sensing_latency
        k = (now - latency) // period + 1
        return max(now, k * period + latency)


class OraclePolicy(BasePolicy):
    """Theoretical optimum: the true-position argmax pair at every PPDU and
    at every MPDU midpoint, with zero overhead."""

    def select_pair(self, direction: str, current: BeamPair, now: SimTime) -> BeamPair:
        pair = oracle_select_beam(self.world, direction, now)
        return pair if pair is not None else current

    def mpdu_pair(self, direction: str, current: BeamPair, t: SimTime) -> BeamPair:
        pair = oracle_select_beam(self.world, direction, t)
        return pair if pair is not None else current


def make_policy(scheme: SchemeKind, world: World, sensing_rng: RngStream) -> BasePolicy:
    if isinstance(scheme, BaselineScheme):
        return BaselinePolicy(world, scheme)
    if isinstance(scheme, IsacScheme):
        return IsacPolicy(world, scheme, sensing_rng)
    if isinstance(scheme, OracleScheme):
        return OraclePolicy(world)
    raise TypeError(f"unknown scheme {scheme!r}")
