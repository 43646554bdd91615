"""Sectorized antennas, link SNR, and the SNR -> error PHY abstraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet, NamedTuple, Optional, Sequence

from .geometry import Blocker, Position, RayPath, Scenario, enumerate_paths, path_loss_db

# Finite stand-in for "no signal": far below any usable threshold while
# keeping all dB arithmetic total.
NO_SIGNAL_SNR_DB = -1.0e9


class NoLink(Exception):
    """Raised when no beam pair yields a usable link."""


class UnknownMcs(Exception):
    """Raised for an MCS index absent from the table."""


class BeamPair(NamedTuple):
    tx_sector: int
    rx_sector: int


@dataclass(frozen=True, slots=True)
class AntennaModel:
    """Flat-top sectorized pattern: sector s covers the azimuth arc
    [s*360/N, (s+1)*360/N) in the antenna's own frame."""

    num_sectors: int
    mainlobe_gain_db: float
    sidelobe_gain_db: float

    def __post_init__(self):
        if self.num_sectors < 1:
            raise ValueError("num_sectors must be positive")
        if self.sidelobe_gain_db >= self.mainlobe_gain_db:
            raise ValueError("sidelobe gain must be below mainlobe gain")

    @property
    def sector_width_deg(self) -> float:
        return 360.0 / self.num_sectors

    def sector_of(self, azimuth_deg: float) -> int:
        return int((azimuth_deg % 360.0) / self.sector_width_deg) % self.num_sectors


def sector_gain_db(antenna: AntennaModel, sector: int, azimuth_deg: float) -> float:
    if sector >= antenna.num_sectors:
        raise ValueError("sector index out of range")
    if antenna.sector_of(azimuth_deg) == sector:
        return antenna.mainlobe_gain_db
    return antenna.sidelobe_gain_db


@dataclass(frozen=True, slots=True)
class MountedAntenna:
    """An antenna model plus its mounting orientation in world azimuth."""

    model: AntennaModel
    orientation_deg: float = 0.0

    def local_azimuth(self, world_azimuth_deg: float) -> float:
        return (world_azimuth_deg - self.orientation_deg) % 360.0

    def sector_of_world(self, world_azimuth_deg: float) -> int:
        return self.model.sector_of(self.local_azimuth(world_azimuth_deg))

    def gain_db(self, sector: int, world_azimuth_deg: float) -> float:
        return sector_gain_db(self.model, sector, self.local_azimuth(world_azimuth_deg))


class PathProfile:
    """Per-path link budget precomputed for one path list and antenna pair,
    so that many candidate beam pairs can be scored cheaply. All SNR queries
    in the simulator go through here, keeping the arithmetic identical."""

    __slots__ = ("rx_dbm", "tx_sec", "rx_sec", "tx_gains", "rx_gains", "noise_dbm")

    def __init__(
        self,
        paths: Sequence[RayPath],
        scenario: Scenario,
        tx_antenna: MountedAntenna,
        rx_antenna: MountedAntenna,
    ):
        freq = scenario.carrier_freq_hz
        tx_pw = scenario.tx_power_dbm
        self.noise_dbm = scenario.noise_dbm
        # rx_dbm holds the budget before antenna gains; tx_sec/rx_sec the
        # sector whose mainlobe covers each path's azimuth at that end.
        self.rx_dbm = [tx_pw - path_loss_db(p, freq) for p in paths]
        self.tx_sec = [tx_antenna.sector_of_world(p.departure_azimuth_deg) for p in paths]
        self.rx_sec = [rx_antenna.sector_of_world(p.arrival_azimuth_deg) for p in paths]
        self.tx_gains = (tx_antenna.model.mainlobe_gain_db, tx_antenna.model.sidelobe_gain_db)
        self.rx_gains = (rx_antenna.model.mainlobe_gain_db, rx_antenna.model.sidelobe_gain_db)

    def snr_db(self, pair: BeamPair) -> float:
        if not self.rx_dbm:
            return NO_SIGNAL_SNR_DB
        ts, rs = pair
        tm, tside = self.tx_gains
        rm, rside = self.rx_gains
        power_mw = 0.0
        for base, psec_t, psec_r in zip(self.rx_dbm, self.tx_sec, self.rx_sec):
            rx_dbm = base + (tm if psec_t == ts else tside) + (rm if psec_r == rs else rside)
            power_mw += 10.0 ** (rx_dbm / 10.0)
        if power_mw <= 0.0:
            return NO_SIGNAL_SNR_DB
        return 10.0 * math.log10(power_mw) - self.noise_dbm


def snr_from_paths(
    paths: Sequence[RayPath],
    scenario: Scenario,
    tx_antenna: MountedAntenna,
    rx_antenna: MountedAntenna,
    pair: BeamPair,
) -> float:
    """Power-sum the per-path link budgets under the given beam pair."""
    if not paths:
        return NO_SIGNAL_SNR_DB
    if pair.tx_sector >= tx_antenna.model.num_sectors or pair.rx_sector >= rx_antenna.model.num_sectors:
        raise ValueError("sector index out of range")
    return PathProfile(paths, scenario, tx_antenna, rx_antenna).snr_db(pair)


def link_snr_db(
    scenario: Scenario,
    tx_pos: Position,
    rx_pos: Position,
    tx_antenna: MountedAntenna,
    rx_antenna: MountedAntenna,
    pair: BeamPair,
    blockers: Optional[Sequence[Blocker]] = None,
) -> float:
    paths = enumerate_paths(scenario, tx_pos, rx_pos, blockers=blockers)
    return snr_from_paths(paths, scenario, tx_antenna, rx_antenna, pair)


def best_beam_pair_from_paths(
    paths: Sequence[RayPath],
    scenario: Scenario,
    tx_antenna: MountedAntenna,
    rx_antenna: MountedAntenna,
    avoid: Optional[AbstractSet[BeamPair]] = None,
    profile: Optional[PathProfile] = None,
) -> BeamPair:
    """Exact argmax of snr_from_paths over all N x N pairs, ties broken by
    lowest (tx_sector, rx_sector). ``profile`` may pass in a precomputed
    PathProfile over the same paths/antennas to avoid rebuilding one.

    Only sectors whose mainlobe covers some path's departure (resp. arrival)
    azimuth can appear in an argmax: with a strict mainlobe/sidelobe gap,
    swapping any other sector for the strongest path's sector strictly
    increases the power sum. Searching that candidate set is therefore
    equivalent to the full N x N search, including the tie-break.

    ``avoid`` is a set of pairs the caller has field evidence against (they
    failed despite looking good on paper); the best non-avoided candidate is
    returned instead. If every candidate is avoided, the unrestricted argmax
    is returned.
    """
    if not paths:
        raise NoLink("no propagation paths between tx and rx")
    if profile is None:
        profile = PathProfile(paths, scenario, tx_antenna, rx_antenna)
    tx_sectors = sorted(set(profile.tx_sec))
    rx_sectors = sorted(set(profile.rx_sec))
    best_pair: Optional[BeamPair] = None
    best_snr = -math.inf
    allowed_pair: Optional[BeamPair] = None
    allowed_snr = -math.inf
    for ts in tx_sectors:
        for rs in rx_sectors:
            pair = BeamPair(ts, rs)
            snr = profile.snr_db(pair)
            if snr > best_snr or (snr == best_snr and pair < best_pair):
                best_snr, best_pair = snr, pair
            if avoid and pair in avoid:
                continue
            if snr > allowed_snr or (snr == allowed_snr and (allowed_pair is None or pair < allowed_pair)):
                allowed_snr, allowed_pair = snr, pair
    return allowed_pair if allowed_pair is not None else best_pair


def best_beam_pair(
    scenario: Scenario,
    tx_pos: Position,
    rx_pos: Position,
    tx_antenna: MountedAntenna,
    rx_antenna: MountedAntenna,
    blockers: Optional[Sequence[Blocker]] = None,
) -> BeamPair:
    paths = enumerate_paths(scenario, tx_pos, rx_pos, blockers=blockers)
    return best_beam_pair_from_paths(paths, scenario, tx_antenna, rx_antenna)


def preamble_sync_ok(snr_db: float, sync_threshold_db: float) -> bool:
    return snr_db >= sync_threshold_db


@dataclass(frozen=True, slots=True)
class McsEntry:
    midpoint_db: float
    slope_db: float
    phy_rate_mbps: float


@dataclass(slots=True)
class McsTable:
    entries: dict[int, McsEntry]
    reference_length_bits: int = 12_000

    def entry(self, mcs: int) -> McsEntry:
        try:
            return self.entries[mcs]
        except KeyError:
            raise UnknownMcs(f"MCS index {mcs} not in table") from None

    def phy_rate_bps(self, mcs: int) -> float:
        return self.entry(mcs).phy_rate_mbps * 1e6

    def mpdu_success_prob(self, snr_db: float, mcs: int, mpdu_bits: int) -> float:
        """1 - PER, with a logistic reference PER in SNR and independent-segment
        scaling in frame length: PER(L) = 1 - (1 - PER_ref)^(L / L_ref)."""
        if mpdu_bits <= 0:
            raise ValueError("mpdu_bits must be positive")
        e = self.entry(mcs)
        x = (snr_db - e.midpoint_db) / e.slope_db
        if x > 60.0:
            per_ref = 0.0
        elif x < -60.0:
            per_ref = 1.0
        else:
            per_ref = 1.0 / (1.0 + math.exp(x))
        return (1.0 - per_ref) ** (mpdu_bits / self.reference_length_bits)


def default_mcs_table() -> McsTable:
    """Fallback table used when no MCS file is configured. Index 14 is the
    run default; rates are config conventions, not standard values."""
    entries = {}
    for idx in range(15):
        entries[idx] = McsEntry(
            midpoint_db=-6.0 + idx * 0.8,
            slope_db=1.0,
            phy_rate_mbps=30.0 * (idx + 1) * 2.0,
        )
    # Pin the default operating point used by the shipped configs.
    entries[14] = McsEntry(midpoint_db=5.0, slope_db=1.0, phy_rate_mbps=480.0)
    return McsTable(entries=entries)
