"""Run-time world state shared by the MAC and the beam-management policies:
scenario geometry, mounted antennas, and node trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .geometry import Blocker, Position, RayPath, Scenario, enumerate_paths
from .kernel import SimTime
from .mobility import Trajectory
from .phy import MountedAntenna, PathProfile

DL = "DL"  # AP -> STA
UL = "UL"  # STA -> AP
DIRECTIONS = (DL, UL)


@dataclass
class World:
    scenario: Scenario
    ap_antenna: MountedAntenna
    sta_antenna: MountedAntenna
    ap_trajectory: Trajectory
    sta_trajectory: Trajectory
    # Memo of AP->STA path lists keyed by query time (see paths_for).
    _cache: dict = field(default_factory=dict)

    def ap_position(self, t: SimTime) -> Position:
        return self.ap_trajectory.position_at(t)

    def sta_position(self, t: SimTime) -> Position:
        return self.sta_trajectory.position_at(t)

    def endpoints(self, direction: str, t: SimTime) -> tuple[Position, Position]:
        """(tx_pos, rx_pos) for the given traffic direction."""
        ap = self.ap_position(t)
        sta = self.sta_position(t)
        return (ap, sta) if direction == DL else (sta, ap)

    def antennas(self, direction: str) -> tuple[MountedAntenna, MountedAntenna]:
        """(tx_antenna, rx_antenna) for the given traffic direction."""
        if direction == DL:
            return (self.ap_antenna, self.sta_antenna)
        return (self.sta_antenna, self.ap_antenna)

    def blockers_at(self, t: SimTime) -> Sequence[Blocker]:
        # Shipped scenarios use static blockers; moving entities are modeled
        # by the STA trajectory (the relative-motion effect is equivalent).
        return self.scenario.blockers

    def paths(self, tx_pos: Position, rx_pos: Position, t: SimTime) -> list[RayPath]:
        return enumerate_paths(self.scenario, tx_pos, rx_pos, blockers=self.blockers_at(t))

    def paths_for(self, direction: str, t: SimTime) -> list[RayPath]:
        # Policies and the transmit evaluation often query the same instant
        # repeatedly; positions (and hence paths) are pure functions of t.
        entry = self._cache.get(t)
        if entry is None:
            ap = self.ap_position(t)
            sta = self.sta_position(t)
            if len(self._cache) >= 16:
                self._cache.clear()
            entry = {DL: self.paths(ap, sta, t)}
            self._cache[t] = entry
        got = entry.get(direction)
        if got is None:
            # Propagation is reciprocal: the uplink path list is the downlink
            # list with legs reversed and the azimuth roles swapped.
            got = [
                RayPath(
                    kind=p.kind,
                    vertices=tuple(reversed(p.vertices)),
                    length_m=p.length_m,
                    extra_loss_db=p.extra_loss_db,
                    departure_azimuth_deg=p.arrival_azimuth_deg,
                    arrival_azimuth_deg=p.departure_azimuth_deg,
                    surface_index=p.surface_index,
                )
                for p in entry[DL]
            ]
            entry[direction] = got
        return got

    def profile_for(self, direction: str, t: SimTime):
        """PathProfile over paths_for(direction, t), memoized alongside it."""
        entry = self._cache.get(t)
        key = (direction, "profile")
        if entry is not None:
            prof = entry.get(key)
            if prof is not None:
                return prof
        paths = self.paths_for(direction, t)
        tx_ant, rx_ant = self.antennas(direction)
        prof = PathProfile(paths, self.scenario, tx_ant, rx_ant)
        self._cache[t][key] = prof
        return prof
