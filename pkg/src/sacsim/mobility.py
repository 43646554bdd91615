"""Node trajectories: random waypoint, street walk, and static placement.

Positions are evaluated lazily at exact virtual times (piecewise-linear), so
SNR checks inside a PPDU see true positions rather than tick-sampled ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .geometry import Position
from .kernel import NS_PER_S, RngStream, SimTime

_WAYPOINT_TRIES = 64


@dataclass(frozen=True, slots=True)
class AvoidDisc:
    """Horizontal keep-out region (e.g. a furniture footprint)."""

    x: float
    y: float
    radius: float


class Trajectory:
    """Base class; a static position."""

    def __init__(self, pos: Position):
        self._pos = pos

    def position_at(self, t: SimTime) -> Position:
        return self._pos

    @property
    def speed_mps(self) -> float:
        return 0.0


class StaticTrajectory(Trajectory):
    pass


class StreetWalkTrajectory(Trajectory):
    """Back-and-forth linear walk along the x axis at fixed y (lane) and z."""

    def __init__(
        self,
        x_range: tuple[float, float],
        lane_y: float,
        z: float,
        speed_mps: float,
        start_x: Optional[float] = None,
        bounce: bool = True,
    ):
        if x_range[1] <= x_range[0]:
            raise ValueError("empty x_range")
        self.x_range = x_range
        self.lane_y = lane_y
        self.z = z
        self._speed = speed_mps
        self.start_x = x_range[0] if start_x is None else start_x
        self.bounce = bounce

    @property
    def speed_mps(self) -> float:
        return self._speed

    def position_at(self, t: SimTime) -> Position:
        if self._speed == 0.0:
            return Position(self.start_x, self.lane_y, self.z)
        span = self.x_range[1] - self.x_range[0]
        s = (self.start_x - self.x_range[0]) + self._speed * (t / NS_PER_S)
        if self.bounce:
            # Triangle wave over [0, span].
            s = s % (2.0 * span)
            if s > span:
                s = 2.0 * span - s
        else:
            s = min(s, span)
        return Position(self.x_range[0] + s, self.lane_y, self.z)


@dataclass(slots=True)
class _Leg:
    t0: SimTime
    t1: SimTime
    start: tuple[float, float, float]
    vel: tuple[float, float, float]  # metres per second


class RandomWaypointTrajectory(Trajectory):
    """Uniform waypoints in a rectangle at fixed height, constant speed,
    optional pause. Waypoint legs avoid configured keep-out discs (walkers go
    around furniture); draws come from the run's mobility stream and are
    generated strictly in leg order, so the sequence is seed-deterministic."""

    def __init__(
        self,
        bounds: tuple[tuple[float, float], tuple[float, float]],
        z: float,
        speed_mps: float,
        rng: RngStream,
        pause_s: float = 0.0,
        start: Optional[tuple[float, float]] = None,
        avoid: Sequence[AvoidDisc] = (),
    ):
        if speed_mps < 0:
            raise ValueError("speed must be nonnegative")
        self.bounds = bounds
        self.z = z
        self._speed = speed_mps
        self.pause_s = pause_s
        self.rng = rng
        self.avoid = tuple(avoid)
        if start is None:
            start = self._draw_point(none_ok_from=None)
        self._legs: list[_Leg] = []
        self._cursor = (float(start[0]), float(start[1]), z)
        self._horizon: SimTime = 0
        self._hint = 0

    @property
    def speed_mps(self) -> float:
        return self._speed

    def _clear_of_avoid(self, p: tuple[float, float]) -> bool:
        return all((p[0] - a.x) ** 2 + (p[1] - a.y) ** 2 > a.radius**2 for a in self.avoid)

    def _segment_clear(self, p: tuple[float, float], q: tuple[float, float]) -> bool:
        for a in self.avoid:
            dx = q[0] - p[0]
            dy = q[1] - p[1]
            fx = p[0] - a.x
            fy = p[1] - a.y
            den = dx * dx + dy * dy
            t = 0.0 if den == 0 else max(0.0, min(1.0, -(fx * dx + fy * dy) / den))
            cx = fx + t * dx
            cy = fy + t * dy
            if cx * cx + cy * cy <= a.radius**2:
                return False
        return True

    def _draw_point(self, none_ok_from) -> tuple[float, float]:
        (x0, x1), (y0, y1) = self.bounds
        p = None
        for _ in range(_WAYPOINT_TRIES):
            cand = (self.rng.uniform(x0, x1), self.rng.uniform(y0, y1))
            if not self._clear_of_avoid(cand):
                continue
            if none_ok_from is not None and not self._segment_clear(none_ok_from, cand):
                continue
            p = cand
            break
        if p is None:
            p = (self.rng.uniform(x0, x1), self.rng.uniform(y0, y1))
        return p

    def _extend_to(self, t: SimTime) -> None:
        while self._horizon <= t:
            x, y, z = self._cursor
            if self._speed == 0.0:
                self._legs.append(_Leg(self._horizon, 2**63 - 1, self._cursor, (0.0, 0.0, 0.0)))
                self._horizon = 2**63 - 1
                return
            wx, wy = self._draw_point(none_ok_from=(x, y))
            dist = math.hypot(wx - x, wy - y)
            dur = max(1, int(round(dist / self._speed * NS_PER_S)))
            vel = ((wx - x) / (dur / NS_PER_S), (wy - y) / (dur / NS_PER_S), 0.0)
            self._legs.append(_Leg(self._horizon, self._horizon + dur, self._cursor, vel))
            self._horizon += dur
            self._cursor = (wx, wy, z)
            if self.pause_s > 0:
                pdur = int(round(self.pause_s * NS_PER_S))
                self._legs.append(_Leg(self._horizon, self._horizon + pdur, self._cursor, (0.0, 0.0, 0.0)))
                self._horizon += pdur

    def position_at(self, t: SimTime) -> Position:
        if t < 0:
            raise ValueError("t must be nonnegative")
        self._extend_to(t)
        legs = self._legs
        i = min(self._hint, len(legs) - 1)
        while i > 0 and t < legs[i].t0:
            i -= 1
        while i < len(legs) - 1 and t >= legs[i].t1:
            i += 1
        self._hint = i
        leg = legs[i]
        dt = (min(t, leg.t1) - leg.t0) / NS_PER_S
        return Position(leg.start[0] + leg.vel[0] * dt, leg.start[1] + leg.vel[1] * dt, leg.start[2])


def advance_ticks(traj: Trajectory, tick_interval: SimTime, duration: SimTime) -> list[tuple[SimTime, Position]]:
    """Positions at every tick in (0, duration]; bookkeeping only, since SNR
    evaluation always uses exact positions from position_at."""
    if tick_interval <= 0:
        raise ValueError("tick_interval must be positive")
    out = []
    t = tick_interval
    while t <= duration:
        out.append((t, traj.position_at(t)))
        t += tick_interval
    return out
