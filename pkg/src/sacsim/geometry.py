"""First-order geometric ray model: LoS plus single-bounce image-method
reflections off axis-aligned surfaces, with cylindrical blockers.

All positions are metres. Paths carry enough information (length, extra loss,
departure/arrival azimuths) for the PHY layer to turn them into link budgets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

SPEED_OF_LIGHT = 299_792_458.0

# Parametric tolerance used to decide whether a crossing is strictly interior
# to a segment (endpoints touching a surface do not count as occlusion).
_T_EPS = 1e-9


class DegenerateGeometry(Exception):
    """Raised when tx and rx coincide."""


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def distance_to(self, other: "Position") -> float:
        return math.dist(self.as_tuple(), other.as_tuple())


@dataclass(frozen=True, slots=True)
class Surface:
    """Axis-aligned rectangle. ``normal_axis`` is 0/1/2 for x/y/z; ``coord`` is
    the plane position along that axis; ``u_range``/``v_range`` bound the two
    remaining axes in ascending axis order."""

    normal_axis: int
    coord: float
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    reflection_loss_db: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.reflection_loss_db < 0:
            raise ValueError("reflection_loss_db must be nonnegative")


@dataclass(frozen=True, slots=True)
class Blocker:
    """Vertical cylinder. ``penetration_loss_db`` of ``inf`` means opaque."""

    center: Position  # z is the cylinder base
    radius: float
    height: float
    penetration_loss_db: float = math.inf
    name: str = ""

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("blocker radius must be positive")


@dataclass(slots=True)
class Scenario:
    kind: str  # "living_room" | "street_canyon"
    bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    surfaces: list[Surface]
    blockers: list[Blocker]
    ap_position: Position
    carrier_freq_hz: float
    noise_dbm: float
    tx_power_dbm: float

    def __post_init__(self):
        if self.carrier_freq_hz <= 45e9:
            raise ValueError("carrier frequency must be above 45 GHz")
        if not self.contains(self.ap_position):
            raise ValueError("AP position outside scenario bounds")

    def contains(self, p: Position) -> bool:
        (x0, x1), (y0, y1), (z0, z1) = self.bounds
        return x0 <= p.x <= x1 and y0 <= p.y <= y1 and z0 <= p.z <= z1


class RayPath(NamedTuple):
    kind: str  # "los" | "reflection"
    vertices: tuple[tuple[float, float, float], ...]
    length_m: float
    extra_loss_db: float
    departure_azimuth_deg: float
    arrival_azimuth_deg: float
    surface_index: Optional[int] = None


def azimuth_deg(dx: float, dy: float) -> float:
    """Azimuth of the horizontal direction (dx, dy), normalized to [0, 360)."""
    a = math.degrees(math.atan2(dy, dx)) % 360.0
    # Float modulo of a tiny negative can round up to exactly 360.0.
    return 0.0 if a >= 360.0 else a


def path_loss_db(path: RayPath, freq_hz: float) -> float:
    """Free-space loss over the path length plus accumulated extra losses."""
    if path.length_m <= 0:
        raise ValueError("path length must be positive")
    fspl = 20.0 * math.log10(4.0 * math.pi * path.length_m * freq_hz / SPEED_OF_LIGHT)
    return fspl + path.extra_loss_db


def _segment_blocker_loss(p: tuple, q: tuple, blockers: Sequence[Blocker]) -> float:
    """Total penetration loss a segment picks up from blockers (inf = opaque hit)."""
    total = 0.0
    px, py, pz = p
    qx, qy, qz = q
    dx = qx - px
    dy = qy - py
    dz = qz - pz
    for b in blockers:
        cx = b.center.x
        cy = b.center.y
        # Quadratic for |p2d + t*d2d - c|^2 = r^2.
        a = dx * dx + dy * dy
        fx = px - cx
        fy = py - cy
        if a < 1e-18:
            # Vertical segment: inside footprint iff start point is.
            if fx * fx + fy * fy >= b.radius * b.radius:
                continue
            t1, t2 = 0.0, 1.0
        else:
            bb = 2.0 * (fx * dx + fy * dy)
            cc = fx * fx + fy * fy - b.radius * b.radius
            disc = bb * bb - 4.0 * a * cc
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            t1 = (-bb - sq) / (2.0 * a)
            t2 = (-bb + sq) / (2.0 * a)
            if t2 <= _T_EPS or t1 >= 1.0 - _T_EPS:
                continue
            t1 = max(t1, 0.0)
            t2 = min(t2, 1.0)
        # Height check over the intersected parameter interval.
        z_a = pz + t1 * dz
        z_b = pz + t2 * dz
        z_lo = min(z_a, z_b)
        z_hi = max(z_a, z_b)
        if z_hi < b.center.z or z_lo > b.center.z + b.height:
            continue
        total += b.penetration_loss_db
        if math.isinf(total):
            return math.inf
    return total


def _segment_crosses_surface(p: tuple, q: tuple, s: Surface) -> bool:
    """True if the segment strictly crosses the rectangle's interior."""
    axis = s.normal_axis
    pa = p[axis]
    qa = q[axis]
    da = qa - pa
    if abs(da) < 1e-15:
        return False
    t = (s.coord - pa) / da
    if t <= _T_EPS or t >= 1.0 - _T_EPS:
        return False
    others = [i for i in (0, 1, 2) if i != axis]
    u = p[others[0]] + t * (q[others[0]] - p[others[0]])
    v = p[others[1]] + t * (q[others[1]] - p[others[1]])
    return s.u_range[0] <= u <= s.u_range[1] and s.v_range[0] <= v <= s.v_range[1]


def _segment_extra_loss(
    p: tuple,
    q: tuple,
    blockers: Sequence[Blocker],
    surfaces: Sequence[Surface],
    skip_surface: Optional[int] = None,
) -> float:
    """Extra loss over a segment; inf means the segment is fully occluded."""
    surf, blk = _compiled_geometry(surfaces, blockers)
    return _segment_extra_loss_fast(p, q, surf, blk, -1 if skip_surface is None else skip_surface)


_OTHER_AXES = ((1, 2), (0, 2), (0, 1))

# Flattened geometry tuples keyed by the identity of the (surfaces, blockers)
# sequences. Entries hold strong references to the keyed sequences, so an id
# can never be recycled while its cache entry is alive.
_GEOM_CACHE: dict = {}


def _compiled_geometry(surfaces: Sequence[Surface], blockers: Sequence[Blocker]) -> tuple:
    key = (id(surfaces), id(blockers))
    hit = _GEOM_CACHE.get(key)
    if hit is not None and hit[0] is surfaces and hit[1] is blockers:
        return hit[2]
    surf = tuple(
        (s.normal_axis, s.coord, s.u_range[0], s.u_range[1], s.v_range[0], s.v_range[1])
        + _OTHER_AXES[s.normal_axis]
        + (s.reflection_loss_db,)
        for s in surfaces
    )
    blk = tuple(
        (b.center.x, b.center.y, b.radius * b.radius, b.center.z, b.center.z + b.height, b.penetration_loss_db)
        for b in blockers
    )
    if len(_GEOM_CACHE) >= 64:
        _GEOM_CACHE.clear()
    _GEOM_CACHE[key] = (surfaces, blockers, (surf, blk))
    return surf, blk


def _segment_extra_loss_fast(p: tuple, q: tuple, surf: tuple, blk: tuple, skip: int) -> float:
    """Same decisions and arithmetic as the per-object helpers above, but over
    pre-flattened geometry tuples; this is the hot loop of path enumeration."""
    px, py, pz = p
    qx, qy, qz = q
    for i, (axis, coord, u0, u1, v0, v1, o0, o1, _rl) in enumerate(surf):
        if i == skip:
            continue
        pa = p[axis]
        da = q[axis] - pa
        if -1e-15 < da < 1e-15:
            continue
        t = (coord - pa) / da
        if t <= _T_EPS or t >= 1.0 - _T_EPS:
            continue
        u = p[o0] + t * (q[o0] - p[o0])
        if u < u0 or u > u1:
            continue
        v = p[o1] + t * (q[o1] - p[o1])
        if v0 <= v <= v1:
            return math.inf
    total = 0.0
    dx = qx - px
    dy = qy - py
    dz = qz - pz
    a = dx * dx + dy * dy
    for cx, cy, r2, z0, z1, loss in blk:
        fx = px - cx
        fy = py - cy
        if a < 1e-18:
            if fx * fx + fy * fy >= r2:
                continue
            t1, t2 = 0.0, 1.0
        else:
            bb = 2.0 * (fx * dx + fy * dy)
            cc = fx * fx + fy * fy - r2
            disc = bb * bb - 4.0 * a * cc
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            t1 = (-bb - sq) / (2.0 * a)
            t2 = (-bb + sq) / (2.0 * a)
            if t2 <= _T_EPS or t1 >= 1.0 - _T_EPS:
                continue
            t1 = max(t1, 0.0)
            t2 = min(t2, 1.0)
        z_a = pz + t1 * dz
        z_b = pz + t2 * dz
        if z_a > z_b:
            z_a, z_b = z_b, z_a
        if z_b < z0 or z_a > z1:
            continue
        total += loss
        if math.isinf(total):
            return math.inf
    return total


def enumerate_paths(
    scenario: Scenario,
    tx: Position,
    rx: Position,
    blockers: Optional[Sequence[Blocker]] = None,
) -> list[RayPath]:
    """LoS plus one image-method reflection per visible surface, sorted by
    total loss ascending. Blockers with finite penetration loss attenuate;
    opaque blockers (and surface crossings) remove a path."""
    if tx.as_tuple() == rx.as_tuple():
        raise DegenerateGeometry("tx and rx coincide")
    if blockers is None:
        blockers = scenario.blockers
    surfaces = scenario.surfaces
    surf, blk = _compiled_geometry(surfaces, blockers)
    t = tx.as_tuple()
    r = rx.as_tuple()
    paths: list[RayPath] = []

    extra = _segment_extra_loss_fast(t, r, surf, blk, -1)
    if not math.isinf(extra):
        d = math.dist(t, r)
        dep = azimuth_deg(r[0] - t[0], r[1] - t[1])
        arr = azimuth_deg(t[0] - r[0], t[1] - r[1])
        paths.append(
            RayPath(
                kind="los",
                vertices=(t, r),
                length_m=d,
                extra_loss_db=extra,
                departure_azimuth_deg=dep,
                arrival_azimuth_deg=arr,
            )
        )

    for si, (axis, coord, u0, u1, v0, v1, o0, o1, refl_loss) in enumerate(surf):
        # Mirror tx across the surface plane; off-axis components are t's.
        ma = 2.0 * coord - t[axis]
        da = r[axis] - ma
        if abs(da) < 1e-15:
            continue  # tx and rx both on the plane: no reflection geometry
        tt = (coord - ma) / da
        if tt <= 0.0 or tt >= 1.0:
            continue
        u = t[o0] + tt * (r[o0] - t[o0])
        if u < u0 or u > u1:
            continue
        v = t[o1] + tt * (r[o1] - t[o1])
        if v < v0 or v > v1:
            continue
        rpa = ma + tt * (r[axis] - ma)
        if axis == 0:
            rp = (rpa, u, v)
        elif axis == 1:
            rp = (u, rpa, v)
        else:
            rp = (u, v, rpa)
        loss1 = _segment_extra_loss_fast(t, rp, surf, blk, si)
        if math.isinf(loss1):
            continue
        loss2 = _segment_extra_loss_fast(rp, r, surf, blk, si)
        if math.isinf(loss2):
            continue
        length = math.dist(t, rp) + math.dist(rp, r)
        dep = azimuth_deg(rp[0] - t[0], rp[1] - t[1])
        arr = azimuth_deg(rp[0] - r[0], rp[1] - r[1])
        paths.append(
            RayPath(
                kind="reflection",
                vertices=(t, rp, r),
                length_m=length,
                extra_loss_db=refl_loss + loss1 + loss2,
                departure_azimuth_deg=dep,
                arrival_azimuth_deg=arr,
                surface_index=si,
            )
        )

    freq = scenario.carrier_freq_hz
    paths.sort(key=lambda p: path_loss_db(p, freq))
    return paths
