"""Trajectories: triangle-wave street walk against closed-form positions,
random-waypoint invariants (bounds, speed, keep-out), and determinism."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from sacsim.kernel import NS_PER_S, RngStream, seconds
from sacsim.mobility import (
    AvoidDisc,
    RandomWaypointTrajectory,
    StreetWalkTrajectory,
    Trajectory,
    advance_ticks,
)
from sacsim.geometry import Position


# -- street walk ----------------------------------------------------------------


def test_street_walk_closed_form_before_first_bounce():
    traj = StreetWalkTrajectory(x_range=(0.0, 30.0), lane_y=12.0, z=1.2, speed_mps=1.5)
    p = traj.position_at(seconds(10))
    assert p.x == pytest.approx(15.0)
    assert p.y == 12.0 and p.z == 1.2


def test_street_walk_bounces_at_both_ends():
    traj = StreetWalkTrajectory(x_range=(0.0, 10.0), lane_y=0.0, z=1.0, speed_mps=1.0)
    assert traj.position_at(seconds(10)).x == pytest.approx(10.0)
    assert traj.position_at(seconds(15)).x == pytest.approx(5.0)
    assert traj.position_at(seconds(20)).x == pytest.approx(0.0)
    assert traj.position_at(seconds(25)).x == pytest.approx(5.0)  # period 20 s


def test_street_walk_start_at_far_end_walks_down():
    traj = StreetWalkTrajectory(x_range=(0.0, 10.0), lane_y=0.0, z=1.0, speed_mps=1.0, start_x=10.0)
    assert traj.position_at(0).x == pytest.approx(10.0)
    assert traj.position_at(seconds(4)).x == pytest.approx(6.0)


def test_street_walk_no_bounce_clamps():
    traj = StreetWalkTrajectory(x_range=(0.0, 10.0), lane_y=0.0, z=1.0, speed_mps=2.0, bounce=False)
    assert traj.position_at(seconds(60)).x == pytest.approx(10.0)


def test_street_walk_zero_speed_and_bad_range():
    traj = StreetWalkTrajectory(x_range=(3.0, 9.0), lane_y=1.0, z=1.0, speed_mps=0.0, start_x=4.0)
    assert traj.position_at(seconds(99)).x == 4.0
    with pytest.raises(ValueError):
        StreetWalkTrajectory(x_range=(5.0, 5.0), lane_y=0.0, z=1.0, speed_mps=1.0)


@given(st.floats(0.1, 4.0), st.floats(0.0, 400.0))
def test_street_walk_stays_in_range(speed, t_s):
    traj = StreetWalkTrajectory(x_range=(2.0, 12.0), lane_y=0.0, z=1.0, speed_mps=speed)
    x = traj.position_at(int(t_s * NS_PER_S)).x
    assert 2.0 - 1e-9 <= x <= 12.0 + 1e-9


# -- random waypoint --------------------------------------------------------------


BOUNDS = ((0.0, 8.0), (0.0, 6.0))


def make_rw(seed=1, speed=1.0, avoid=(), pause_s=0.0):
    return RandomWaypointTrajectory(
        bounds=BOUNDS, z=1.2, speed_mps=speed, rng=RngStream(seed, "mobility"), pause_s=pause_s, avoid=avoid
    )


def test_waypoint_positions_stay_in_bounds():
    traj = make_rw(seed=5, speed=2.0)
    for k in range(0, 120):
        p = traj.position_at(k * NS_PER_S // 2)
        assert BOUNDS[0][0] - 1e-9 <= p.x <= BOUNDS[0][1] + 1e-9
        assert BOUNDS[1][0] - 1e-9 <= p.y <= BOUNDS[1][1] + 1e-9
        assert p.z == 1.2


def test_waypoint_speed_between_samples_never_exceeds_nominal():
    traj = make_rw(seed=2, speed=1.5)
    dt = NS_PER_S // 10
    prev = traj.position_at(0)
    for k in range(1, 300):
        cur = traj.position_at(k * dt)
        d = math.hypot(cur.x - prev.x, cur.y - prev.y)
        assert d <= 1.5 * (dt / NS_PER_S) + 1e-9
        prev = cur


def test_waypoint_deterministic_per_seed():
    a, b = make_rw(seed=9), make_rw(seed=9)
    ts = [0, 3 * NS_PER_S, 7 * NS_PER_S, 20 * NS_PER_S]
    assert [a.position_at(t) for t in ts] == [b.position_at(t) for t in ts]
    c = make_rw(seed=10)
    assert [a.position_at(t) for t in ts] != [c.position_at(t) for t in ts]


def test_waypoint_respects_keep_out_disc():
    disc = AvoidDisc(x=4.0, y=3.0, radius=1.0)
    traj = make_rw(seed=3, speed=1.0, avoid=(disc,))
    for k in range(0, 600):
        p = traj.position_at(k * NS_PER_S // 5)
        assert math.hypot(p.x - disc.x, p.y - disc.y) > disc.radius - 1e-6


def test_waypoint_pause_holds_position():
    traj = make_rw(seed=4, speed=1.0, pause_s=1.0)
    # Sample densely; during a pause two samples 0.1 s apart coincide.
    seen_pause = False
    prev = traj.position_at(0)
    for k in range(1, 1500):
        cur = traj.position_at(k * NS_PER_S // 10)
        if cur == prev:
            seen_pause = True
            break
        prev = cur
    assert seen_pause


def test_waypoint_zero_speed_is_static():
    traj = make_rw(seed=6, speed=0.0)
    assert traj.position_at(0) == traj.position_at(30 * NS_PER_S)


def test_waypoint_query_order_does_not_change_path():
    fwd, rnd = make_rw(seed=12), make_rw(seed=12)
    ts = [t * NS_PER_S for t in (1, 2, 5, 9, 14)]
    a = [fwd.position_at(t) for t in ts]
    b = [rnd.position_at(t) for t in (14 * NS_PER_S,)] and [rnd.position_at(t) for t in ts]
    assert a == b


# -- helpers ---------------------------------------------------------------------


def test_static_trajectory_and_ticks():
    traj = Trajectory(Position(1.0, 2.0, 3.0))
    assert traj.speed_mps == 0.0
    ticks = advance_ticks(traj, NS_PER_S, 3 * NS_PER_S)
    assert [t for t, _ in ticks] == [NS_PER_S, 2 * NS_PER_S, 3 * NS_PER_S]
    assert all(p == Position(1.0, 2.0, 3.0) for _, p in ticks)
    with pytest.raises(ValueError):
        advance_ticks(traj, 0, NS_PER_S)
