"""Antennas, link budgets, beam-pair search, and the MCS error model.

Oracles: sector gains against the flat-top definition, SNR against a hand
power-sum of per-path budgets, and the pruned beam search against a literal
N x N brute force.
"""

import math

import pytest
from hypothesis import given, settings, strategies as st

from sacsim.geometry import Position, RayPath, Scenario, azimuth_deg, path_loss_db
from sacsim.phy import (
    NO_SIGNAL_SNR_DB,
    AntennaModel,
    BeamPair,
    McsEntry,
    McsTable,
    MountedAntenna,
    NoLink,
    PathProfile,
    UnknownMcs,
    best_beam_pair_from_paths,
    default_mcs_table,
    preamble_sync_ok,
    sector_gain_db,
    snr_from_paths,
)


def make_scenario(tx_power_dbm=0.0, noise_dbm=-74.0):
    return Scenario(
        kind="test",
        bounds=((0.0, 100.0), (0.0, 100.0), (0.0, 10.0)),
        surfaces=[],
        blockers=[],
        ap_position=Position(5.0, 5.0, 2.0),
        carrier_freq_hz=60.0e9,
        noise_dbm=noise_dbm,
        tx_power_dbm=tx_power_dbm,
    )


def make_path(dep_az, arr_az, length_m=10.0, extra_loss_db=0.0):
    return RayPath(
        kind="los",
        vertices=((0.0, 0.0, 1.0), (length_m, 0.0, 1.0)),
        length_m=length_m,
        extra_loss_db=extra_loss_db,
        departure_azimuth_deg=dep_az,
        arrival_azimuth_deg=arr_az,
    )


def antenna(n=18, main=15.0, side=3.0, orientation=0.0):
    return MountedAntenna(AntennaModel(n, main, side), orientation_deg=orientation)


# -- antenna model ----------------------------------------------------------


def test_sector_of_covers_arcs():
    m = AntennaModel(18, 15.0, 3.0)
    assert m.sector_width_deg == 20.0
    assert m.sector_of(0.0) == 0
    assert m.sector_of(19.999) == 0
    assert m.sector_of(20.0) == 1
    assert m.sector_of(359.999) == 17
    assert m.sector_of(360.0) == 0
    assert m.sector_of(-10.0) == 17


def test_sector_gain_flat_top():
    m = AntennaModel(12, 15.0, 3.0)
    assert sector_gain_db(m, 0, 15.0) == 15.0
    assert sector_gain_db(m, 1, 15.0) == 3.0
    with pytest.raises(ValueError):
        sector_gain_db(m, 12, 0.0)


def test_antenna_model_validation():
    with pytest.raises(ValueError):
        AntennaModel(0, 15.0, 3.0)
    with pytest.raises(ValueError):
        AntennaModel(8, 3.0, 3.0)


def test_mounted_orientation_shifts_sector_frame():
    a = antenna(n=18, orientation=30.0)
    # World azimuth 30 deg is local 0 -> sector 0.
    assert a.sector_of_world(30.0) == 0
    assert a.sector_of_world(29.999) == 17
    assert a.gain_db(0, 30.0) == 15.0
    assert a.gain_db(0, 55.0) == 3.0


@given(st.floats(0.0, 360.0, allow_nan=False), st.floats(-720.0, 720.0, allow_nan=False))
def test_orientation_invariance(orient, world_az):
    """Rotating the mount and the world azimuth together leaves gains fixed."""
    base = antenna(orientation=0.0)
    rot = antenna(orientation=orient)
    s = base.sector_of_world(world_az)
    assert rot.gain_db(s, world_az + orient) == base.gain_db(s, world_az)


# -- SNR: hand power-sum oracle ----------------------------------------------


def test_snr_single_path_hand_budget():
    scen = make_scenario(tx_power_dbm=10.0)
    p = make_path(0.0, 180.0, length_m=10.0, extra_loss_db=2.0)
    tx = antenna()
    rx = antenna()
    pair = BeamPair(tx.sector_of_world(0.0), rx.sector_of_world(180.0))
    snr = snr_from_paths([p], scen, tx, rx, pair)
    expect = 10.0 - path_loss_db(p, scen.carrier_freq_hz) + 15.0 + 15.0 - (-74.0)
    assert snr == pytest.approx(expect, abs=1e-9)


def test_snr_two_paths_power_sum():
    scen = make_scenario()
    p1 = make_path(10.0, 190.0, length_m=5.0)
    p2 = make_path(90.0, 270.0, length_m=8.0, extra_loss_db=6.0)
    tx = antenna()
    rx = antenna()
    pair = BeamPair(tx.sector_of_world(10.0), rx.sector_of_world(190.0))
    # Hand-sum: path 1 aligned both ends, path 2 sidelobe both ends.
    b1 = 0.0 - path_loss_db(p1, scen.carrier_freq_hz) + 15.0 + 15.0
    b2 = 0.0 - path_loss_db(p2, scen.carrier_freq_hz) + 3.0 + 3.0
    expect = 10.0 * math.log10(10 ** (b1 / 10.0) + 10 ** (b2 / 10.0)) + 74.0
    assert snr_from_paths([p1, p2], scen, tx, rx, pair) == pytest.approx(expect, abs=1e-9)


def test_snr_no_paths_is_no_signal():
    scen = make_scenario()
    pair = BeamPair(0, 0)
    assert snr_from_paths([], scen, antenna(), antenna(), pair) == NO_SIGNAL_SNR_DB
    assert PathProfile([], scen, antenna(), antenna()).snr_db(pair) == NO_SIGNAL_SNR_DB


def test_snr_rejects_out_of_range_sector():
    scen = make_scenario()
    with pytest.raises(ValueError):
        snr_from_paths([make_path(0.0, 180.0)], scen, antenna(n=8), antenna(n=8), BeamPair(8, 0))


def test_profile_matches_snr_from_paths():
    scen = make_scenario()
    paths = [make_path(33.0, 201.0), make_path(140.0, 320.0, extra_loss_db=9.0)]
    tx, rx = antenna(), antenna(orientation=45.0)
    prof = PathProfile(paths, scen, tx, rx)
    for ts in range(0, 18, 5):
        for rs in range(0, 18, 5):
            pair = BeamPair(ts, rs)
            assert prof.snr_db(pair) == pytest.approx(
                snr_from_paths(paths, scen, tx, rx, pair), abs=1e-12
            )


# -- beam-pair search ---------------------------------------------------------


def brute_force_best(paths, scen, tx, rx):
    best, best_snr = None, -math.inf
    for ts in range(tx.model.num_sectors):
        for rs in range(rx.model.num_sectors):
            pair = BeamPair(ts, rs)
            snr = snr_from_paths(paths, scen, tx, rx, pair)
            if snr > best_snr or (snr == best_snr and pair < best):
                best, best_snr = pair, snr
    return best


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(0.0, 359.99),
            st.floats(0.0, 359.99),
            st.floats(1.0, 40.0),
            st.floats(0.0, 25.0),
        ),
        min_size=1,
        max_size=4,
    ),
    st.sampled_from([6, 12, 18]),
)
def test_best_pair_equals_brute_force(path_specs, n):
    scen = make_scenario()
    paths = [make_path(d, a, length_m=l, extra_loss_db=x) for d, a, l, x in path_specs]
    tx, rx = antenna(n=n), antenna(n=n, orientation=17.0)
    assert best_beam_pair_from_paths(paths, scen, tx, rx) == brute_force_best(paths, scen, tx, rx)


def test_best_pair_no_paths_raises():
    with pytest.raises(NoLink):
        best_beam_pair_from_paths([], make_scenario(), antenna(), antenna())


def test_best_pair_accepts_precomputed_profile():
    scen = make_scenario()
    paths = [make_path(33.0, 201.0), make_path(140.0, 320.0, extra_loss_db=4.0)]
    tx, rx = antenna(), antenna()
    prof = PathProfile(paths, scen, tx, rx)
    assert best_beam_pair_from_paths(paths, scen, tx, rx, profile=prof) == best_beam_pair_from_paths(
        paths, scen, tx, rx
    )


def test_avoid_set_picks_runner_up():
    scen = make_scenario()
    # Two paths in different sector pairs; path 1 is stronger.
    p1 = make_path(10.0, 190.0, length_m=5.0)
    p2 = make_path(90.0, 270.0, length_m=5.0, extra_loss_db=3.0)
    tx, rx = antenna(), antenna()
    best = best_beam_pair_from_paths([p1, p2], scen, tx, rx)
    assert best == BeamPair(tx.sector_of_world(10.0), rx.sector_of_world(190.0))
    second = best_beam_pair_from_paths([p1, p2], scen, tx, rx, avoid={best})
    assert second != best
    assert second.tx_sector == tx.sector_of_world(90.0)


def test_avoid_everything_falls_back_to_argmax():
    scen = make_scenario()
    paths = [make_path(10.0, 190.0), make_path(90.0, 270.0, extra_loss_db=3.0)]
    tx, rx = antenna(), antenna()
    best = best_beam_pair_from_paths(paths, scen, tx, rx)
    all_pairs = {BeamPair(t, r) for t in range(18) for r in range(18)}
    assert best_beam_pair_from_paths(paths, scen, tx, rx, avoid=all_pairs) == best


# -- MCS error model -----------------------------------------------------------


def test_mpdu_success_at_midpoint_is_half_ref():
    table = McsTable({0: McsEntry(midpoint_db=5.0, slope_db=1.0, phy_rate_mbps=480.0)})
    assert table.mpdu_success_prob(5.0, 0, 12_000) == pytest.approx(0.5)
    # Length-scaling: PER(L) = 1 - (1 - PER_ref)^(L/L_ref).
    assert table.mpdu_success_prob(5.0, 0, 24_000) == pytest.approx(0.25)
    assert table.mpdu_success_prob(5.0, 0, 6_000) == pytest.approx(math.sqrt(0.5))


def test_mpdu_success_monotone_in_snr():
    table = default_mcs_table()
    probs = [table.mpdu_success_prob(s, 14, 12_000) for s in range(-20, 40, 2)]
    assert all(a <= b for a, b in zip(probs, probs[1:]))
    assert table.mpdu_success_prob(200.0, 14, 12_000) == 1.0
    assert table.mpdu_success_prob(-200.0, 14, 12_000) == 0.0


def test_mpdu_success_rejects_bad_length_and_mcs():
    table = default_mcs_table()
    with pytest.raises(ValueError):
        table.mpdu_success_prob(10.0, 14, 0)
    with pytest.raises(UnknownMcs):
        table.entry(99)


def test_preamble_sync_threshold():
    assert preamble_sync_ok(8.0, 8.0)
    assert not preamble_sync_ok(7.999, 8.0)
    assert not preamble_sync_ok(NO_SIGNAL_SNR_DB, 8.0)


def test_azimuth_consistency_for_reverse_path():
    # A reversed LoS segment swaps departure/arrival azimuths by 180 degrees.
    assert azimuth_deg(1.0, 1.0) == pytest.approx((azimuth_deg(-1.0, -1.0) + 180.0) % 360.0)
