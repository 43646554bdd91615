"""Arrival sources: exact CBR arithmetic, Poisson stream properties, and the
lazy-materialization bookkeeping (pop / discard / pending counts)."""

import pytest
from hypothesis import given, settings, strategies as st

from sacsim.kernel import NS_PER_S, RngStream
from sacsim.traffic import CbrSource, PoissonSource


# -- CBR ----------------------------------------------------------------------


def test_cbr_interval_and_first_arrival():
    # 12 kb at 10 Mbps -> 1.2 ms between arrivals, first at t = 1.2 ms.
    src = CbrSource(rate_mbps=10.0, msdu_size_bits=12_000)
    assert src.interval_ns == 1_200_000
    assert src.arrival_time(0) == 1_200_000
    assert src.arrival_time(9) == 12_000_000


def test_cbr_count_up_to_matches_enumeration():
    src = CbrSource(rate_mbps=25.0, msdu_size_bits=12_000)
    for t in (0, src.interval_ns - 1, src.interval_ns, 10 * src.interval_ns + 7):
        expect = sum(1 for i in range(1000) if src.arrival_time(i) <= t)
        assert src.count_up_to(t) == expect


def test_cbr_zero_rate_has_no_arrivals():
    src = CbrSource(rate_mbps=0.0, msdu_size_bits=12_000)
    assert src.peek_next() is None
    assert src.count_up_to(10 * NS_PER_S) == 0
    assert not src.has_pending(10 * NS_PER_S)


def test_cbr_rejects_negative_rate():
    with pytest.raises(ValueError):
        CbrSource(rate_mbps=-1.0, msdu_size_bits=12_000)


def test_pop_advances_in_order():
    src = CbrSource(rate_mbps=10.0, msdu_size_bits=12_000)
    now = 5 * src.interval_ns
    times = [src.pop(now) for _ in range(3)]
    assert times == [src.interval_ns, 2 * src.interval_ns, 3 * src.interval_ns]
    assert src.pending_count(now) == 2


def test_discard_before_counts_window():
    src = CbrSource(rate_mbps=10.0, msdu_size_bits=12_000)
    iv = src.interval_ns
    # Arrivals at iv..5*iv are older than the cutoff just above 5*iv.
    total, in_window = src.discard_before(5 * iv + 1, warmup=2 * iv + 1)
    assert total == 5
    # Warmup excludes the arrivals at iv and 2*iv.
    assert in_window == 3
    assert src.next_index == 5
    # Nothing further to discard at the same cutoff.
    assert src.discard_before(5 * iv + 1, warmup=0) == (0, 0)


@given(st.integers(1, 40), st.integers(0, 30))
def test_cbr_conservation_of_counts(k, popped_budget):
    src = CbrSource(rate_mbps=100.0, msdu_size_bits=12_000)
    t = k * src.interval_ns
    n_due = src.count_up_to(t)
    popped = 0
    while popped < popped_budget and src.has_pending(t):
        src.pop(t)
        popped += 1
    assert popped + src.pending_count(t) == n_due


# -- Poisson --------------------------------------------------------------------


def test_poisson_times_strictly_increasing_and_deterministic():
    a = PoissonSource(50.0, 12_000, RngStream(7, "traffic", 0))
    b = PoissonSource(50.0, 12_000, RngStream(7, "traffic", 0))
    ta = [a.arrival_time(i) for i in range(500)]
    tb = [b.arrival_time(i) for i in range(500)]
    assert ta == tb
    assert all(x < y for x, y in zip(ta, ta[1:]))


def test_poisson_different_substreams_differ():
    a = PoissonSource(50.0, 12_000, RngStream(7, "traffic", 0))
    b = PoissonSource(50.0, 12_000, RngStream(7, "traffic", 1))
    assert [a.arrival_time(i) for i in range(50)] != [b.arrival_time(i) for i in range(50)]


def test_poisson_mean_interarrival_close_to_nominal():
    src = PoissonSource(50.0, 12_000, RngStream(3, "traffic", 0))
    n = 4000
    last = src.arrival_time(n - 1)
    mean_ns = last / n
    nominal = 12_000 / (50.0 * 1e6) * NS_PER_S  # 240 us
    assert mean_ns == pytest.approx(nominal, rel=0.05)


def test_poisson_count_up_to_matches_bisect_oracle():
    src = PoissonSource(20.0, 12_000, RngStream(11, "traffic", 0))
    times = [src.arrival_time(i) for i in range(200)]
    for t in (times[0] - 1, times[0], times[57] + 3, times[199]):
        assert src.count_up_to(t) == sum(1 for x in times if x <= t)


def test_poisson_zero_rate():
    src = PoissonSource(0.0, 12_000, RngStream(1, "traffic", 0))
    assert src.peek_next() is None
    assert src.count_up_to(NS_PER_S) == 0
