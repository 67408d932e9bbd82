"""Tests for circle sets, non-crossing pairings and chord configurations."""

import pytest

from src.combin import (
    Chord,
    CircleSet,
    Configuration,
    PairPartition,
    catalan,
    chord_cycle,
    circle_interval,
    configuration_to_json,
    count_configurations,
    enumerate_configurations,
    enumerate_ncp,
    enumerate_pairings,
    is_noncrossing,
    extremal_configuration,
    rotate_configuration,
    verify_bounds,
)
from src.errors import CapacityError


def _config(n, *pairs):
    return Configuration(CircleSet.standard(n), frozenset(Chord(a, b) for a, b in pairs))


@pytest.mark.parametrize("m", range(0, 7))
def test_ncp_count_is_catalan(m):
    """[1,2m] has Catalan(m) non-crossing pair partitions."""
    ncps = enumerate_ncp(2 * m)
    assert len(ncps) == catalan(m)
    assert all(is_noncrossing(p) for p in ncps)


def test_catalan_values():
    """First Catalan numbers."""
    assert [catalan(m) for m in range(7)] == [1, 1, 2, 5, 14, 42, 132]


def test_odd_ncp_is_empty():
    """No pair partition of an odd set."""
    assert enumerate_ncp(5) == []


def test_ncp_cap():
    """Sizes above the cap raise CapacityError."""
    with pytest.raises(CapacityError):
        enumerate_ncp(26)


def test_all_pairings_include_crossing_ones():
    """(k-1)!! pairings of [1,6], five of them non-crossing."""
    pairings = enumerate_pairings(6)
    assert len(pairings) == 15
    assert sum(is_noncrossing(p) for p in pairings) == 5


def test_crossing_detected():
    """(1,3)(2,4) crosses; (1,4)(2,3) nests."""
    assert not is_noncrossing(PairPartition(((1, 3), (2, 4))))
    assert is_noncrossing(PairPartition(((1, 4), (2, 3))))


def test_pair_partition_must_be_perfect():
    """A matching missing a point is rejected."""
    with pytest.raises(ValueError):
        PairPartition(((1, 2), (3, 5)))


def test_circle_interval_wraps():
    """]4,2[ on ((1,5)) is [5,1]; the closed interval adds the ends."""
    E = CircleSet.standard(5)
    assert circle_interval(E, 4, 2) == [5, 1]
    assert circle_interval(E, 4, 2, closed=True) == [4, 5, 1, 2]
    assert circle_interval(E, 1, 2) == []


def test_circle_interval_needs_distinct_ends():
    """i == j raises ValueError."""
    with pytest.raises(ValueError):
        circle_interval(CircleSet.standard(3), 2, 2)


def test_chord_normalizes_endpoints():
    """Chord(3, 1) is stored as (1, 3)."""
    c = Chord(3, 1)
    assert (c.i, c.j) == (1, 3)
    assert c.other(1) == 3
    assert 3 in c


@pytest.mark.parametrize("n,count", [(2, 2), (3, 8), (4, 48)])
def test_configuration_counts(n, count):
    """Small circles: 2, 8 and 48 configurations."""
    assert count_configurations(n) == count


def test_empty_configuration_first():
    """Enumeration starts with the empty chord set."""
    configs = enumerate_configurations(3)
    assert len(configs[0]) == 0
    assert configs[0].khat == (1, 2, 3)


def test_crossing_chords_are_not_a_configuration():
    """{1,3} and {2,4} cross on four points."""
    assert not _config(4, (1, 3), (2, 4)).is_valid()
    assert _config(4, (1, 3), (1, 4), (3, 4)).is_valid()


def test_enumerated_sets_are_valid_and_distinct():
    """Every enumerated chord set on five points is a configuration, no repeats."""
    configs = enumerate_configurations(5)
    assert all(K.is_valid() for K in configs)
    assert len({K.chords for K in configs}) == len(configs)


def test_chord_cycle_of_fan():
    """Fan at 1 on four points: C_1 = (4,3,2,1), C_1* = (4,3,2), C_1** = (4,3)."""
    K = _config(4, (1, 2), (1, 3), (1, 4))
    full, star, star2 = chord_cycle(K, 1)
    assert full == (4, 3, 2, 1)
    assert star == (4, 3, 2)
    assert star2 == (4, 3)
    cyc = K.cycles[1]
    assert cyc.plus == 4
    assert cyc.minus == 2
    assert cyc.pred(3) == 4


def test_chord_cycle_single_partner():
    """A point with one partner: C_i* is that partner and C_i** is empty."""
    K = _config(4, (1, 2), (1, 3), (1, 4))
    full, star, star2 = chord_cycle(K, 3)
    assert full == (1, 3)
    assert star == (1,)
    assert star2 == ()
    assert K.cycles[3].plus == K.cycles[3].minus == 1


def test_isolated_point_cycle():
    """An isolated point is its own cycle."""
    K = _config(3, (1, 2))
    assert chord_cycle(K, 3) == ((3,), (3,), ())
    assert K.khat == (3,)


def test_c_k_counts_chord_endpoints():
    """c_K = sum over points of the number of partners."""
    K = _config(4, (1, 2), (1, 3), (1, 4))
    assert K.c_K == 6


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_extremal_configuration_attains_bound(n):
    """The fan plus the polygon sides has c_K = 4n - 6."""
    K = extremal_configuration(n)
    assert K.is_valid()
    assert K.c_K == 4 * n - 6
    assert len(K) == 2 * n - 3


def test_rotation_preserves_configurations():
    """Relabelling i -> i+1 maps configurations to configurations."""
    for K in enumerate_configurations(4):
        R = rotate_configuration(K)
        assert R.is_valid()
        assert R.c_K == K.c_K


def test_configuration_json():
    """Chords are listed sorted as pairs."""
    K = _config(4, (3, 1), (1, 2))
    assert configuration_to_json(K) == {"n": 4, "chords": [[1, 2], [1, 3]]}


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_verify_bounds_small(n):
    """Exhaustive check: max c_K = 4n - 6 and the count stays below (80e)^n."""
    report = verify_bounds(n)
    assert report["max_cK"] == 4 * n - 6
    assert report["extremal_cK"] == 4 * n - 6
    assert report["count"] <= report["bound_80e"]


def test_verify_bounds_n3_count():
    """n = 3: eight configurations, max c_K 6."""
    report = verify_bounds(3)
    assert report["count"] == 8
    assert report["max_cK"] == 6


@pytest.mark.slow
@pytest.mark.parametrize("n", [6, 7])
def test_verify_bounds_large(n):
    """Exhaustive check at the largest admissible circles."""
    report = verify_bounds(n)
    assert report["max_cK"] == 4 * n - 6


def test_configuration_cap():
    """n above the cap raises CapacityError."""
    with pytest.raises(CapacityError):
        enumerate_configurations(8)
    with pytest.raises(CapacityError):
        verify_bounds(1)
