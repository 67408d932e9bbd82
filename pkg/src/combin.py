"""
Circle sets, non-crossing pair partitions and chord configurations.

A configuration is a set of chords on a circle set that are pairwise nested or
disjoint (shared endpoints allowed). Each point i carries a chord-cycle C_i(K):
its chord partners read in reversed circle order, closed up by i itself.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

from src.errors import BoundViolation, CapacityError

logger = logging.getLogger(__name__)

NCP_CAP = 24
CONFIG_N_CAP = 7


@dataclass(frozen=True)
class CircleSet:
    """Labels in counter-clockwise order; successor of the last label is the first."""

    labels: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"Circle set labels must be distinct: {self.labels}")

    @classmethod
    def standard(cls, n: int) -> "CircleSet":
        return cls(tuple(range(1, n + 1)))

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def _position(self) -> dict[int, int]:
        return {label: p for p, label in enumerate(self.labels)}

    def __contains__(self, i: int) -> bool:
        return i in self._position

    def succ(self, i: int) -> int:
        return self.labels[(self._position[i] + 1) % self.n]

    def pred(self, i: int) -> int:
        return self.labels[(self._position[i] - 1) % self.n]

    def walk(self, start: int) -> list[int]:
        """All labels once, starting at start and following successors."""
        p = self._position[start]
        return [self.labels[(p + t) % self.n] for t in range(self.n)]


def circle_interval(E: CircleSet, i: int, j: int, closed: bool = False) -> list[int]:
    """]i,j[ (or [i,j]) following the successor order from i to j."""
    if i == j:
        raise ValueError("Interval endpoints must differ")
    if i not in E or j not in E:
        raise ValueError(f"Interval endpoints {i}, {j} not in circle set")
    out = []
    k = E.succ(i)
    while k != j:
        out.append(k)
        k = E.succ(k)
    return [i] + out + [j] if closed else out


@dataclass(frozen=True)
class PairPartition:
    """Perfect matching of [1,k]; pairs stored as (a, b) with a < b, sorted."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        flat = sorted(x for p in self.pairs for x in p)
        if flat != list(range(1, len(flat) + 1)):
            raise ValueError(f"Not a perfect matching of [1,{len(flat)}]: {self.pairs}")

    @property
    def size(self) -> int:
        return 2 * len(self.pairs)


def is_noncrossing(pp: PairPartition) -> bool:
    for a, b in pp.pairs:
        for c, d in pp.pairs:
            if a < c < b < d:
                return False
    return True


def _ncp_pairs(lo: int, hi: int) -> list[tuple[tuple[int, int], ...]]:
    """Non-crossing matchings of lo..hi (inclusive)."""
    if lo > hi:
        return [()]
    out = []
    for j in range(lo + 1, hi + 1, 2):
        for inner in _ncp_pairs(lo + 1, j - 1):
            for outer in _ncp_pairs(j + 1, hi):
                out.append(((lo, j),) + inner + outer)
    return out


def enumerate_ncp(k: int, cap: int = NCP_CAP) -> list[PairPartition]:
    """All Catalan(k/2) non-crossing pair partitions of [1,k]; [] for odd k."""
    if k > cap:
        raise CapacityError(f"enumerate_ncp: k={k} exceeds cap {cap}")
    if k < 0 or k % 2:
        return []
    return [PairPartition(tuple(sorted(p))) for p in _ncp_pairs(1, k)]


def enumerate_pairings(k: int, cap: int = NCP_CAP) -> list[PairPartition]:
    """All (k-1)!! pair partitions of [1,k], crossing or not."""
    if k > cap:
        raise CapacityError(f"enumerate_pairings: k={k} exceeds cap {cap}")
    if k < 0 or k % 2:
        return []

    def rec(rest: tuple[int, ...]):
        if not rest:
            yield ()
            return
        a = rest[0]
        for t in range(1, len(rest)):
            for tail in rec(rest[1:t] + rest[t + 1:]):
                yield ((a, rest[t]),) + tail

    return [PairPartition(tuple(sorted(p))) for p in rec(tuple(range(1, k + 1)))]


def catalan(m: int) -> int:
    return math.comb(2 * m, m) // (m + 1)


@dataclass(frozen=True, order=True)
class Chord:
    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"Chord endpoints must differ: {self.i}")
        if self.i > self.j:
            a, b = self.j, self.i
            object.__setattr__(self, "i", a)
            object.__setattr__(self, "j", b)

    def other(self, k: int) -> int:
        if k == self.i:
            return self.j
        if k == self.j:
            return self.i
        raise ValueError(f"{k} is not an endpoint of {self}")

    def __contains__(self, k: int) -> bool:
        return k == self.i or k == self.j

    def as_list(self) -> list[int]:
        return [self.i, self.j]


def chords_compatible(E: CircleSet, a: Chord, b: Chord) -> bool:
    """Both endpoints of a lie in [k,l] or both in [l,k], where b = {k,l}."""
    for lo, hi in ((b.i, b.j), (b.j, b.i)):
        span = set(circle_interval(E, lo, hi, closed=True))
        if a.i in span and a.j in span:
            return True
    return False


@dataclass(frozen=True)
class ChordCycle:
    """C_i(K) in its reversed order, ending with i; plus/minus are i's neighbours there."""

    point: int
    full: tuple[int, ...]

    @property
    def plus(self) -> int:
        return self.full[0]

    @property
    def minus(self) -> int:
        return self.full[-2] if len(self.full) > 1 else self.point

    @property
    def star(self) -> tuple[int, ...]:
        return self.full[:-1] if len(self.full) > 1 else self.full

    @property
    def star2(self) -> tuple[int, ...]:
        return self.full[:-2] if len(self.full) > 1 else ()

    def pred(self, j: int) -> int:
        """Predecessor of j in the reversed cyclic order."""
        p = self.full.index(j)
        return self.full[p - 1]


@dataclass(frozen=True)
class Configuration:
    base: CircleSet
    chords: frozenset[Chord]

    def __post_init__(self):
        for c in self.chords:
            if c.i not in self.base or c.j not in self.base:
                raise ValueError(f"Chord {c} not on the circle set")

    @cached_property
    def partners(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {i: set() for i in self.base.labels}
        for c in self.chords:
            out[c.i].add(c.j)
            out[c.j].add(c.i)
        return {i: frozenset(s) for i, s in out.items()}

    @cached_property
    def c_K(self) -> int:
        return sum(len(p) for p in self.partners.values())

    @cached_property
    def khat(self) -> tuple[int, ...]:
        return tuple(i for i in self.base.labels if not self.partners[i])

    @cached_property
    def sorted_chords(self) -> tuple[Chord, ...]:
        return tuple(sorted(self.chords))

    def cycle(self, i: int) -> ChordCycle:
        forward = [k for k in self.base.walk(i) if k == i or k in self.partners[i]]
        return ChordCycle(i, tuple(reversed(forward[1:])) + (i,))

    @cached_property
    def cycles(self) -> dict[int, ChordCycle]:
        return {i: self.cycle(i) for i in self.base.labels}

    def is_valid(self) -> bool:
        cs = self.sorted_chords
        return all(chords_compatible(self.base, a, b) for a in cs for b in cs)

    def __len__(self) -> int:
        return len(self.chords)


def chord_cycle(K: Configuration, i: int) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """(C_i(K), C_i*(K), C_i**(K)) as ordered tuples in the reversed order."""
    if i not in K.base:
        raise ValueError(f"{i} not in circle set")
    cyc = K.cycles[i]
    return cyc.full, cyc.star, cyc.star2


@lru_cache(maxsize=None)
def _configurations(base: CircleSet) -> tuple[Configuration, ...]:
    labels = base.labels
    chords = [Chord(a, b) for p, a in enumerate(labels) for b in labels[p + 1:]]
    masks = []
    for a in chords:
        m = 0
        for t, b in enumerate(chords):
            if chords_compatible(base, a, b) and chords_compatible(base, b, a):
                m |= 1 << t
        masks.append(m)

    out: list[Configuration] = []

    def rec(t: int, chosen: list[int], allowed: int):
        if t == len(chords):
            out.append(Configuration(base, frozenset(chords[c] for c in chosen)))
            return
        rec(t + 1, chosen, allowed)
        if allowed >> t & 1:
            chosen.append(t)
            rec(t + 1, chosen, allowed & masks[t])
            chosen.pop()

    rec(0, [], (1 << len(chords)) - 1)
    logger.debug("Enumerated %d configurations on %d points", len(out), base.n)
    return tuple(out)


def enumerate_configurations(n: int, cap: int = CONFIG_N_CAP) -> list[Configuration]:
    """Every configuration of ((1,n)), the empty one first."""
    if n > cap:
        raise CapacityError(f"enumerate_configurations: n={n} exceeds cap {cap}")
    if n < 1:
        raise ValueError("Need at least one point")
    return list(_configurations(CircleSet.standard(n)))


def count_configurations(n: int, cap: int = CONFIG_N_CAP) -> int:
    return len(enumerate_configurations(n, cap))


def extremal_configuration(n: int) -> Configuration:
    """The fan {1,j} plus the polygon sides {j,j+1}; attains c_K = 4n - 6."""
    base = CircleSet.standard(n)
    chords = {Chord(1, j) for j in range(2, n + 1)}
    chords |= {Chord(j, base.succ(j)) for j in range(1, n + 1) if j != base.succ(j)}
    return Configuration(base, frozenset(chords))


def rotate_configuration(K: Configuration) -> Configuration:
    """Relabel i -> i+ on the same circle set."""
    s = K.base.succ
    return Configuration(K.base, frozenset(Chord(s(c.i), s(c.j)) for c in K.chords))


def configuration_to_json(K: Configuration) -> dict:
    return {"n": K.base.n, "chords": [c.as_list() for c in K.sorted_chords]}


def verify_bounds(n: int, cap: int = CONFIG_N_CAP) -> dict:
    """Exhaustively check c_K <= 4n-6 and #K <= (80e)^n; the fan configuration must attain 4n-6."""
    if not 2 <= n <= cap:
        raise CapacityError(f"verify_bounds: n={n} outside [2,{cap}]")
    configs = enumerate_configurations(n, cap)
    bound_4n6 = 4 * n - 6
    bound_80e = (80 * math.e) ** n
    max_ck = 0
    for K in configs:
        if not K.is_valid():
            raise BoundViolation("Enumerated chord set is not a configuration", configuration_to_json(K))
        if K.c_K > bound_4n6:
            raise BoundViolation(f"c_K = {K.c_K} exceeds 4n-6 = {bound_4n6}", configuration_to_json(K))
        max_ck = max(max_ck, K.c_K)
    if len(configs) > bound_80e:
        raise BoundViolation(f"{len(configs)} configurations exceed (80e)^{n}", {"n": n, "count": len(configs)})
    fan = extremal_configuration(n)
    if not fan.is_valid() or fan.c_K != bound_4n6:
        raise BoundViolation("Fan configuration does not attain 4n-6", configuration_to_json(fan))
    logger.info("n=%d: %d configurations, max c_K=%d", n, len(configs), max_ck)
    return {
        "n": n,
        "count": len(configs),
        "max_cK": max_ck,
        "bound_4n6": bound_4n6,
        "bound_80e": bound_80e,
        "extremal_cK": fan.c_K,
    }
