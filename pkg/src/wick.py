"""
Trace calculus for semicircular families.

semicircular_trace sums over non-crossing matchings of a flattened word; edgtn_lhs
evaluates tau(A_1(x^1)...A_n(x^n)) both combinatorially and on the Fock space, and
edgtn_rhs rebuilds the same number as a sum over chord configurations: every chord
{i,j} contributes one vacuum trace of a segment of A_i, the operator
Delta_{ij} = sum_{l>=1} kappa_ij^l P_l and a segment of A_j, where the endpoints of
the segments are turned into left annihilations and right creations whenever the
partner is not the cyclic neighbour. hkz_route writes the segments as
noncommutative derivatives instead of explicit split points.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from src.combin import Configuration, configuration_to_json, enumerate_configurations
from src.errors import CapacityError, ConsistencyError
from src.fock import (
    CovarianceSpec,
    FockAction,
    build_basis,
    correlated_families,
    exact_depth,
    level_profile,
    vacuum_expectation,
)
from src.ncalg import Alphabet, NcPoly, TensorPoly, Word, X, higher_derivative, partial_derivative, poly_mul, poly_generator

logger = logging.getLogger(__name__)

EDGTN_DEGREE_CAP = 12
LHS_TOL = 1e-9

__all__ = [
    "CovarianceSpec",
    "FamilyWord",
    "semicircular_trace",
    "word_trace",
    "free_trace",
    "operator_valued_trace",
    "free_trace_tensor",
    "schwinger_dyson_gap",
    "edgtn_lhs",
    "edgtn_rhs",
    "edgtn_report",
    "hkz_eval",
    "hkz_route",
    "trace_symmetry_gaps",
    "random_psd_covariance",
]


@dataclass(frozen=True)
class FamilyWord:
    """Letters (family, slot), both 1-based."""

    letters: tuple[tuple[int, int], ...]

    @classmethod
    def flatten(cls, words: Sequence[Word]) -> "FamilyWord":
        return cls(tuple((i + 1, u) for i, w in enumerate(words) for u in w.x_indices()))

    def merged(self) -> "FamilyWord":
        """Same slots, every letter moved to family 1."""
        return FamilyWord(tuple((1, u) for _, u in self.letters))

    def __len__(self) -> int:
        return len(self.letters)


def _ncp_sum(n: int, weight) -> float:
    """sum over non-crossing matchings of 0..n-1 of prod weight(p, q)."""

    @lru_cache(maxsize=None)
    def t(a: int, b: int):
        if a == b:
            return 1
        if (b - a) % 2:
            return 0
        total = 0
        for c in range(a + 1, b, 2):
            w = weight(a, c)
            if w:
                total += w * t(a + 1, c) * t(c + 1, b)
        return total

    return t(0, n)


def semicircular_trace(w: FamilyWord, kappa: CovarianceSpec) -> float:
    """sum over NC matchings of prod delta(slot_p = slot_q) kappa(family_p, family_q)."""
    letters = w.letters
    for i, u in letters:
        if not 1 <= i <= kappa.n or u < 1:
            raise ValueError(f"Letter ({i}, {u}) outside {kappa.n} families")
    k = kappa.kappa

    def weight(p: int, q: int) -> float:
        (i, u), (j, v) = letters[p], letters[q]
        return k[i - 1, j - 1] if u == v else 0.0

    return float(_ncp_sum(len(letters), weight))


@lru_cache(maxsize=None)
def word_trace(slots: tuple[int, ...]) -> int:
    """tau(x_{s_1} ... x_{s_k}) for a free semicircular system: count of slot-matched NC matchings."""
    return int(_ncp_sum(len(slots), lambda p, q: 1 if slots[p] == slots[q] else 0))


def _x_only(P: NcPoly) -> None:
    if P.uses_deterministic():
        raise ValueError("Free traces take X generators only")


def operator_valued_trace(P: NcPoly) -> np.ndarray:
    """id_A (x) tau applied coefficient-wise."""
    _x_only(P)
    out = np.zeros((P.algebra.dim, P.algebra.dim), dtype=complex)
    for w, a in P.items():
        t = word_trace(w.x_indices())
        if t:
            out += t * a
    return out


def free_trace(P: NcPoly, d: int | None = None) -> complex:
    if not P.algebra.is_scalar:
        raise ValueError("free_trace takes scalar coefficients; use operator_valued_trace")
    used = max((g.index for w in P.terms for g in w), default=0)
    if d is not None and used > d:
        raise ValueError(f"Polynomial uses X{used} beyond d={d}")
    return complex(operator_valued_trace(P)[0, 0])


def free_trace_tensor(T: TensorPoly) -> complex:
    """tau (x) ... (x) tau on a scalar tensor."""
    if not T.algebra.is_scalar:
        raise ValueError("free_trace_tensor takes scalar coefficients")
    total = 0j
    for slots, a in T.items():
        prod = 1
        for w in slots:
            prod *= word_trace(w.x_indices())
            if not prod:
                break
        total += prod * complex(a[0, 0])
    return total


def schwinger_dyson_gap(Q: NcPoly, i: int) -> float:
    """|tau(Q x_i) - tau (x) tau (d_i Q)|."""
    qx = poly_mul(Q, poly_generator(X(i), Q.alphabet, Q.algebra))
    return abs(free_trace(qx) - free_trace_tensor(partial_derivative(Q, i)))


def random_psd_covariance(n: int, rng: np.random.Generator) -> CovarianceSpec:
    """Unit-diagonal correlation matrix from normalized Gaussian Gram rows."""
    g = rng.standard_normal((n, n + 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    k = g @ g.T
    np.fill_diagonal(k, 1.0)
    return CovarianceSpec(np.clip(k, -1.0, 1.0))


def _check_words(words: Sequence[Word], kappa: CovarianceSpec, cap: int) -> int:
    if len(words) != kappa.n:
        raise ValueError(f"{len(words)} words but kappa describes {kappa.n} families")
    total = sum(len(w) for w in words)
    if total > cap:
        raise CapacityError(f"Total degree {total} exceeds cap {cap}")
    for w in words:
        w.x_indices()
    return total


def _slot_count(words: Sequence[Word]) -> int:
    return max((u for w in words for u in w.x_indices()), default=1)


def edgtn_lhs(words: Sequence[Word], kappa: CovarianceSpec, cap: int = EDGTN_DEGREE_CAP) -> float:
    """tau(A_1(x^1)...A_n(x^n)): NC-matching sum, checked against the Fock evaluation."""
    total = _check_words(words, kappa, cap)
    combinatorial = semicircular_trace(FamilyWord.flatten(words), kappa)
    d = _slot_count(words)
    fam = correlated_families(kappa, d, exact_depth(total))
    actions = [fam.action(i, u - 1) for i, w in enumerate(words) for u in w.x_indices()]
    numeric = vacuum_expectation(fam.basis, actions).real
    if abs(combinatorial - numeric) > LHS_TOL:
        raise ConsistencyError(
            f"Wick sum {combinatorial} and Fock trace {numeric} disagree",
            {"words": [str(w) for w in words], "kappa": kappa.kappa.tolist()},
        )
    return combinatorial


# ---------------------------------------------------------------------------
# Chord factors
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _factor_profile(
    d: int,
    left: tuple[int, ...],
    lstar: int | None,
    rcreate: int | None,
    right: tuple[int, ...],
) -> tuple[float, ...]:
    """tau(L [l*_z] P_l [r_z'] R) for l = 0..depth, letters as 1-based slots."""
    length = len(left) + len(right) + (lstar is not None) + (rcreate is not None)
    basis = build_basis(d, exact_depth(length))
    e = np.eye(d, dtype=complex)
    left_acts = [FockAction("x", e[u - 1]) for u in left]
    if lstar is not None:
        left_acts.append(FockAction("lstar", e[lstar - 1]))
    right_acts = [FockAction("x", e[u - 1]) for u in right]
    if rcreate is not None:
        right_acts.insert(0, FockAction("r", e[rcreate - 1]))
    return tuple(level_profile(basis, left_acts, right_acts).real)


def _chord_factor(d: int, kappa: float, left, lstar, rcreate, right) -> float:
    profile = _factor_profile(d, tuple(left), lstar, rcreate, tuple(right))
    return sum(kappa ** level * profile[level] for level in range(1, len(profile)))


def _pairwise_sum(values: list[float]) -> float:
    return float(np.sum(np.asarray(values, dtype=float))) if values else 0.0


@dataclass(frozen=True)
class _Segment:
    """Letters of one block facing one partner; `end` is the consumed endpoint letter, if any."""

    letters: tuple[int, ...]
    end: int | None


def _segments(K: Configuration, i: int, slots: tuple[int, ...], cuts: tuple[int, ...]) -> dict[int, _Segment]:
    """Split block i at cuts (positions for C_i** in reversed order) into one segment per partner."""
    cyc = K.cycles[i]
    pos = {i: 0, cyc.minus: len(slots)}
    pos.update(zip(cyc.star2, cuts))
    out = {}
    for j in cyc.star:
        seg = slots[pos[cyc.pred(j)]:pos[j]]
        if j == cyc.minus:
            out[j] = _Segment(seg, None)
        else:
            out[j] = _Segment(seg[:-1], seg[-1])
    return out


def _chord_value(d: int, kappa: float, left: _Segment, right: _Segment) -> float:
    return _chord_factor(d, kappa, left.letters, left.end, right.end, right.letters)


def _configuration_terms(words: Sequence[Word], kappa: CovarianceSpec):
    """Yield (K, cuts per block, value) for every configuration and admissible split."""
    n = kappa.n
    slots = [w.x_indices() for w in words]
    d = _slot_count(words)
    k = kappa.kappa
    for K in enumerate_configurations(n):
        isolated = 1
        for i in K.khat:
            isolated *= word_trace(slots[i - 1])
            if not isolated:
                break
        if not isolated:
            continue
        options = []
        for i in K.base.labels:
            star2 = K.cycles[i].star2
            options.append(list(itertools.combinations(range(1, len(slots[i - 1])), len(star2))))
        for cuts in itertools.product(*options):
            segs = {
                i: _segments(K, i, slots[i - 1], cuts[i - 1])
                for i in K.base.labels
                if K.partners[i]
            }
            value = float(isolated)
            for c in K.sorted_chords:
                value *= _chord_value(d, k[c.i - 1, c.j - 1], segs[c.i][c.j], segs[c.j][c.i])
                if value == 0.0:
                    break
            yield K, cuts, value


def edgtn_rhs(words: Sequence[Word], kappa: CovarianceSpec, cap: int = EDGTN_DEGREE_CAP) -> float:
    """Configuration-sum form of tau(A_1(x^1)...A_n(x^n))."""
    _check_words(words, kappa, cap)
    return _pairwise_sum([v for _, _, v in _configuration_terms(words, kappa)])


def edgtn_report(
    words: Sequence[Word],
    kappa: CovarianceSpec,
    tol: float = 1e-8,
    cap: int = EDGTN_DEGREE_CAP,
) -> dict:
    """lhs, rhs and the nonzero configuration contributions."""
    lhs = edgtn_lhs(words, kappa, cap)
    terms, values = [], []
    for K, cuts, value in _configuration_terms(words, kappa):
        values.append(value)
        if value != 0.0:
            terms.append(
                {
                    "K": configuration_to_json(K)["chords"],
                    "splits": {str(i + 1): list(c) for i, c in enumerate(cuts) if c},
                    "value": value,
                }
            )
    rhs = _pairwise_sum(values)
    return {
        "words": [str(w) for w in words],
        "kappa": kappa.kappa.tolist(),
        "lhs": lhs,
        "rhs": rhs,
        "pass": abs(lhs - rhs) <= tol,
        "terms": terms,
    }


# ---------------------------------------------------------------------------
# Derivative form
# ---------------------------------------------------------------------------


def hkz_eval(
    K: Configuration,
    z: Mapping[tuple[int, int], int],
    tensors: Mapping[int, Sequence[Word]],
    kappa: CovarianceSpec,
    d: int | None = None,
) -> float:
    """
    H^K_z on simple tensors: tensors[i] holds one word per element of C_i*(K) (reversed
    order), z[(i, j)] the letter removed between consecutive slots for j in C_i**(K).
    """
    k = kappa.kappa
    slots = {i: tuple(w.x_indices() for w in tensors[i]) for i in K.base.labels}
    for i in K.base.labels:
        star = K.cycles[i].star
        if len(slots[i]) != len(star):
            raise ValueError(f"Block {i} has {len(slots[i])} slots, expected {len(star)}")
        for j in K.cycles[i].star2:
            if (i, j) not in z:
                raise ValueError(f"Missing index z[{(i, j)}]")
    if d is None:
        d = max([u for s in slots.values() for w in s for u in w] + list(z.values()) + [1])
    value = 1.0
    for i in K.khat:
        value *= word_trace(slots[i][0])
    if value == 0.0:
        return 0.0

    def side(i: int, j: int) -> _Segment:
        cyc = K.cycles[i]
        letters = slots[i][cyc.star.index(j)]
        return _Segment(letters, None if j == cyc.minus else z[(i, j)])

    for c in K.sorted_chords:
        value *= _chord_value(d, k[c.i - 1, c.j - 1], side(c.i, c.j), side(c.j, c.i))
        if value == 0.0:
            break
    return value


def hkz_route(words: Sequence[Word], kappa: CovarianceSpec, cap: int = EDGTN_DEGREE_CAP) -> float:
    """sum over K and z of H^K_z applied to the derivative tensors of the A_i."""
    _check_words(words, kappa, cap)
    d = _slot_count(words)
    alphabet = Alphabet(d)
    polys = [NcPoly(alphabet, None, {w: 1}) for w in words]
    values = []
    for K in enumerate_configurations(kappa.n):
        keys = [(i, j) for i in K.base.labels for j in K.cycles[i].star2]
        for zs in itertools.product(range(1, d + 1), repeat=len(keys)):
            z = dict(zip(keys, zs))
            per_block = []
            for i in K.base.labels:
                idx = [z[(i, j)] for j in K.cycles[i].star2]
                T = higher_derivative(polys[i - 1], idx)
                per_block.append([(slots, complex(a[0, 0]).real) for slots, a in T.items()])
            for combo in itertools.product(*per_block):
                coeff = 1.0
                for _, c in combo:
                    coeff *= c
                tensors = {i: combo[i - 1][0] for i in K.base.labels}
                values.append(coeff * hkz_eval(K, z, tensors, kappa, d))
    return _pairwise_sum(values)


# ---------------------------------------------------------------------------
# Symmetry identities
# ---------------------------------------------------------------------------


def trace_symmetry_gaps(A: Sequence[int], B: Sequence[int], d: int | None = None) -> list[float]:
    """
    Max over levels l of the gaps in
      tau(A P_l B) = tau(B P_l A)
      tau(A' l*_a P_l B) = tau(B P_l r_a A')
      tau(A P_l r_b B') = tau(B' l*_b P_l A)
      tau(A' l*_a P_l r_b B') = tau(B' l*_b P_l r_a A')
    where A = A' x_a and B = B' x_b (slots 1-based).
    """
    A, B = tuple(A), tuple(B)
    if not A or not B:
        raise ValueError("Both words must be nonempty")
    d = d or max(A + B)
    a_head, a = A[:-1], A[-1]
    b_head, b = B[:-1], B[-1]
    pairs = [
        ((A, None, None, B), (B, None, None, A)),
        ((a_head, a, None, B), (B, None, a, a_head)),
        ((A, None, b, b_head), (b_head, b, None, A)),
        ((a_head, a, b, b_head), (b_head, b, a, a_head)),
    ]
    gaps = []
    for lhs, rhs in pairs:
        p = np.asarray(_factor_profile(d, *lhs))
        q = np.asarray(_factor_profile(d, *rhs))
        size = max(len(p), len(q))
        p = np.pad(p, (0, size - len(p)))
        q = np.pad(q, (0, size - len(q)))
        gaps.append(float(np.max(np.abs(p - q))))
    return gaps
