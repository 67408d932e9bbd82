"""Tests for semicircular traces and the configuration expansion of tau(A_1(x^1)...A_n(x^n))."""

import itertools

import numpy as np
import pytest

from src.combin import Chord, CircleSet, Configuration, catalan
from src.errors import CapacityError
from src.ncalg import Alphabet, CoeffAlgebra, NcPoly, Word, parse_poly, random_poly
from src.wick import (
    CovarianceSpec,
    FamilyWord,
    edgtn_lhs,
    edgtn_report,
    edgtn_rhs,
    free_trace,
    hkz_eval,
    hkz_route,
    operator_valued_trace,
    random_psd_covariance,
    schwinger_dyson_gap,
    semicircular_trace,
    trace_symmetry_gaps,
    word_trace,
)


def _w(*slots):
    return Word.semicircular(slots)


_ALL_WORDS = [_w(*t) for length in (1, 2, 3) for t in itertools.product((1, 2), repeat=length)]


def _kappa2(c):
    return CovarianceSpec(np.array([[1.0, c], [c, 1.0]]))


def _random_words(rng, n, maxdeg, d):
    words = []
    for _ in range(n):
        length = int(rng.integers(1, maxdeg + 1))
        words.append(_w(*(int(u) for u in rng.integers(1, d + 1, size=length))))
    return words


@pytest.mark.parametrize("k,expected", [(0, 1), (2, 1), (4, 2), (6, 5), (3, 0)])
def test_single_family_moments(k, expected):
    """x^k on one family gives Catalan numbers, 0 for odd k."""
    w = FamilyWord(((1, 1),) * k)
    assert semicircular_trace(w, CovarianceSpec.identity(1)) == expected


@pytest.mark.parametrize("k", range(11))
def test_free_trace_is_catalan(k):
    """tau(X1^{2k}) = Catalan(k) for k <= 10."""
    assert free_trace(parse_poly(f"X1^{2 * k}")) == catalan(k)


def test_alternating_slots_vanish():
    """x_1 x_2 x_1 x_2 only admits the crossing matching."""
    w = FamilyWord(((1, 1), (1, 2), (1, 1), (1, 2)))
    assert semicircular_trace(w, CovarianceSpec.identity(1)) == 0
    assert word_trace((1, 2, 1, 2)) == 0
    assert word_trace((1, 1, 2, 2)) == 1


def test_two_family_pair_is_kappa():
    """tau(x^1_1 x^2_1) = kappa_12."""
    w = FamilyWord(((1, 1), (2, 1)))
    assert semicircular_trace(w, _kappa2(0.4)) == pytest.approx(0.4)


def test_family_letter_out_of_range():
    """Family 3 with two families raises ValueError."""
    with pytest.raises(ValueError):
        semicircular_trace(FamilyWord(((3, 1), (1, 1))), _kappa2(0.1))


@pytest.mark.parametrize("seed", range(5))
def test_trace_is_cyclic_within_one_family(seed):
    """Rotating a one-family word leaves the trace unchanged."""
    rng = np.random.default_rng(seed)
    slots = [int(u) for u in rng.integers(1, 3, size=6)]
    kappa = CovarianceSpec.identity(1)
    base = semicircular_trace(FamilyWord(tuple((1, u) for u in slots)), kappa)
    for r in range(1, 6):
        rotated = slots[r:] + slots[:r]
        assert semicircular_trace(FamilyWord(tuple((1, u) for u in rotated)), kappa) == base


def test_merged_families_match_free_trace():
    """Identity kappa on merged families equals the trace of the concatenated monomial."""
    words = [_w(1, 2), _w(2, 1, 1), _w(1)]
    merged = FamilyWord.flatten(words).merged()
    slots = tuple(u for w in words for u in w.x_indices())
    assert semicircular_trace(merged, CovarianceSpec.identity(1)) == word_trace(slots)


def test_free_trace_examples():
    """tau(X1^2) = 1, tau((X1+X2)^2) = 2."""
    assert free_trace(parse_poly("X1^2")) == pytest.approx(1.0)
    assert free_trace(parse_poly("(X1+X2)^2")) == pytest.approx(2.0)
    assert free_trace(parse_poly("X1^4 + 3")) == pytest.approx(5.0)


def test_operator_valued_trace_is_coefficientwise():
    """id (x) tau of diag(1,2) (x) X1^2 is diag(1,2)."""
    a = np.diag([1.0, 2.0])
    P = NcPoly(Alphabet(1), CoeffAlgebra(2), {_w(1, 1): a})
    np.testing.assert_allclose(operator_valued_trace(P), a)
    with pytest.raises(ValueError):
        free_trace(P)


def test_free_trace_rejects_deterministic_letters():
    """Z letters have no free trace."""
    with pytest.raises(ValueError):
        free_trace(parse_poly("Z1*X1"))


def test_free_trace_checks_d():
    """A polynomial using X3 is rejected for d = 2."""
    with pytest.raises(ValueError):
        free_trace(parse_poly("X3^2"), d=2)


def test_schwinger_dyson():
    """tau(Q x_i) = tau (x) tau (d_i Q) for 100 random Q of degree <= 5."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        Q = random_poly(Alphabet(2), int(rng.integers(1, 6)), rng)
        for i in (1, 2):
            assert schwinger_dyson_gap(Q, i) < 1e-10


def test_edgtn_lhs_examples():
    """A_i = X1 gives c; A_i = X1X1 gives 1 + c^2."""
    c = 0.3
    assert edgtn_lhs([_w(1), _w(1)], _kappa2(c)) == pytest.approx(c)
    assert edgtn_lhs([_w(1, 1), _w(1, 1)], _kappa2(c)) == pytest.approx(1 + c**2)


def test_edgtn_one_family_is_free_trace():
    """n = 1: only the empty configuration contributes."""
    w = _w(1, 2, 2, 1)
    kappa = CovarianceSpec.identity(1)
    assert edgtn_lhs([w], kappa) == pytest.approx(word_trace(w.x_indices()))
    assert edgtn_rhs([w], kappa) == pytest.approx(word_trace(w.x_indices()))


def test_edgtn_rhs_single_letters():
    """One chord {1,2} with factor tau(x Delta x) = kappa_12."""
    assert edgtn_rhs([_w(1), _w(1)], _kappa2(-0.6)) == pytest.approx(-0.6)


def test_edgtn_rhs_two_squares():
    """X1X1, X1X1: configuration sum reproduces 1 + c^2."""
    c = 0.7
    assert edgtn_rhs([_w(1, 1), _w(1, 1)], _kappa2(c)) == pytest.approx(1 + c**2)


@pytest.mark.parametrize("seed", range(6))
def test_edgtn_rhs_matches_lhs_random(seed):
    """Configuration expansion equals the direct trace, n = 3, degrees <= 3."""
    rng = np.random.default_rng(seed)
    kappa = random_psd_covariance(3, rng)
    words = _random_words(rng, 3, 3, 2)
    assert edgtn_rhs(words, kappa) == pytest.approx(edgtn_lhs(words, kappa), abs=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_edgtn_all_monomial_tuples(seed):
    """Every tuple of n <= 3 monomials in X1, X2 of degree <= 3, one random covariance per n."""
    rng = np.random.default_rng(100 + seed)
    for n in (1, 2, 3):
        kappa = random_psd_covariance(n, rng)
        for words in itertools.product(_ALL_WORDS, repeat=n):
            assert edgtn_rhs(words, kappa) == pytest.approx(edgtn_lhs(words, kappa), abs=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_derivative_route_all_monomial_tuples(seed):
    """Same grid as the configuration expansion, through the derivative tensors."""
    rng = np.random.default_rng(100 + seed)
    for n in (1, 2, 3):
        kappa = random_psd_covariance(n, rng)
        for words in itertools.product(_ALL_WORDS, repeat=n):
            assert hkz_route(words, kappa) == pytest.approx(edgtn_lhs(words, kappa), abs=1e-8)


def test_edgtn_report_terms_sum_to_rhs():
    """Listed nonzero contributions add up to rhs."""
    report = edgtn_report([_w(1, 1), _w(1, 1)], _kappa2(0.5))
    assert report["pass"]
    assert sum(t["value"] for t in report["terms"]) == pytest.approx(report["rhs"])
    assert report["lhs"] == pytest.approx(1.25)


def test_edgtn_input_checks():
    """Word count must match kappa; the total degree is capped."""
    with pytest.raises(ValueError):
        edgtn_lhs([_w(1)], _kappa2(0.2))
    with pytest.raises(CapacityError):
        edgtn_lhs([_w(*([1] * 7)), _w(*([1] * 7))], _kappa2(0.2))


def test_hkz_eval_empty_configuration():
    """K empty: product of the free traces of the blocks."""
    K = Configuration(CircleSet.standard(2), frozenset())
    value = hkz_eval(K, {}, {1: [_w(1, 1)], 2: [_w(2, 2, 1, 1)]}, _kappa2(0.5))
    assert value == pytest.approx(1.0)


def test_hkz_eval_single_chord():
    """Chord {1,2} with subwords X1, X1 gives kappa_12."""
    K = Configuration(CircleSet.standard(2), frozenset({Chord(1, 2)}))
    assert hkz_eval(K, {}, {1: [_w(1)], 2: [_w(1)]}, _kappa2(0.35)) == pytest.approx(0.35)


def test_hkz_eval_shape_mismatch():
    """Too many subwords for a block raises ValueError."""
    K = Configuration(CircleSet.standard(2), frozenset({Chord(1, 2)}))
    with pytest.raises(ValueError):
        hkz_eval(K, {}, {1: [_w(1), _w(1)], 2: [_w(1)]}, _kappa2(0.35))


@pytest.mark.parametrize("seed", range(4))
def test_derivative_route_matches_lhs(seed):
    """Summing H^K_z over derivative tensors reproduces the trace."""
    rng = np.random.default_rng(50 + seed)
    kappa = random_psd_covariance(3, rng)
    words = _random_words(rng, 3, 3, 2)
    assert hkz_route(words, kappa) == pytest.approx(edgtn_lhs(words, kappa), abs=1e-8)


@pytest.mark.parametrize("A,B", [((1,), (1,)), ((1, 2), (2, 1)), ((1, 2, 1), (2,)), ((2, 2, 1), (1, 2, 2))])
def test_trace_symmetries(A, B):
    """The four level-resolved trace symmetries hold exactly."""
    assert max(trace_symmetry_gaps(A, B)) < 1e-10


def test_trace_symmetries_on_random_pairs():
    """100 random word pairs of length <= 5 in three letters."""
    rng = np.random.default_rng(8)
    for _ in range(100):
        A, B = (tuple(int(u) for u in rng.integers(1, 4, size=int(rng.integers(1, 6)))) for _ in range(2))
        assert max(trace_symmetry_gaps(A, B)) < 1e-10, (A, B)


def test_trace_symmetries_need_letters():
    """Empty words are rejected."""
    with pytest.raises(ValueError):
        trace_symmetry_gaps((), (1,))


def test_random_covariance_is_valid():
    """random_psd_covariance passes CovarianceSpec validation with unit diagonal."""
    kappa = random_psd_covariance(4, np.random.default_rng(3))
    np.testing.assert_allclose(np.diag(kappa.kappa), 1.0)
    assert np.linalg.eigvalsh(kappa.kappa).min() > -1e-10
