"""Tests for noncommutative polynomials: DSL, products, adjoints, derivatives, evaluation."""

import numpy as np
import pytest

from src.errors import AlphabetError, ParseError
from src.ncalg import (
    EMPTY,
    Alphabet,
    CoeffAlgebra,
    NcPoly,
    TensorPoly,
    Word,
    X,
    Z,
    as_tensor,
    evaluate_terms,
    format_poly,
    higher_derivative,
    parse_poly,
    partial_derivative,
    poly_add,
    poly_adjoint,
    poly_from_json,
    poly_mul,
    poly_pow,
    poly_to_json,
    power_derivative_expansion,
    random_poly,
    tensor_add,
    tensor_left_mul,
    tensor_right_mul,
)


def _w(*indices):
    return Word.semicircular(indices)


def test_implicit_and_explicit_products_agree():
    """Juxtaposed generators multiply like explicit '*'."""
    P = parse_poly("X1X2X1X2")
    assert P == parse_poly("X1*X2*X1*X2")
    assert len(P) == 1
    assert P.degree == 4
    assert P.scalar_coeff(_w(1, 2, 1, 2)) == 1


def test_power_of_sum_expands_noncommutatively():
    """(X1+X2)^2 has four words, X1X2 and X2X1 kept apart."""
    P = parse_poly("(X1+X2)^2")
    assert len(P) == 4
    for w in (_w(1, 1), _w(1, 2), _w(2, 1), _w(2, 2)):
        assert P.scalar_coeff(w) == 1


def test_y_is_an_alias_of_z():
    """Y1 parses to the deterministic generator Z1."""
    P = parse_poly("Y1*X1")
    assert P == parse_poly("Z1*X1")
    assert P.uses_deterministic()
    assert P.alphabet.q == 1
    assert Word.of(Z(1), X(1)) in P.terms


def test_parse_error_reports_position():
    """A stray character raises ParseError with its offset."""
    with pytest.raises(ParseError) as exc:
        parse_poly("X1+$")
    assert exc.value.position == 3


def test_generator_outside_alphabet_is_a_parse_error():
    """X3 is rejected when the alphabet only has two semicirculars."""
    with pytest.raises(ParseError):
        parse_poly("X1 + X3", Alphabet(2))


def test_format_then_parse_is_identity():
    """Printing a scalar polynomial and parsing it back gives the same polynomial."""
    P = parse_poly("2*X1*X2 - X3 + (1+1i)*Z1*X1 + 0.5")
    assert parse_poly(format_poly(P)) == P
    assert format_poly(parse_poly("0*X1")) == "0"


def test_json_keeps_matrix_coefficients():
    """poly_to_json / poly_from_json preserve 2x2 coefficients."""
    algebra = CoeffAlgebra(2)
    a = np.array([[1.0, 2.0], [0.5j, -1.0]])
    P = NcPoly(Alphabet(2), algebra, {_w(1, 2): a, EMPTY: np.eye(2)})
    Q = poly_from_json(poly_to_json(P))
    assert Q == P
    assert Q.algebra.dim == 2


def test_json_scalar_coefficients_scale_identity():
    """A bare number or one [re, im] pair in a dim-2 polynomial is a multiple of the identity."""
    P = poly_from_json({"dim": 2, "terms": [{"word": ["X1"], "coeff": 2}, {"word": [], "coeff": [0, 1]}]})
    assert P.algebra.dim == 2
    np.testing.assert_allclose(P.coeff(_w(1)), 2 * np.eye(2))
    np.testing.assert_allclose(P.coeff(EMPTY), 1j * np.eye(2))
    assert poly_from_json({"terms": [{"word": ["X1"], "coeff": 3}]}).algebra.dim == 1


def test_zero_coefficients_are_dropped():
    """X1 - X1 is the zero polynomial with degree -inf."""
    P = parse_poly("X1 - X1")
    assert P.is_zero()
    assert P.degree == float("-inf")


def test_poly_is_immutable():
    """Attributes of NcPoly cannot be reassigned."""
    P = parse_poly("X1")
    with pytest.raises(AttributeError):
        P.alphabet = Alphabet(3)


def test_negative_power_rejected():
    """P^-1 is not a polynomial."""
    with pytest.raises(ValueError):
        poly_pow(parse_poly("X1"), -1)


def test_adjoint_reverses_words_and_conjugates():
    """(2i X1X2)* = -2i X2X1."""
    P = parse_poly("2i*X1*X2")
    A = poly_adjoint(P)
    assert A.scalar_coeff(_w(2, 1)) == -2j
    assert poly_adjoint(A) == P


def test_adjoint_of_product_is_reversed_product():
    """(PQ)* = Q* P* for matrix coefficients."""
    rng = np.random.default_rng(4)
    alphabet, algebra = Alphabet(2), CoeffAlgebra(2)
    P = random_poly(alphabet, 3, rng, algebra)
    Q = random_poly(alphabet, 3, rng, algebra)
    assert poly_adjoint(poly_mul(P, Q)).isclose(poly_mul(poly_adjoint(Q), poly_adjoint(P)))


def test_partial_derivative_of_word():
    """d_1(X1 X2 X1) = 1 (x) X2X1 + X1X2 (x) 1."""
    P = parse_poly("X1X2X1")
    expected = TensorPoly(2, P.alphabet, None, {(EMPTY, _w(2, 1)): 1, (_w(1, 2), EMPTY): 1})
    assert partial_derivative(P, 1) == expected
    assert partial_derivative(P, 2) == TensorPoly(2, P.alphabet, None, {(_w(1), _w(1)): 1})


def test_derivative_index_outside_alphabet():
    """d_3 on a two-generator alphabet raises AlphabetError."""
    with pytest.raises(AlphabetError):
        partial_derivative(parse_poly("X1X2"), 3)


def test_deterministic_letters_have_zero_derivative():
    """Z letters are constants for d_i."""
    P = parse_poly("Z1*Z1")
    assert partial_derivative(P, 1).is_zero()


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_leibniz_rule(seed):
    """d_i(PQ) = d_i(P) . (1 (x) Q) + (P (x) 1) . d_i(Q)."""
    rng = np.random.default_rng(seed)
    alphabet = Alphabet(2)
    P = random_poly(alphabet, 3, rng)
    Q = random_poly(alphabet, 3, rng)
    for i in (1, 2):
        lhs = partial_derivative(poly_mul(P, Q), i)
        rhs = tensor_add(tensor_right_mul(partial_derivative(P, i), Q), tensor_left_mul(P, partial_derivative(Q, i)))
        assert lhs.isclose(rhs)


def test_higher_derivative_with_no_indices_is_the_polynomial():
    """The empty composition of derivatives is the rank-1 tensor of P."""
    P = parse_poly("X1X2 + 3")
    assert higher_derivative(P, []) == as_tensor(P)


def test_higher_derivative_rank_and_terms():
    """d_1 (x) d_1 of X1^3 splits twice: three tensors 1 (x) 1 (x) X1, 1 (x) X1 (x) 1, X1 (x) 1 (x) 1."""
    T = higher_derivative(parse_poly("X1^3"), [1, 1])
    assert T.rank == 3
    assert len(T) == 3
    for slots in ((EMPTY, EMPTY, _w(1)), (EMPTY, _w(1), EMPTY), (_w(1), EMPTY, EMPTY)):
        assert slots in T.terms


@pytest.mark.parametrize("indices,k", [([1], 1), ([1], 3), ([1, 2], 2), ([2, 1, 1], 3)])
def test_power_expansion_matches_direct_derivative(indices, k):
    """Summing over the factors hit reproduces the derivative of P^k."""
    rng = np.random.default_rng(len(indices) * 10 + k)
    P = random_poly(Alphabet(2), 2, rng)
    direct = higher_derivative(poly_pow(P, k), indices)
    assert power_derivative_expansion(P, indices, k).isclose(direct, tol=1e-8)


def test_evaluate_terms_uses_kronecker_coefficients():
    """a (x) X1X2 evaluates to kron(a, A @ B)."""
    rng = np.random.default_rng(7)
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3))
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    P = NcPoly(Alphabet(2), CoeffAlgebra(2), {_w(1, 2): a})
    out = evaluate_terms(P, lambda g: A if g.index == 1 else B, 3)
    assert out.shape == (6, 6)
    np.testing.assert_allclose(out, np.kron(a, A @ B))


def test_evaluate_terms_rejects_wrong_shape():
    """An assigned matrix of the wrong size raises ValueError."""
    P = parse_poly("X1")
    with pytest.raises(ValueError):
        evaluate_terms(P, lambda g: np.eye(2), 3)


def test_random_poly_respects_degree():
    """random_poly draws X-words of bounded length."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        P = random_poly(Alphabet(3), 4, rng)
        assert P.degree <= 4
        assert not P.uses_deterministic()


def test_poly_add_merges_alphabets_and_cancels():
    """X1 + X2 widens the alphabet; P + (-P) is zero."""
    S = poly_add(parse_poly("X1 + 2"), parse_poly("X2 - 2"))
    assert S.alphabet.d == 2
    assert S.isclose(parse_poly("X1 + X2"))
    assert poly_add(parse_poly("X1X2"), parse_poly("-X1X2")).is_zero()
