"""Tests for the truncated Fock space: basis layout, creation/annihilation, vacuum traces, norms."""

import numpy as np
import pytest

from src.combin import catalan
from src.errors import CapacityError
from src.fock import (
    CovarianceSpec,
    FockAction,
    FockOperator,
    annihilation,
    build_basis,
    correlated_families,
    creation,
    delta_op,
    evaluate_poly,
    exact_depth,
    fock_dim,
    free_semicircular_system,
    level_projection,
    level_profile,
    max_depth_within,
    op_norm,
    right_creation,
    semicircular_op,
    vacuum_expectation,
    vacuum_trace,
)
from src.ncalg import EMPTY, Alphabet, CoeffAlgebra, NcPoly, Word, X, parse_poly


def test_fock_dimensions():
    """1 + m + ... + m^D, and D + 1 for m = 1."""
    assert fock_dim(2, 3) == 15
    assert fock_dim(1, 4) == 5
    assert build_basis(3, 2).dim == 13


def test_basis_index_and_word_agree():
    """Row-major word indexing inverts."""
    basis = build_basis(2, 3)
    assert basis.index(()) == 0
    assert basis.index((1, 0)) == 5
    assert basis.word(5) == (1, 0)
    for idx in range(basis.dim):
        assert basis.index(basis.word(idx)) == idx


def test_basis_cap():
    """A basis beyond the dimension cap raises CapacityError."""
    with pytest.raises(CapacityError):
        build_basis(2, 20)


def test_max_depth_within():
    """m = 2 fits depth 8 (dimension 511) in 512."""
    assert max_depth_within(2, 512) == 8
    assert exact_depth(7) == 3


@pytest.mark.parametrize("k", range(0, 11))
def test_vacuum_moments_are_catalan(k):
    """<x^{2k} Omega, Omega> = Catalan(k) at depth 2k, k <= 10."""
    basis = build_basis(1, max(2 * k, 1))
    x = semicircular_op(basis, np.array([1.0]))
    T = FockOperator.identity(basis)
    for _ in range(2 * k):
        T = T @ x
    assert vacuum_trace(T) == pytest.approx(catalan(k), abs=1e-10)


def test_free_pair_traces():
    """tau(x1 x1 x2 x2) = 1, tau(x1 x2 x1 x2) = 0."""
    basis = build_basis(2, 2)
    x1, x2 = free_semicircular_system(basis, 2)
    assert vacuum_trace(x1 @ x1 @ x2 @ x2) == pytest.approx(1.0)
    assert vacuum_trace(x1 @ x2 @ x1 @ x2) == pytest.approx(0.0)


def test_matrix_free_matches_dense():
    """vacuum_expectation on actions agrees with the product of dense operators."""
    basis = build_basis(2, 3)
    rng = np.random.default_rng(0)
    vecs = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(6)]
    actions = [FockAction("x", v) for v in vecs]
    T = FockOperator.identity(basis)
    for a in actions:
        T = T @ a.to_operator(basis)
    assert vacuum_expectation(basis, actions) == pytest.approx(vacuum_trace(T))


def test_annihilation_after_creation_is_inner_product():
    """l(xi)* l(eta) Omega = <eta, xi> Omega."""
    basis = build_basis(2, 2)
    xi = np.array([1.0, 2.0j])
    eta = np.array([0.5, 1.0])
    T = annihilation(basis, xi) @ creation(basis, eta)
    assert vacuum_trace(T) == pytest.approx(np.vdot(xi, eta))


def test_left_and_right_creation_commute():
    """l(xi) r(eta) = r(eta) l(xi) on the truncated space."""
    basis = build_basis(2, 3)
    L = creation(basis, np.array([1.0, -1.0]))
    R = right_creation(basis, np.array([0.3, 2.0]))
    np.testing.assert_allclose((L @ R).matrix, (R @ L).matrix)


def test_truncated_semicircular_norm():
    """One semicircular truncated at depth D has norm 2 cos(pi / (D + 2))."""
    basis = build_basis(1, 20)
    x = semicircular_op(basis, np.array([1.0]))
    assert op_norm(x) == pytest.approx(2 * np.cos(np.pi / 22), rel=1e-10)


def test_delta_weights_levels():
    """Delta(kappa) kills the vacuum and scales level l by kappa^l."""
    basis = build_basis(1, 3)
    D = delta_op(basis, 0.5)
    np.testing.assert_allclose(np.diag(D.matrix).real, [0.0, 0.5, 0.25, 0.125])
    with pytest.raises(ValueError):
        delta_op(basis, 1.5)


def test_level_profile_sums_to_trace():
    """Inserting sum_l P_l = 1 between the factors changes nothing."""
    basis = build_basis(2, 3)
    e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    left = [FockAction("x", e0), FockAction("x", e1)]
    right = [FockAction("x", e1), FockAction("x", e0)]
    profile = level_profile(basis, left, right)
    assert profile.sum() == pytest.approx(vacuum_expectation(basis, left + right))
    np.testing.assert_allclose(profile, [0.0, 0.0, 1.0, 0.0], atol=1e-12)


def test_evaluate_poly_on_semicircular():
    """tau(X1^2 + 2) = 3."""
    basis = build_basis(1, 1)
    x = semicircular_op(basis, np.array([1.0]))
    T = evaluate_poly(parse_poly("X1^2 + 2"), {X(1): x})
    assert vacuum_trace(T) == pytest.approx(3.0)


def test_evaluate_poly_with_matrix_coefficient():
    """a (x) X1^2 has coefficient-valued trace a."""
    basis = build_basis(1, 1)
    x = semicircular_op(basis, np.array([1.0]))
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    P = NcPoly(Alphabet(1), CoeffAlgebra(2), {Word.semicircular([1, 1]): a})
    T = evaluate_poly(P, {X(1): x})
    assert T.blocks == 2
    np.testing.assert_allclose(vacuum_trace(T), a)


def test_evaluate_poly_needs_assignment():
    """An unassigned generator raises ValueError."""
    basis = build_basis(2, 1)
    x1, _ = free_semicircular_system(basis, 2)
    with pytest.raises(ValueError):
        evaluate_poly(parse_poly("X1X2"), {X(1): x1})
    with pytest.raises(ValueError):
        evaluate_poly(NcPoly(Alphabet(1), None, {EMPTY: 1.0}), {})


def test_operator_shape_checked():
    """A matrix of the wrong size is rejected."""
    with pytest.raises(ValueError):
        FockOperator(build_basis(1, 2), np.eye(2))


@pytest.mark.parametrize(
    "kappa",
    [
        [[1.0, 0.5], [0.2, 1.0]],
        [[2.0, 0.0], [0.0, 1.0]],
        [[1.0, -0.9, -0.9], [-0.9, 1.0, -0.9], [-0.9, -0.9, 1.0]],
    ],
)
def test_covariance_validation(kappa):
    """Asymmetric, non-unit-diagonal and indefinite matrices are rejected."""
    with pytest.raises(ValueError):
        CovarianceSpec(np.array(kappa))


def test_correlated_families_have_prescribed_covariance():
    """tau(x^i_u x^j_v) = kappa_ij when u = v, 0 otherwise."""
    kappa = CovarianceSpec(np.array([[1.0, 0.3], [0.3, 1.0]]))
    fam = correlated_families(kappa, d=2, depth=1)
    for i in range(2):
        for j in range(2):
            same = vacuum_trace(fam.operator(i, 0) @ fam.operator(j, 0))
            cross = vacuum_trace(fam.operator(i, 0) @ fam.operator(j, 1))
            assert same == pytest.approx(kappa.kappa[i, j])
            assert cross == pytest.approx(0.0)


def test_level_projections_resolve_identity():
    """sum_l P_l = 1 and P_2 keeps exactly the length-two words."""
    basis = build_basis(2, 3)
    total = level_projection(basis, 0)
    for level in range(1, 4):
        total = total + level_projection(basis, level)
    np.testing.assert_allclose(total.matrix, np.eye(basis.dim))
    assert np.trace(level_projection(basis, 2).matrix).real == pytest.approx(4.0)
    with pytest.raises(ValueError):
        level_projection(basis, 4)
