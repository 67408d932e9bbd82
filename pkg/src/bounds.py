"""
Operator-norm inequality for permuted products and coefficient extraction.

For polynomials P_1..P_n in free semicirculars with coefficients in A, m_sigma sends
a_1 (x) A_1 (x) ... (x) a_n (x) A_n to a_1...a_n (x) A_sigma(1)...A_sigma(n). Its norm is
bounded by (80e)^n d^{3n} times the best geometric mean of derivative norms
S_{i,j} = sup_p ||d_{p_1} (x) ... (x) d_{p_i} (P_j)(x)|| subject to sum i alpha_{ij} <= 3n
and sum_i alpha_{ij} = 1 for every j.

Fock-side norms are taken on compressions. Each permuted product is concatenated into one
word, evaluated deep enough that its matrix entries between the kept levels are exact, and
then restricted to those levels. The result is the compression of m_sigma(Q(x)) itself,
so measured left sides are lower bounds for its norm.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.errors import BoundViolation, CapacityError, ConsistencyError
from src.fock import (
    FockAction,
    FockBasis,
    FockOperator,
    build_basis,
    fock_dim,
    free_semicircular_system,
    max_depth_within,
    op_norm,
)
from src.ncalg import (
    EMPTY,
    Alphabet,
    CoeffAlgebra,
    NcPoly,
    Word,
    evaluate_terms,
    higher_derivative,
    poly_pow,
)

logger = logging.getLogger(__name__)

PROFILE_I_MAX = 3
MAX_EVAL_DIM = 512
HALF_WORD_CAP = 2**19
RECOVERY_TOL = 1e-8
LOG_TOL = 1e-12


@dataclass(frozen=True)
class PermutationSpec:
    """sigma as 1-based images (sigma(1), ..., sigma(n))."""

    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(1, len(self.images) + 1)):
            raise ValueError(f"Not a permutation of [1,{len(self.images)}]: {self.images}")

    @classmethod
    def identity(cls, n: int) -> "PermutationSpec":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def parse(cls, text: str) -> "PermutationSpec":
        return cls(tuple(int(t) for t in text.split(",") if t.strip()))

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, j: int) -> int:
        return self.images[j - 1]


@dataclass(frozen=True)
class DerivativeNormProfile:
    """values[i] = S_i for i = 0..i_max; entries beyond the degree are 0."""

    values: tuple[float, ...]
    depth: int

    def __getitem__(self, i: int) -> float:
        return self.values[i] if i < len(self.values) else 0.0

    def __len__(self) -> int:
        return len(self.values)


def _x_only(polys: Sequence[NcPoly]) -> None:
    for P in polys:
        if P.uses_deterministic():
            raise ValueError("Norm bounds take polynomials in X generators only")


def _word_vector_matrix(basis: FockBasis, w: Word, xs: list[FockOperator]) -> np.ndarray:
    out = np.eye(basis.dim, dtype=complex)
    for g in w:
        out = out @ xs[g.index - 1].matrix
    return out


class _CompressedWords:
    """Word matrices of a free system restricted to levels <= out_depth, exact there.

    A word u v is read as (rev(u) V)^* (v V) with V the inclusion of the kept levels, so
    only half-words are ever applied and the basis needs out_depth + ceil(max_len / 2) levels.
    """

    def __init__(self, d: int, out_depth: int, max_len: int):
        self.d = d
        self.out_depth = out_depth
        self.basis = build_basis(d, out_depth + math.ceil(max_len / 2))
        self.keep = fock_dim(d, out_depth)
        e = np.eye(d, dtype=complex)
        self.letters = [FockAction("x", e[u]) for u in range(d)]
        self._halves: dict[Word, np.ndarray] = {EMPTY: np.eye(self.keep, dtype=complex)}
        self._cache: dict[Word, np.ndarray] = {}

    @staticmethod
    def split(w: Word) -> tuple[Word, Word]:
        h = (len(w) + 1) // 2
        return w[:h].reversed(), w[h:]

    def half(self, s: Word) -> np.ndarray:
        """s V, stored on the levels <= out_depth + len(s) that can be nonzero."""
        if s not in self._halves:
            inner = self.half(s[1:])
            V = np.zeros((self.basis.dim, self.keep), dtype=complex)
            V[: inner.shape[0]] = inner
            rows = fock_dim(self.d, self.out_depth + len(s))
            self._halves[s] = self.letters[s[0].index - 1].apply(self.basis, V)[:rows]
        return self._halves[s]

    def __call__(self, w: Word) -> np.ndarray:
        if w not in self._cache:
            u, v = self.split(w)
            A, B = self.half(u), self.half(v)
            r = min(A.shape[0], B.shape[0])
            self._cache[w] = A[:r].conj().T @ B[:r]
        return self._cache[w]

    def combine(self, terms: dict[Word, np.ndarray], m: int) -> np.ndarray:
        """sum of c (x) compressed(w), grouped by the left half of each word."""
        groups: dict[Word, list[tuple[Word, np.ndarray]]] = {}
        for w, c in terms.items():
            u, v = self.split(w)
            groups.setdefault(u, []).append((v, c))
        out = np.zeros((m * self.keep, m * self.keep), dtype=complex)
        for u, pairs in groups.items():
            A = self.half(u)
            R = A.shape[0]
            S = np.zeros((m * R, m * self.keep), dtype=complex)
            for v, c in pairs:
                B = self.half(v)
                padded = np.zeros((R, self.keep), dtype=complex)
                r = min(R, B.shape[0])
                padded[:r] = B[:r]
                S += np.kron(c, padded)
            out += np.kron(np.eye(m), A).conj().T @ S
        return out


def _out_depth(d: int, blocks: int, cap: int, factors: int = 1, requested: int | None = None) -> int:
    """Kept depth: the requested one, or the deepest one with blocks * dim**factors <= cap."""
    depth = max_depth_within(d, max(cap // blocks, 1)) if requested is None else requested
    while depth > 0 and blocks * fock_dim(d, depth) ** factors > cap:
        depth -= 1
    return depth


def m_sigma_apply(polys: Sequence[NcPoly], sigma: PermutationSpec, basis: FockBasis) -> FockOperator:
    """sum of a_1...a_n (x) M_sigma(1)(x)...M_sigma(n)(x) on the truncated space."""
    _check_sigma(polys, sigma)
    algebra = polys[0].algebra
    xs = free_semicircular_system(basis, max(P.alphabet.d for P in polys))
    out = np.zeros((algebra.dim * basis.dim,) * 2, dtype=complex)
    for w, c in permuted_terms(polys, sigma).items():
        out += np.kron(c, _word_vector_matrix(basis, w, xs))
    return FockOperator(basis, out, algebra.dim)


def _check_sigma(polys: Sequence[NcPoly], sigma: PermutationSpec) -> None:
    if sigma.n != len(polys):
        raise ValueError(f"sigma acts on {sigma.n} letters but {len(polys)} polynomials given")
    _x_only(polys)
    if any(P.algebra != polys[0].algebra for P in polys):
        raise ValueError("Polynomials must share one coefficient algebra")


def permuted_terms(polys: Sequence[NcPoly], sigma: PermutationSpec) -> dict[Word, np.ndarray]:
    """m_sigma(P_1 (x) ... (x) P_n) as word -> a_1...a_n, words concatenated in sigma order."""
    m = polys[0].algebra.dim
    terms: dict[Word, np.ndarray] = {}
    for combo in itertools.product(*(list(P.items()) for P in polys)):
        coeff = np.eye(m, dtype=complex)
        for _, a in combo:
            coeff = coeff @ a
        w = EMPTY
        for j in range(1, len(polys) + 1):
            w = w + combo[sigma(j) - 1][0]
        terms[w] = terms[w] + coeff if w in terms else coeff
    return terms


def m_sigma_matrix_model(factors: Sequence[Sequence[tuple[np.ndarray, np.ndarray]]], sigma: PermutationSpec) -> np.ndarray:
    """m_sigma on A (x) B with both algebras given concretely: factors[j] = [(a, b), ...] simple tensors."""
    if sigma.n != len(factors):
        raise ValueError(f"sigma acts on {sigma.n} letters but {len(factors)} tensors given")
    total = None
    for combo in itertools.product(*factors):
        a = combo[0][0]
        for t in combo[1:]:
            a = a @ t[0]
        b = combo[sigma(1) - 1][1]
        for j in range(2, len(factors) + 1):
            b = b @ combo[sigma(j) - 1][1]
        term = np.kron(a, b)
        total = term if total is None else total + term
    return total


def masterineq_lhs(
    polys: Sequence[NcPoly],
    sigma: PermutationSpec,
    depth: int | None = None,
    max_dim: int = MAX_EVAL_DIM,
) -> tuple[float, int]:
    """Norm of the compressed m_sigma(Q(x)); returns (norm, kept depth)."""
    _check_sigma(polys, sigma)
    d = max(P.alphabet.d for P in polys)
    total = int(sum(max(P.degree, 0) for P in polys))
    m = polys[0].algebra.dim
    out = _out_depth(d, m, max_dim, requested=depth)
    if depth is None:
        while out > 0 and fock_dim(d, out + math.ceil(total / 2)) * fock_dim(d, out) > HALF_WORD_CAP:
            out -= 1
    words = _CompressedWords(d, out, total)
    return op_norm(words.combine(permuted_terms(polys, sigma), m)), out


def derivative_norm_profile(
    P: NcPoly,
    i_max: int = PROFILE_I_MAX,
    depth: int | None = None,
    max_dim: int = MAX_EVAL_DIM,
) -> DerivativeNormProfile:
    """S_i = max over index tuples of the norm of the slot-wise tensored evaluation, i <= i_max."""
    if i_max > PROFILE_I_MAX:
        raise CapacityError(f"i_max={i_max} exceeds {PROFILE_I_MAX}")
    _x_only([P])
    d = P.alphabet.d
    m = P.algebra.dim
    deg = int(max(P.degree, 0))
    values = []
    kept_depth = 0
    for i in range(i_max + 1):
        if i > deg or P.is_zero():
            values.append(0.0)
            continue
        best = 0.0
        for idx in itertools.product(range(1, d + 1), repeat=i):
            T = higher_derivative(P, idx)
            if T.is_zero():
                continue
            nonempty = [any(len(s[t]) for s, _ in T.items()) for t in range(i + 1)]
            max_len = max(len(w) for s, _ in T.items() for w in s)
            out = _out_depth(d, m, max_dim, factors=max(sum(nonempty), 1), requested=depth)
            kept_depth = max(kept_depth, out)
            words = _CompressedWords(d, out, max_len)
            scalar = np.ones((1, 1), dtype=complex)
            mat = None
            for slots, a in T.items():
                term = a
                for t, w in enumerate(slots):
                    term = np.kron(term, words(w) if nonempty[t] else scalar)
                mat = term if mat is None else mat + term
            best = max(best, op_norm(mat))
        values.append(best)
    return DerivativeNormProfile(tuple(values), kept_depth)


def _candidates(profiles: Sequence[Sequence[float]]) -> list[list[tuple[int, float]]] | None:
    out = []
    for S in profiles:
        cands = [(i, math.log(s)) for i, s in enumerate(S) if s > 0]
        if not cands:
            return None
        out.append(cands)
    return out


def _lp_dual(cands: list[list[tuple[int, float]]], budget: float) -> tuple[float, float]:
    """min over lambda >= 0 of g(lambda) = sum_j max_i (L_ij - lambda i) + lambda budget."""

    def g(lam: float) -> float:
        return sum(max(L - lam * i for i, L in c) for c in cands) + lam * budget

    lams = {0.0}
    for c in cands:
        for (i1, L1), (i2, L2) in itertools.combinations(c, 2):
            if i1 != i2:
                lam = (L2 - L1) / (i2 - i1)
                if lam > 0:
                    lams.add(lam)
    ordered = sorted(lams)
    lo, hi = 0, len(ordered) - 1
    # g is convex along the sorted breakpoints: bisect on the sign of the forward difference
    while lo < hi:
        mid = (lo + hi) // 2
        if g(ordered[mid + 1]) < g(ordered[mid]):
            lo = mid + 1
        else:
            hi = mid
    return ordered[lo], g(ordered[lo])


def masterineq_lp(profiles: Sequence[Sequence[float]]) -> tuple[float, dict[str, float]]:
    """(log optimum, alpha) of max sum alpha_ij log S_ij; -inf when some P_j vanishes."""
    n = len(profiles)
    budget = 3.0 * n
    cands = _candidates(profiles)
    if cands is None:
        return float("-inf"), {}
    lam, dual = _lp_dual(cands, budget)
    choices = []
    for c in cands:
        top = max(L - lam * i for i, L in c)
        tied = [(i, L) for i, L in c if L - lam * i >= top - LOG_TOL * max(1.0, abs(top))]
        choices.append((min(tied), max(tied)))
    used = sum(low[0] for low, _ in choices)
    extra = budget - used if lam > 0 else 0.0
    alpha: dict[str, float] = {}
    value = 0.0
    for j, (low, high) in enumerate(choices, start=1):
        step = high[0] - low[0]
        frac = 0.0
        if step > 0 and extra > 0:
            frac = min(1.0, extra / step)
            extra -= frac * step
        for (i, L), wgt in ((low, 1.0 - frac), (high, frac)):
            if wgt > 0:
                key = f"{i},{j}"
                alpha[key] = alpha.get(key, 0.0) + wgt
                value += wgt * L
    if abs(value - dual) > 1e-9 * max(1.0, abs(dual)):
        raise ConsistencyError(f"Primal {value} and dual {dual} optima differ", {"alpha": alpha})
    return value, alpha


def masterineq_lp_bruteforce(profiles: Sequence[Sequence[float]]) -> float:
    """Log optimum by enumerating LP vertices: all pure choices plus one budget-tight split."""
    n = len(profiles)
    budget = 3.0 * n
    cands = _candidates(profiles)
    if cands is None:
        return float("-inf")
    best = float("-inf")
    for pure in itertools.product(*cands):
        if sum(i for i, _ in pure) <= budget + 1e-12:
            best = max(best, sum(L for _, L in pure))
    for j in range(n):
        others = cands[:j] + cands[j + 1:]
        for (i1, L1), (i2, L2) in itertools.combinations(cands[j], 2):
            if i1 == i2:
                continue
            for rest in itertools.product(*others):
                spent = sum(i for i, _ in rest)
                t = (budget - spent - i1) / (i2 - i1)
                if 0 < t < 1:
                    best = max(best, sum(L for _, L in rest) + (1 - t) * L1 + t * L2)
    return best


def _prefactor(n: int, d: int) -> float:
    return (80 * math.e) ** n * float(d) ** (3 * n)


def masterineq_rhs(profiles: Sequence[Sequence[float]], d: int) -> float:
    log_opt, _ = masterineq_lp(profiles)
    if log_opt == float("-inf"):
        return 0.0
    return _prefactor(len(profiles), d) * math.exp(log_opt)


def masterineq_check(
    polys: Sequence[NcPoly],
    sigma: PermutationSpec,
    depth: int | None = None,
    max_dim: int = MAX_EVAL_DIM,
    raise_on_fail: bool = False,
) -> dict:
    """Compare the compressed ||m_sigma(Q(x))|| with the derivative-profile bound."""
    d = max(P.alphabet.d for P in polys)
    lhs, kept = masterineq_lhs(polys, sigma, depth, max_dim)
    profiles = [derivative_norm_profile(P, min(PROFILE_I_MAX, int(max(P.degree, 0))), depth, max_dim).values for P in polys]
    log_opt, alpha = masterineq_lp(profiles)
    rhs = 0.0 if log_opt == float("-inf") else _prefactor(len(polys), d) * math.exp(log_opt)
    report = {
        "n": len(polys),
        "sigma": list(sigma.images),
        "depth": kept,
        "lhs": lhs,
        "rhs": rhs,
        "alpha": alpha,
        "profiles": [list(p) for p in profiles],
        "pass": lhs <= rhs + 1e-9,
    }
    logger.debug("masterineq n=%d lhs=%.6g rhs=%.6g", len(polys), lhs, rhs)
    if raise_on_fail and not report["pass"]:
        raise BoundViolation("Permuted product norm exceeds the derivative bound", report)
    return report


def power_growth_trend(R: NcPoly, sigma: PermutationSpec, k_values: Sequence[int], max_dim: int = MAX_EVAL_DIM) -> list[dict]:
    """Rows {k, lhs, rhs} for P_j = R^k, j = 1..n."""
    rows = []
    for k in k_values:
        Pk = poly_pow(R, k)
        report = masterineq_check([Pk] * sigma.n, sigma, max_dim=max_dim)
        rows.append({"k": k, "lhs": report["lhs"], "rhs": report["rhs"], "pass": report["pass"]})
    return rows


def recovery_constant(n: int, d: int) -> float:
    """C_n with c_l = 1 + sum_{j=l+1}^{n} d^j 2^j c_j; the bound is max_M ||a_M|| <= C_n ||P(x)||."""
    c = [0.0] * (n + 1)
    for level in range(n, -1, -1):
        c[level] = 1.0 + sum(d ** j * 2.0 ** j * c[j] for j in range(level + 1, n + 1))
    return max(c)


def coefficient_recovery(T: FockOperator, degree: int, d: int, tol: float = RECOVERY_TOL) -> NcPoly:
    """
    Read a_M off T = P(x) for the standard free system: top degree first from the
    blocks <e_M | T Omega>, lower degrees after subtracting the recovered terms.
    """
    basis = T.basis
    if basis.depth < degree:
        raise ValueError(f"Depth {basis.depth} below degree {degree}")
    if basis.base_dim < d:
        raise ValueError(f"Base dimension {basis.base_dim} below d={d}")
    m, F = T.blocks, basis.dim
    column = T.matrix.reshape(m, F, m, F)[:, :, :, 0].copy()
    e = np.eye(basis.base_dim, dtype=complex)
    recovered: dict[Word, np.ndarray] = {}
    for level in range(degree, -1, -1):
        found = []
        for letters in itertools.product(range(d), repeat=level):
            a = column[:, basis.index(letters), :].copy()
            if np.max(np.abs(a), initial=0.0) > tol:
                found.append((letters, a))
        for letters, a in found:
            v = basis.vacuum()
            for u in reversed(letters):
                v = FockAction("x", e[u]).apply(basis, v)
            column -= np.einsum("ab,f->afb", a, v)
            recovered[Word.semicircular(u + 1 for u in letters)] = a
    residual = float(np.max(np.abs(column), initial=0.0))
    if residual > tol:
        raise ConsistencyError(f"Residual {residual:.3g} after recovery exceeds {tol}", {"residual": residual})
    return NcPoly(Alphabet(d), CoeffAlgebra(m), recovered)


def evaluate_on_free_system(P: NcPoly, basis: FockBasis) -> FockOperator:
    """P(x) with x_u = l(e_u) + l(e_u)* on the given basis."""
    _x_only([P])
    xs = free_semicircular_system(basis, P.alphabet.d)
    return FockOperator(basis, evaluate_terms(P, lambda g: xs[g.index - 1].matrix, basis.dim), P.algebra.dim)
