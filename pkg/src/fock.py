"""
Truncated full Fock space over C^m.

Vectors are graded: level l holds m**l coordinates, indexed row-major by words
(a_1, ..., a_l) with a_1 most significant, so that l(xi) v = kron(xi, v) and
r(xi) v = kron(v, xi) level by level. Operators exist in two forms: FockAction applies
one letter matrix-free to a vector (or a stack of column vectors), and FockOperator is
the dense matrix obtained by applying the action to the identity.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from src.errors import CapacityError, ConvergenceError
from src.ncalg import Generator, NcPoly, evaluate_terms

logger = logging.getLogger(__name__)

DIM_CAP = 200_000
DENSE_CAP = 8192
DENSE_NORM_THRESHOLD = 3000
NORM_RTOL = 1e-8
POWER_ITER_CAP = 20_000
PSD_TOL = 1e-10


@dataclass(frozen=True)
class FockBasis:
    base_dim: int
    depth: int

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for level in range(self.depth + 1):
            out.append(acc)
            acc += self.base_dim ** level
        return tuple(out)

    @property
    def dim(self) -> int:
        return self.offsets[-1] + self.base_dim ** self.depth

    def level_slice(self, level: int) -> slice:
        start = self.offsets[level]
        return slice(start, start + self.base_dim ** level)

    def index(self, word: Sequence[int]) -> int:
        """0-based letters; the empty word is the vacuum at index 0."""
        if len(word) > self.depth:
            raise ValueError(f"Word of length {len(word)} beyond depth {self.depth}")
        idx = 0
        for a in word:
            if not 0 <= a < self.base_dim:
                raise ValueError(f"Letter {a} outside [0, {self.base_dim})")
            idx = idx * self.base_dim + a
        return self.offsets[len(word)] + idx

    def word(self, index: int) -> tuple[int, ...]:
        level = max(l for l, off in enumerate(self.offsets) if off <= index)
        rest = index - self.offsets[level]
        letters = []
        for _ in range(level):
            rest, a = divmod(rest, self.base_dim)
            letters.append(a)
        return tuple(reversed(letters))

    def level_of(self, index: int) -> int:
        return len(self.word(index))

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v


def fock_dim(m: int, depth: int) -> int:
    return depth + 1 if m == 1 else (m ** (depth + 1) - 1) // (m - 1)


def build_basis(m: int, depth: int, cap: int = DIM_CAP) -> FockBasis:
    if m < 1 or depth < 0:
        raise ValueError(f"Need m >= 1 and depth >= 0, got m={m}, depth={depth}")
    dim = fock_dim(m, depth)
    if dim > cap:
        raise CapacityError(f"Fock dimension {dim} (m={m}, depth={depth}) exceeds cap {cap}")
    logger.debug("Fock basis m=%d depth=%d dim=%d", m, depth, dim)
    return FockBasis(m, depth)


def max_depth_within(m: int, cap: int) -> int:
    """Largest depth whose Fock dimension stays within cap."""
    depth = 0
    while fock_dim(m, depth + 1) <= cap:
        depth += 1
    return depth


def exact_depth(length: int) -> int:
    """A vacuum expectation of `length` level-changing factors never leaves levels <= length // 2."""
    return length // 2


@dataclass(frozen=True, eq=False)
class FockAction:
    """
    One letter acting on the graded space.

    kind: 'l' (left creation), 'lstar', 'r' (right creation), 'rstar', 'x' (l + l*),
    'proj' (onto `level`), 'delta' (sum_{l>=1} weight**l P_l).
    """

    kind: str
    vector: np.ndarray | None = None
    level: int = 0
    weight: float = 0.0

    def apply(self, basis: FockBasis, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        V = v.reshape(basis.dim, -1)
        cols = V.shape[1]
        out = np.zeros_like(V)
        m, D = basis.base_dim, basis.depth
        sl = basis.level_slice
        kind = self.kind
        if kind in ("l", "lstar", "r", "rstar", "x"):
            xi = np.asarray(self.vector, dtype=complex)
            if xi.shape != (m,):
                raise ValueError(f"Vector of shape {xi.shape} on base dimension {m}")
            if kind in ("l", "x"):
                for k in range(D):
                    out[sl(k + 1)] += np.kron(xi[:, None], V[sl(k)])
            if kind in ("lstar", "x"):
                for k in range(1, D + 1):
                    out[sl(k - 1)] += np.einsum("a,awc->wc", xi.conj(), V[sl(k)].reshape(m, -1, cols))
            if kind == "r":
                for k in range(D):
                    out[sl(k + 1)] += np.kron(V[sl(k)], xi[:, None])
            if kind == "rstar":
                for k in range(1, D + 1):
                    out[sl(k - 1)] += np.einsum("wac,a->wc", V[sl(k)].reshape(-1, m, cols), xi.conj())
        elif kind == "proj":
            if not 0 <= self.level <= D:
                raise ValueError(f"Projection level {self.level} outside [0, {D}]")
            out[sl(self.level)] = V[sl(self.level)]
        elif kind == "delta":
            for k in range(1, D + 1):
                out[sl(k)] = (self.weight ** k) * V[sl(k)]
        else:
            raise ValueError(f"Unknown action kind {kind!r}")
        return out.reshape(v.shape)

    def to_operator(self, basis: FockBasis) -> "FockOperator":
        if basis.dim > DENSE_CAP:
            raise CapacityError(f"Dense operator of dimension {basis.dim} exceeds cap {DENSE_CAP}")
        return FockOperator(basis, self.apply(basis, np.eye(basis.dim, dtype=complex)))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on C^blocks (x) F; blocks > 1 carries a coefficient algebra."""

    basis: FockBasis
    matrix: np.ndarray
    blocks: int = 1

    def __post_init__(self):
        n = self.blocks * self.basis.dim
        if self.matrix.shape != (n, n):
            raise ValueError(f"Matrix shape {self.matrix.shape} does not match dimension {n}")

    @classmethod
    def identity(cls, basis: FockBasis, blocks: int = 1) -> "FockOperator":
        return cls(basis, np.eye(blocks * basis.dim, dtype=complex), blocks)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _same_space(self, other: "FockOperator") -> None:
        if other.basis != self.basis or other.blocks != self.blocks:
            raise ValueError("Operators act on different spaces")

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._same_space(other)
        return FockOperator(self.basis, self.matrix @ other.matrix, self.blocks)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._same_space(other)
        return FockOperator(self.basis, self.matrix + other.matrix, self.blocks)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._same_space(other)
        return FockOperator(self.basis, self.matrix - other.matrix, self.blocks)

    def __mul__(self, c: complex) -> "FockOperator":
        return FockOperator(self.basis, c * self.matrix, self.blocks)

    __rmul__ = __mul__

    def adjoint(self) -> "FockOperator":
        return FockOperator(self.basis, self.matrix.conj().T, self.blocks)


def _unit(m: int, u: int) -> np.ndarray:
    e = np.zeros(m, dtype=complex)
    e[u] = 1.0
    return e


def creation(basis: FockBasis, xi: np.ndarray) -> FockOperator:
    return FockAction("l", np.asarray(xi, dtype=complex)).to_operator(basis)


def annihilation(basis: FockBasis, xi: np.ndarray) -> FockOperator:
    return FockAction("lstar", np.asarray(xi, dtype=complex)).to_operator(basis)


def right_creation(basis: FockBasis, xi: np.ndarray) -> FockOperator:
    return FockAction("r", np.asarray(xi, dtype=complex)).to_operator(basis)


def right_annihilation(basis: FockBasis, xi: np.ndarray) -> FockOperator:
    return FockAction("rstar", np.asarray(xi, dtype=complex)).to_operator(basis)


def semicircular_op(basis: FockBasis, xi: np.ndarray) -> FockOperator:
    """x = l(xi) + l(xi)*; variance ||xi||^2."""
    return FockAction("x", np.asarray(xi, dtype=complex)).to_operator(basis)


def free_semicircular_system(basis: FockBasis, d: int) -> list[FockOperator]:
    """x_u = l(e_u) + l(e_u)* for u = 0..d-1."""
    if d > basis.base_dim:
        raise ValueError(f"{d} semicirculars need base dimension >= {d}")
    return [semicircular_op(basis, _unit(basis.base_dim, u)) for u in range(d)]


def level_projection(basis: FockBasis, level: int) -> FockOperator:
    if not 0 <= level <= basis.depth:
        raise ValueError(f"Level {level} outside [0, {basis.depth}]")
    return FockAction("proj", level=level).to_operator(basis)


def delta_op(basis: FockBasis, kappa: float) -> FockOperator:
    """sum_{l=1}^{D} kappa**l P_l."""
    if abs(kappa) > 1 + 1e-12:
        raise ValueError(f"|kappa| must be <= 1, got {kappa}")
    return FockAction("delta", weight=kappa).to_operator(basis)


def vacuum_trace(T: FockOperator) -> complex | np.ndarray:
    """<T Omega, Omega>; for blocks > 1 the coefficient-valued partial trace."""
    if T.blocks == 1:
        return complex(T.matrix[0, 0])
    F = T.basis.dim
    return T.matrix[::F, ::F].copy()


def vacuum_expectation(basis: FockBasis, actions: Sequence[FockAction]) -> complex:
    """<a_1 ... a_k Omega, Omega> without building matrices."""
    v = basis.vacuum()
    for act in reversed(actions):
        v = act.apply(basis, v)
    return complex(v[0])


def level_profile(basis: FockBasis, left: Sequence[FockAction], right: Sequence[FockAction]) -> np.ndarray:
    """[tau(L P_l R) for l = 0..D]."""
    w = basis.vacuum()
    for act in reversed(right):
        w = act.apply(basis, w)
    out = np.zeros(basis.depth + 1, dtype=complex)
    for level in range(basis.depth + 1):
        v = np.zeros_like(w)
        v[basis.level_slice(level)] = w[basis.level_slice(level)]
        for act in reversed(left):
            v = act.apply(basis, v)
        out[level] = v[0]
    return out


def evaluate_poly(
    P: NcPoly,
    assignment: Mapping[Generator, FockOperator | np.ndarray],
    basis: FockBasis | None = None,
) -> FockOperator:
    """sum_M a_M (x) M(assigned operators) on C^m (x) (C^b (x) F)."""
    ops = [op for op in assignment.values() if isinstance(op, FockOperator)]
    if basis is None:
        if not ops:
            raise ValueError("evaluate_poly needs a FockOperator in the assignment or an explicit basis")
        basis = ops[0].basis
    blocks = ops[0].blocks if ops else 1
    for op in ops:
        if op.basis != basis or op.blocks != blocks:
            raise ValueError("Assigned operators must share one basis and block size")
    dim = blocks * basis.dim

    def letter(g: Generator) -> np.ndarray:
        if g not in assignment:
            raise ValueError(f"Generator {g} is not assigned")
        op = assignment[g]
        return op.matrix if isinstance(op, FockOperator) else np.asarray(op, dtype=complex)

    return FockOperator(basis, evaluate_terms(P, letter, dim), P.algebra.dim * blocks)


def op_norm(T: FockOperator | np.ndarray, rtol: float = NORM_RTOL, max_iter: int = POWER_ITER_CAP) -> float:
    """Largest singular value: dense SVD below the threshold, power iteration on T*T above."""
    M = T.matrix if isinstance(T, FockOperator) else np.asarray(T, dtype=complex)
    if M.size == 0:
        return 0.0
    if M.shape[0] <= DENSE_NORM_THRESHOLD:
        return float(linalg.svdvals(M)[0])
    rng = np.random.default_rng(0)
    v = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(max_iter):
        w = M.conj().T @ (M @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= rtol * new:
            logger.debug("Power iteration converged after %d steps", it + 1)
            return float(np.sqrt(new))
        lam = new
    raise ConvergenceError(f"Power iteration did not reach rtol={rtol} in {max_iter} steps")


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Unit-diagonal PSD correlation matrix between semicircular families."""

    kappa: np.ndarray

    def __post_init__(self):
        k = np.array(self.kappa, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] < 1:
            raise ValueError(f"kappa must be a square matrix, got shape {k.shape}")
        if not np.allclose(k, k.T, atol=1e-12):
            raise ValueError("kappa must be symmetric")
        if not np.allclose(np.diag(k), 1.0, atol=1e-12):
            raise ValueError("kappa must have unit diagonal")
        if np.any(np.abs(k) > 1 + 1e-12):
            raise ValueError("kappa entries must lie in [-1, 1]")
        if np.linalg.eigvalsh(k).min() < -PSD_TOL:
            raise ValueError("kappa is not positive semidefinite")
        k.flags.writeable = False
        object.__setattr__(self, "kappa", k)

    @classmethod
    def identity(cls, n: int) -> "CovarianceSpec":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.kappa.shape[0]

    def factor(self) -> np.ndarray:
        """Rows f_i with <f_i, f_j> = kappa_ij (clipped eigendecomposition)."""
        vals, vecs = linalg.eigh(self.kappa)
        vals = np.clip(vals, 0.0, None)
        keep = vals > 1e-12 * max(vals.max(), 1.0)
        return vecs[:, keep] * np.sqrt(vals[keep])


@dataclass(frozen=True, eq=False)
class GramVectors:
    """xi^i_u = e_u (x) f_i in C^d (x) C^rank."""

    covariance: CovarianceSpec
    d: int
    vectors: np.ndarray

    def inner(self, i: int, u: int, j: int, v: int) -> complex:
        return complex(np.vdot(self.vectors[i, u], self.vectors[j, v]))


def gram_vectors(kappa: CovarianceSpec, d: int) -> GramVectors:
    f = kappa.factor()
    rank = f.shape[1]
    vecs = np.zeros((kappa.n, d, d * rank), dtype=complex)
    for i in range(kappa.n):
        for u in range(d):
            vecs[i, u, u * rank:(u + 1) * rank] = f[i]
    return GramVectors(kappa, d, vecs)


@dataclass(frozen=True, eq=False)
class CorrelatedFamilies:
    basis: FockBasis
    gram: GramVectors

    def action(self, i: int, u: int) -> FockAction:
        """x^i_u for 0-based family i and slot u."""
        return FockAction("x", self.gram.vectors[i, u])

    def operator(self, i: int, u: int) -> FockOperator:
        return self.action(i, u).to_operator(self.basis)


def correlated_families(kappa: CovarianceSpec, d: int, depth: int, cap: int = DIM_CAP) -> CorrelatedFamilies:
    gram = gram_vectors(kappa, d)
    basis = build_basis(gram.vectors.shape[-1], depth, cap)
    return CorrelatedFamilies(basis, gram)
