"""
GUE and Haar sampling, exact finite-N moments and Monte Carlo norms.

Exact moments come from the Gaussian pairing expansion: E[ts_N(X_{s_1}...X_{s_k})] is a
sum over slot-matched pairings pi of N^{#cycles(gamma pi) - 1 - k/2}, gamma the full
cycle, so every moment is a polynomial in 1/N^2 with nonnegative integer coefficients
(one per genus). Monte Carlo estimates run in fixed-size chunks, each chunk seeded from
(seed, label, chunk index), and are reduced in chunk order, so results do not depend on
the number of worker threads.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, stats

from src.errors import BoundViolation, CapacityError, ConsistencyError
from src.fock import build_basis, fock_dim, free_semicircular_system, op_norm
from src.ncalg import Generator, NcPoly, Word, evaluate_terms, format_poly, poly_adjoint, poly_mul, poly_pow
from src.wick import operator_valued_trace, word_trace

logger = logging.getLogger(__name__)

N_CAP = 512
SAMPLES_CAP = 10**6
GENUS_WORD_CAP = 14
HZ_K_CAP = 30
HZ_CHECK_K = 7
STRONG_M_CAP = 8
STRONG_DEGREE_CAP = 4
TAIL_N_CAP = 256
TAIL_THRESHOLDS = (0.2, 0.5, 1.0)
CHUNK_SIZE = 64
FREE_NORM_TOL = 1e-3
FREE_DIM_CAP = 4096
THREADS_ENV = "FREEWICK_THREADS"


def worker_count(requested: int | None = None) -> int:
    """FREEWICK_THREADS wins over the requested count; default is the core count."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            requested = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if requested is None:
        requested = os.cpu_count() or 1
    if requested < 1:
        raise ValueError(f"Thread count must be >= 1, got {requested}")
    return requested


@dataclass(frozen=True)
class RngSpec:
    """One reproducible stream: identical (seed, label, stream) gives identical samples."""

    seed: int
    stream: int
    label: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, *self.label, self.stream])))


@dataclass(frozen=True, eq=False)
class GueSample:
    N: int
    matrices: tuple[np.ndarray, ...]

    @property
    def d(self) -> int:
        return len(self.matrices)


def sample_gue(N: int, d: int, rng: np.random.Generator) -> GueSample:
    """Diagonal entries N(0, 1/N); off-diagonal real and imaginary parts N(0, 1/(2N))."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    mats = []
    for _ in range(d):
        diag = rng.standard_normal(N) / math.sqrt(N)
        off = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(2 * N)
        upper = np.triu(off, 1)
        mats.append(upper + upper.conj().T + np.diag(diag))
    return GueSample(N, tuple(mats))


def sample_haar(N: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Ginibre matrix, columns rephased by the diagonal of R."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(2)
    Q, R = linalg.qr(Z)
    diag = np.diagonal(R)
    return Q * (diag / np.abs(diag))


def eval_poly_matrices(P: NcPoly, xs: Sequence[np.ndarray], zs: Sequence[np.ndarray] = ()) -> np.ndarray:
    """sum_M a_M (x) M(xs, zs); X_i takes xs[i-1] and Z_j takes zs[j-1]."""
    mats = [np.asarray(a, dtype=complex) for a in (*xs, *zs)]
    if not mats:
        raise ValueError("No matrices assigned")
    dim = mats[0].shape[0]
    for a in mats:
        if a.shape != (dim, dim):
            raise ValueError(f"Assigned matrices must all be {dim}x{dim}, got {a.shape}")

    def letter(g: Generator) -> np.ndarray:
        pool = xs if g.is_semicircular else zs
        if g.index > len(pool):
            raise ValueError(f"Generator {g} is not assigned")
        return pool[g.index - 1]

    return evaluate_terms(P, letter, dim)


def partial_normalized_trace(T: np.ndarray, m: int) -> np.ndarray:
    """id_m (x) ts_N on an (m N) x (m N) matrix."""
    n = T.shape[0] // m
    return np.trace(T.reshape(m, n, m, n), axis1=1, axis2=3) / n


def lp_norm_of(T: np.ndarray, k: int) -> float:
    """(tr (x) ts (|T|^{2k}))^{1/(2k)} with the normalized trace on the whole space."""
    ev = np.clip(linalg.eigvalsh(T.conj().T @ T), 0.0, None)
    return float(np.mean(ev**k) ** (1.0 / (2 * k)))


def spectral_norm(T: np.ndarray) -> float:
    return float(linalg.svdvals(T)[0])


def _check_caps(N: int, samples: int, n_cap: int = N_CAP) -> None:
    if not 1 <= N <= n_cap:
        raise CapacityError(f"N={N} outside [1,{n_cap}]")
    if not 1 <= samples <= SAMPLES_CAP:
        raise CapacityError(f"samples={samples} outside [1,{SAMPLES_CAP}]")


class MonteCarlo:
    """Chunked sampling over a thread pool with ordered reduction."""

    def __init__(
        self,
        seed: int,
        threads: int | None = None,
        chunk_size: int = CHUNK_SIZE,
        logger_instance: logging.Logger | None = None,
    ):
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}")
        self.seed = seed
        self.threads = worker_count(threads)
        self.chunk_size = chunk_size
        self._logger = logger_instance or logger

    def run(self, task: Callable[[np.random.Generator], np.ndarray | float], samples: int, label: tuple[int, ...] = ()) -> np.ndarray:
        """Stack task(rng) over samples draws; chunk c draws from RngSpec(seed, c, label)."""
        counts = [min(self.chunk_size, samples - s) for s in range(0, samples, self.chunk_size)]

        def chunk(c: int) -> np.ndarray:
            rng = RngSpec(self.seed, c, label).generator()
            return np.stack([np.asarray(task(rng)) for _ in range(counts[c])])

        self._logger.debug("Sampling %d draws in %d chunks on %d threads", samples, len(counts), self.threads)
        if self.threads == 1:
            parts = [chunk(c) for c in range(len(counts))]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                parts = list(pool.map(chunk, range(len(counts))))
        return np.concatenate(parts)


def _mean_stderr(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = np.mean(values, axis=0)
    if len(values) < 2:
        return mean, np.zeros(np.shape(mean))
    std = np.sqrt(np.var(values.real, axis=0, ddof=1) + np.var(np.imag(values), axis=0, ddof=1))
    return mean, std / math.sqrt(len(values))


# ---------------------------------------------------------------------------
# Exact moments
# ---------------------------------------------------------------------------


def _slots(word: Word | Sequence[int]) -> tuple[int, ...]:
    return word.x_indices() if isinstance(word, Word) else tuple(int(s) for s in word)


def _slot_matchings(slots: tuple[int, ...]):
    """Involutions of range(k) pairing equal slots."""
    k = len(slots)
    partner = [-1] * k

    def rec():
        try:
            a = partner.index(-1)
        except ValueError:
            yield tuple(partner)
            return
        for b in range(a + 1, k):
            if partner[b] == -1 and slots[b] == slots[a]:
                partner[a], partner[b] = b, a
                yield from rec()
                partner[a] = partner[b] = -1

    yield from rec()


def _cycle_count(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    cycles = 0
    for start in range(len(perm)):
        if seen[start]:
            continue
        cycles += 1
        p = start
        while not seen[p]:
            seen[p] = True
            p = perm[p]
    return cycles


@lru_cache(maxsize=4096)
def genus_counts(slots: tuple[int, ...]) -> tuple[int, ...]:
    """counts[g] = number of slot-matched pairings of genus g; () when no pairing exists."""
    k = len(slots)
    if k > GENUS_WORD_CAP:
        raise CapacityError(f"Word length {k} exceeds {GENUS_WORD_CAP}")
    if k % 2 or any(slots.count(s) % 2 for s in set(slots)):
        return ()
    counts = [0] * (k // 4 + 1)
    for pi in _slot_matchings(slots):
        sigma = [(pi[i] + 1) % k for i in range(k)]
        genus = (k // 2 + 1 - _cycle_count(sigma)) // 2
        counts[genus] += 1
    while len(counts) > 1 and counts[-1] == 0:
        counts.pop()
    return tuple(counts)


def _at(coeffs: Sequence[int | Fraction], N: int) -> Fraction:
    return sum((Fraction(c) / Fraction(N) ** (2 * g) for g, c in enumerate(coeffs)), Fraction(0))


def gue_exact_mixed_moment(word: Word | Sequence[int], N: int) -> Fraction:
    """E[ts_N(X_{s_1} ... X_{s_k})] for independent GUE matrices, exactly."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return _at(genus_counts(_slots(word)), N)


def expansion_coefficients(word: Word | Sequence[int], p_max: int | None = None) -> tuple[int, ...]:
    """Coefficients of N^0, N^-2, ..., N^{-2 p_max}; the leading one must be the free trace."""
    slots = _slots(word)
    counts = genus_counts(slots)
    leading = counts[0] if counts else 0
    if leading != word_trace(slots):
        raise ConsistencyError(
            f"Planar count {leading} differs from the free trace {word_trace(slots)}",
            {"word": list(slots), "counts": list(counts)},
        )
    p_max = len(slots) // 4 if p_max is None else p_max
    return tuple(counts[p] if p < len(counts) else 0 for p in range(p_max + 1))


def harer_zagier_polynomials(k_max: int, check_k: int = HZ_CHECK_K) -> list[tuple[Fraction, ...]]:
    """E[ts_N X^{2k}] for k = 0..k_max as coefficient tuples in 1/N^2, checked against pairings."""
    if not 0 <= k_max <= HZ_K_CAP:
        raise CapacityError(f"k_max={k_max} outside [0,{HZ_K_CAP}]")

    def add(p, q):
        n = max(len(p), len(q))
        return [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)]

    moments = [[Fraction(1)], [Fraction(1)]]
    for k in range(1, k_max):
        grow = [Fraction(4 * k + 2) * c for c in moments[k]]
        shift = [Fraction(0)] + [Fraction(k * (4 * k * k - 1)) * c for c in moments[k - 1]]
        moments.append([c / (k + 2) for c in add(grow, shift)])
    out = [tuple(m) for m in moments[: k_max + 1]]
    for k in range(1, min(k_max, check_k) + 1):
        expected = genus_counts((1,) * (2 * k))
        if tuple(Fraction(c) for c in expected) != out[k]:
            raise ConsistencyError(
                f"Recursion and pairing counts disagree at k={k}",
                {"k": k, "recursion": [str(c) for c in out[k]], "pairings": list(expected)},
            )
    return out


def harer_zagier_moments(N: int, k_max: int) -> list[Fraction]:
    """[E[ts_N X^0], E[ts_N X^2], ..., E[ts_N X^{2 k_max}]]."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return [_at(p, N) for p in harer_zagier_polynomials(k_max)]


def exact_moment(P: NcPoly, k: int, N: int) -> np.ndarray | None:
    """E[id (x) ts_N (P^k)] exactly evaluated, or None when P^k is outside the pairing oracle."""
    if P.uses_deterministic():
        return None
    Pk = poly_pow(P, k)
    if Pk.is_zero():
        return np.zeros((P.algebra.dim, P.algebra.dim), dtype=complex)
    if Pk.degree > GENUS_WORD_CAP:
        return None
    out = np.zeros((P.algebra.dim, P.algebra.dim), dtype=complex)
    for w, a in Pk.items():
        value = gue_exact_mixed_moment(w, N)
        if value:
            out += float(value) * a
    return out


# ---------------------------------------------------------------------------
# Monte Carlo tables
# ---------------------------------------------------------------------------

MOMENT_FIELDS = ("key", "N", "k", "exact", "free", "mc_mean", "mc_stderr", "samples", "seed")


@dataclass(frozen=True, eq=False)
class MomentRow:
    """mc_mean is the (m x m) matrix mean; mc_stderr combines real and imaginary spreads."""

    key: str
    N: int
    k: int
    exact: Fraction | np.ndarray | None
    free: float | None
    mc_mean: np.ndarray
    mc_stderr: np.ndarray
    samples: int
    seed: int

    @property
    def scalar(self) -> bool:
        return np.shape(self.mc_mean) in ((), (1, 1))

    def within(self, nsigma: float = 4.0, floor: float = 1e-12) -> bool:
        """|mc_mean - exact| <= nsigma * stderr entrywise; True when no exact value exists."""
        if self.exact is None:
            return True
        exact = np.asarray(float(self.exact) if isinstance(self.exact, Fraction) else self.exact, dtype=complex)
        gap = np.abs(np.asarray(self.mc_mean) - exact.reshape(np.shape(self.mc_mean)))
        return bool(np.all(gap <= nsigma * np.asarray(self.mc_stderr) + floor))

    def as_record(self) -> dict:
        def value(x):
            if x is None:
                return None
            if isinstance(x, Fraction):
                return str(x)
            arr = np.asarray(x)
            if self.scalar:
                return float(np.real(arr.reshape(-1)[0]))
            return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(arr, dtype=complex)]

        rec = {
            "key": self.key,
            "N": self.N,
            "k": self.k,
            "exact": value(self.exact),
            "free": self.free,
            "mc_mean": value(self.mc_mean),
            "mc_stderr": value(self.mc_stderr),
            "samples": self.samples,
            "seed": self.seed,
        }
        if self.scalar:
            rec["mc_mean_imag"] = float(np.imag(np.asarray(self.mc_mean).reshape(-1)[0]))
        return rec


@dataclass
class MomentTable:
    rows: list[MomentRow] = field(default_factory=list)

    def append(self, row: MomentRow) -> None:
        self.rows.append(row)

    def records(self) -> list[dict]:
        return [r.as_record() for r in self.rows]


def _free_moment(P: NcPoly, k: int) -> float | None:
    if P.uses_deterministic() or not P.algebra.is_scalar:
        return None
    return float(operator_valued_trace(poly_pow(P, k))[0, 0].real)


def _free_lp(P: NcPoly, k: int) -> float | None:
    if P.uses_deterministic():
        return None
    PP = poly_mul(poly_adjoint(P), P)
    value = float(np.trace(operator_valued_trace(poly_pow(PP, k))).real) / P.algebra.dim
    return max(value, 0.0) ** (1.0 / (2 * k))


def mc_moment(
    P: NcPoly,
    k: int,
    N: int,
    samples: int,
    seed: int,
    threads: int | None = None,
    zs: Sequence[np.ndarray] = (),
) -> MomentRow:
    """Empirical E[id (x) ts_N (P^k)] with the exact value alongside when it is computable."""
    _check_caps(N, samples)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    d, m = P.alphabet.d, P.algebra.dim
    Pk = poly_pow(P, k)

    def draw(rng: np.random.Generator) -> np.ndarray:
        T = eval_poly_matrices(Pk, sample_gue(N, max(d, 1), rng).matrices, zs)
        return partial_normalized_trace(T, m)

    values = MonteCarlo(seed, threads).run(draw, samples, label=(1, N, k))
    mean, stderr = _mean_stderr(values)
    exact = None if zs else exact_moment(P, k, N)
    if exact is not None and len(Pk) == 1:
        (w, a), = Pk.items()
        if m == 1 and a[0, 0] == 1:
            exact = gue_exact_mixed_moment(w, N)
    logger.info("E[ts_N(P^%d)] at N=%d: %d samples", k, N, samples)
    return MomentRow(f"({format_poly(P) if m == 1 else 'P'})^{k}", N, k, exact, _free_moment(P, k), mean, stderr, samples, seed)


def mc_lp_norm(
    P: NcPoly,
    k: int,
    N: int,
    samples: int,
    seed: int,
    threads: int | None = None,
    zs: Sequence[np.ndarray] = (),
) -> MomentRow:
    """Empirical E[||P(X^N)||_{L^{2k}}]; free holds the N -> infinity value when it is computable."""
    _check_caps(N, samples)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    d = P.alphabet.d

    def draw(rng: np.random.Generator) -> float:
        return lp_norm_of(eval_poly_matrices(P, sample_gue(N, max(d, 1), rng).matrices, zs), k)

    values = MonteCarlo(seed, threads).run(draw, samples, label=(2, N, k))
    mean, stderr = _mean_stderr(values)
    free = None if zs else _free_lp(P, k)
    logger.info("E||P||_L%d at N=%d: %.6g", 2 * k, N, float(mean))
    key = f"||{format_poly(P) if P.algebra.is_scalar else 'P'}||_L{2 * k}"
    return MomentRow(key, N, k, None, free, np.asarray(mean), np.asarray(stderr), samples, seed)


def trend_ratio(value: float, k: int) -> float:
    """E||X||_{L^{2k}} / ((6k+1)^{1/(2k)} * 2)."""
    return value / ((6 * k + 1) ** (1.0 / (2 * k)) * 2.0)


def lp_norm_trend(
    P: NcPoly,
    k: int,
    N_grid: Sequence[int],
    samples: int,
    seed: int,
    threads: int | None = None,
    nsigma: float = 4.0,
) -> dict:
    """L^{2k} rows across N with the normalized ratio; non_increasing allows nsigma of noise."""
    rows = [mc_lp_norm(P, k, N, samples, seed, threads) for N in sorted(N_grid)]
    ratios = [trend_ratio(float(r.mc_mean), k) for r in rows]
    errs = [trend_ratio(float(r.mc_stderr), k) for r in rows]
    ok = all(ratios[t + 1] <= ratios[t] + nsigma * math.hypot(errs[t], errs[t + 1]) for t in range(len(rows) - 1))
    return {"rows": rows, "ratios": ratios, "non_increasing": ok}


def lp_growth_fit(points: Sequence[tuple[int, int, float]]) -> dict:
    """Fit c in log(E||X_N||_{L^{2k}} / 2) <= c k^2 / N^2 from (k, N, value) points."""
    xs = np.array([k * k / (N * N) for k, N, _ in points], dtype=float)
    ys = np.array([math.log(v / 2.0) for _, _, v in points], dtype=float)
    per_point = [float(y / x) for x, y in zip(xs, ys)]
    c_fit = float(np.dot(xs, ys) / np.dot(xs, xs)) if len(xs) else 0.0
    return {"c_fit": c_fit, "c_max": max([0.0, *per_point]), "per_point": per_point}


# ---------------------------------------------------------------------------
# Strong convergence
# ---------------------------------------------------------------------------


def free_side_norm(
    P: NcPoly,
    ys: Sequence[np.ndarray],
    tol: float = FREE_NORM_TOL,
    dim_cap: int = FREE_DIM_CAP,
) -> dict:
    """
    ||P(x (x) 1, 1 (x) y)|| from compressions to Fock levels <= D, D = 1, 2, 4, ...

    Each compression is exact, so the values are lower bounds increasing in D; doubling
    stops when the increment drops below tol or the evaluation space would exceed dim_cap.
    """
    d = max(P.alphabet.d, 1)
    M = ys[0].shape[0] if ys else 1
    m = P.algebra.dim
    deg = int(max(P.degree, 0))
    history: list[tuple[int, float]] = []
    depth = 1
    while True:
        eval_depth = depth + math.ceil(deg / 2)
        if m * M * fock_dim(d, eval_depth) > dim_cap:
            break
        basis = build_basis(d, eval_depth)
        xs = free_semicircular_system(basis, d)
        F, keep = basis.dim, fock_dim(d, depth)

        def letter(g: Generator) -> np.ndarray:
            if g.is_semicircular:
                return np.kron(np.eye(M), xs[g.index - 1].matrix)
            return np.kron(ys[g.index - 1], np.eye(F))

        T = evaluate_terms(P, letter, M * F).reshape(m * M, F, m * M, F)[:, :keep, :, :keep]
        value = op_norm(T.reshape(m * M * keep, m * M * keep))
        history.append((depth, value))
        logger.debug("Free-side norm at depth %d: %.8f", depth, value)
        if len(history) > 1 and value - history[-2][1] < tol:
            break
        depth *= 2
    if not history:
        raise CapacityError(f"Free-side evaluation exceeds {dim_cap} dimensions at depth 1")
    increment = history[-1][1] - history[-2][1] if len(history) > 1 else float("inf")
    converged = increment < tol
    if not converged:
        logger.warning("Free-side norm not stable within %g (last increment %.3g)", tol, increment)
    return {"norm": history[-1][1], "uncertainty": increment, "depth": history[-1][0], "converged": converged}


def _check_strong(P: NcPoly, ys: Sequence[np.ndarray]) -> int:
    if P.degree > STRONG_DEGREE_CAP:
        raise CapacityError(f"Degree {P.degree} exceeds {STRONG_DEGREE_CAP}")
    M = ys[0].shape[0] if ys else 1
    if M > STRONG_M_CAP:
        raise CapacityError(f"M={M} exceeds {STRONG_M_CAP}")
    for y in ys:
        if y.shape != (M, M):
            raise ValueError(f"Deterministic matrices must all be {M}x{M}, got {y.shape}")
    used = max((g.index for w in P.terms for g in w if not g.is_semicircular), default=0)
    if used > len(ys):
        raise ValueError(f"Polynomial uses Z{used} but only {len(ys)} deterministic matrices given")
    return M


def strong_convergence_experiment(
    P: NcPoly,
    N_grid: Sequence[int],
    ys: Sequence[np.ndarray],
    k: int,
    samples: int,
    seed: int,
    threads: int | None = None,
) -> dict:
    """Per N: mean spectral and L^{2k} norms of P(X^N (x) I_M, I_N (x) Y) against the free-side norm."""
    ys = [np.asarray(y, dtype=complex) for y in ys]
    M = _check_strong(P, ys)
    free = free_side_norm(P, ys)
    d = max(P.alphabet.d, 1)
    mc = MonteCarlo(seed, threads)
    rows = []
    for N in sorted(N_grid):
        _check_caps(N, samples)
        eye_M, eye_N = np.eye(M), np.eye(N)

        def draw(rng: np.random.Generator) -> np.ndarray:
            xs = [np.kron(x, eye_M) for x in sample_gue(N, d, rng).matrices]
            T = eval_poly_matrices(P, xs, [np.kron(eye_N, y) for y in ys])
            return np.array([spectral_norm(T), lp_norm_of(T, k)])

        values = mc.run(draw, samples, label=(3, N, k))
        mean, stderr = _mean_stderr(values)
        rows.append(
            {
                "N": N,
                "norm": float(mean[0]),
                "norm_stderr": float(stderr[0]),
                "lp": float(mean[1]),
                "lp_stderr": float(stderr[1]),
                "gap": float(mean[0]) - free["norm"],
            }
        )
        logger.info("N=%d: E||P|| = %.6f (free %.6f)", N, mean[0], free["norm"])
    gaps = [abs(r["gap"]) for r in rows]
    return {
        "poly": format_poly(P) if P.algebra.is_scalar else "P",
        "M": M,
        "k": k,
        "samples": samples,
        "seed": seed,
        "free_norm": free["norm"],
        "free_uncertainty": free["uncertainty"],
        "free_depth": free["depth"],
        "free_converged": free["converged"],
        "rows": rows,
        "gap_decreasing": all(gaps[t + 1] <= gaps[t] for t in range(len(gaps) - 1)),
    }


# ---------------------------------------------------------------------------
# Tails
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n < 1:
        raise ValueError("Wilson interval needs at least one trial")
    z = float(stats.norm.ppf(1 - (1 - confidence) / 2))
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def tail_check(
    N_grid: Sequence[int],
    samples: int,
    seed: int,
    thresholds: Sequence[float] = TAIL_THRESHOLDS,
    confidence: float = 0.95,
    threads: int | None = None,
) -> dict:
    """Exceedance frequencies of ||X^N|| >= 2 + u with Wilson intervals."""
    mc = MonteCarlo(seed, threads)
    us = sorted(thresholds)
    rows = []
    for N in sorted(N_grid):
        _check_caps(N, samples, TAIL_N_CAP)

        def draw(rng: np.random.Generator) -> float:
            ev = linalg.eigvalsh(sample_gue(N, 1, rng).matrices[0])
            return float(max(abs(ev[0]), abs(ev[-1])))

        norms = mc.run(draw, samples, label=(4, N))
        entries = []
        for u in us:
            hits = int(np.count_nonzero(norms >= 2.0 + u))
            lo, hi = wilson_interval(hits, samples, confidence)
            entries.append({"u": u, "hits": hits, "freq": hits / samples, "lo": lo, "hi": hi})
        freqs = [e["freq"] for e in entries]
        if any(freqs[t + 1] > freqs[t] for t in range(len(freqs) - 1)):
            raise BoundViolation("Exceedance frequencies increase with u", {"N": N, "freqs": freqs})
        rows.append({"N": N, "median": float(np.median(norms)), "tails": entries})
        logger.info("N=%d: median ||X|| = %.4f", N, rows[-1]["median"])
    decay_in_N = all(
        rows[t + 1]["tails"][j]["freq"] <= rows[t]["tails"][j]["hi"]
        for t in range(len(rows) - 1)
        for j in range(len(us))
    )
    return {"samples": samples, "seed": seed, "confidence": confidence, "rows": rows, "decay_in_N": decay_in_N}
