"""
Noncommutative polynomials with operator-valued coefficients.

A polynomial is a finite sum  P = sum_M a_M (x) M  over words M in the letters
X_1..X_d (semicircular slots) and Z_1..Z_q (deterministic slots), with a_M a complex
scalar or a complex m x m matrix. Tensors sum_i a_i (x) A_i (x) B_i (x) ... carry one
coefficient on the left and r words. The noncommutative derivative d_i splits a word at
every occurrence of X_i.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np

from src.errors import AlphabetError, ParseError

SEMICIRCULAR = "X"
DETERMINISTIC = "Z"

# Entries below this magnitude are dropped from stored coefficients.
ZERO_TOL = 1e-12


@dataclass(frozen=True, order=True)
class Generator:
    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in (SEMICIRCULAR, DETERMINISTIC):
            raise ValueError(f"Unknown generator kind {self.kind!r}")
        if self.index < 1:
            raise AlphabetError(f"Generator index must be positive, got {self.index}")

    @property
    def is_semicircular(self) -> bool:
        return self.kind == SEMICIRCULAR

    @property
    def tag(self) -> tuple[int, int]:
        """Ordering key: X letters before Z letters, then by index."""
        return (0 if self.kind == SEMICIRCULAR else 1, self.index)

    @classmethod
    def from_tag(cls, text: str) -> "Generator":
        """'X3' -> X_3, 'Z1' or 'Y1' -> Z_1."""
        m = re.fullmatch(r"([XYZ])(\d+)", text.strip())
        if not m:
            raise ValueError(f"Not a generator tag: {text!r}")
        kind = SEMICIRCULAR if m.group(1) == "X" else DETERMINISTIC
        return cls(kind, int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.kind}{self.index}"


def X(i: int) -> Generator:
    return Generator(SEMICIRCULAR, i)


def Z(j: int) -> Generator:
    return Generator(DETERMINISTIC, j)


@dataclass(frozen=True)
class Word:
    """Finite sequence of generators; the empty word is the identity monomial."""

    letters: tuple[Generator, ...] = ()

    @classmethod
    def of(cls, *letters: Generator) -> "Word":
        return cls(tuple(letters))

    @classmethod
    def semicircular(cls, indices: Iterable[int]) -> "Word":
        return cls(tuple(X(i) for i in indices))

    @classmethod
    def from_tags(cls, tags: Iterable[str]) -> "Word":
        return cls(tuple(Generator.from_tag(t) for t in tags))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Word(self.letters[item])
        return self.letters[item]

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    @property
    def length(self) -> int:
        return len(self.letters)

    @property
    def xdegree(self) -> int:
        return sum(1 for g in self.letters if g.is_semicircular)

    def reversed(self) -> "Word":
        return Word(self.letters[::-1])

    def key(self) -> tuple:
        return (len(self.letters), tuple(g.tag for g in self.letters))

    def x_indices(self) -> tuple[int, ...]:
        """Slot indices of an X-only word; raises if a Z letter is present."""
        if any(not g.is_semicircular for g in self.letters):
            raise ValueError(f"Word {self} contains deterministic letters")
        return tuple(g.index for g in self.letters)

    def __str__(self) -> str:
        return "*".join(str(g) for g in self.letters) if self.letters else "1"


EMPTY = Word()


@dataclass(frozen=True)
class Alphabet:
    d: int
    q: int = 0

    def check(self, g: Generator) -> None:
        bound = self.d if g.is_semicircular else self.q
        if g.index > bound:
            raise AlphabetError(f"{g} outside alphabet (d={self.d}, q={self.q})")

    def check_word(self, w: Word) -> None:
        for g in w:
            self.check(g)

    def merge(self, other: "Alphabet") -> "Alphabet":
        return Alphabet(max(self.d, other.d), max(self.q, other.q))


@dataclass(frozen=True)
class CoeffAlgebra:
    """Complex scalars (dim 1) or complex dim x dim matrices."""

    dim: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"Coefficient algebra dimension must be >= 1, got {self.dim}")

    @property
    def is_scalar(self) -> bool:
        return self.dim == 1

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def coerce(self, value) -> np.ndarray:
        """Scalars become multiples of the identity; matrices are validated."""
        if np.isscalar(value):
            return complex(value) * self.identity()
        arr = np.asarray(value, dtype=complex)
        if arr.shape == () or arr.shape == (1,):
            return complex(arr.reshape(())) * self.identity()
        if arr.shape != (self.dim, self.dim):
            raise ValueError(f"Coefficient shape {arr.shape} does not match algebra dim {self.dim}")
        return arr.copy()


def _is_zero(a: np.ndarray) -> bool:
    return not np.any(np.abs(a) > ZERO_TOL)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


class NcPoly:
    """Immutable noncommutative polynomial sum_M a_M (x) M."""

    __slots__ = ("alphabet", "algebra", "_terms")

    def __init__(
        self,
        alphabet: Alphabet,
        algebra: CoeffAlgebra | None = None,
        terms: Mapping[Word, object] | Iterable[tuple[Word, object]] = (),
    ):
        algebra = algebra or CoeffAlgebra()
        acc: dict[Word, np.ndarray] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for word, coeff in items:
            alphabet.check_word(word)
            a = algebra.coerce(coeff)
            acc[word] = acc[word] + a if word in acc else a
        kept = {w: _frozen(a) for w, a in sorted(acc.items(), key=lambda kv: kv[0].key()) if not _is_zero(a)}
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "_terms", MappingProxyType(kept))

    def __setattr__(self, name, value):
        raise AttributeError("NcPoly is immutable")

    @property
    def terms(self) -> Mapping[Word, np.ndarray]:
        return self._terms

    def items(self):
        return self._terms.items()

    def coeff(self, word: Word) -> np.ndarray:
        return self._terms.get(word, np.zeros((self.algebra.dim, self.algebra.dim), dtype=complex))

    def scalar_coeff(self, word: Word) -> complex:
        if not self.algebra.is_scalar:
            raise ValueError("scalar_coeff on a matrix-coefficient polynomial")
        return complex(self.coeff(word)[0, 0])

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> float:
        """Max total word length; -inf for the zero polynomial."""
        return max((len(w) for w in self._terms), default=float("-inf"))

    @property
    def xdegree(self) -> float:
        return max((w.xdegree for w in self._terms), default=float("-inf"))

    def uses_deterministic(self) -> bool:
        return any(not g.is_semicircular for w in self._terms for g in w)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NcPoly):
            return NotImplemented
        if self.algebra != other.algebra or list(self._terms) != list(other._terms):
            return False
        return all(np.array_equal(a, other._terms[w]) for w, a in self._terms.items())

    def __hash__(self):
        return hash((self.algebra, tuple(self._terms)))

    def isclose(self, other: "NcPoly", tol: float = 1e-9) -> bool:
        diff = poly_sub(self, other)
        return all(np.max(np.abs(a)) <= tol for _, a in diff.items())

    def __add__(self, other: "NcPoly") -> "NcPoly":
        return poly_add(self, other)

    def __sub__(self, other: "NcPoly") -> "NcPoly":
        return poly_sub(self, other)

    def __mul__(self, other) -> "NcPoly":
        if isinstance(other, NcPoly):
            return poly_mul(self, other)
        return poly_scale(self, other)

    def __rmul__(self, other) -> "NcPoly":
        return poly_scale(self, other)

    def __neg__(self) -> "NcPoly":
        return poly_scale(self, -1)

    def __pow__(self, k: int) -> "NcPoly":
        return poly_pow(self, k)

    def __repr__(self) -> str:
        if self.algebra.is_scalar:
            return f"NcPoly({format_poly(self)!r})"
        return f"NcPoly(dim={self.algebra.dim}, terms={len(self._terms)})"


def _check_compatible(P: NcPoly, Q: NcPoly) -> Alphabet:
    if P.algebra != Q.algebra:
        raise ValueError(f"Coefficient algebras differ: dim {P.algebra.dim} vs {Q.algebra.dim}")
    return P.alphabet.merge(Q.alphabet)


def poly_const(value, alphabet: Alphabet, algebra: CoeffAlgebra | None = None) -> NcPoly:
    return NcPoly(alphabet, algebra, {EMPTY: value})


def poly_generator(g: Generator, alphabet: Alphabet, algebra: CoeffAlgebra | None = None, coeff=1) -> NcPoly:
    return NcPoly(alphabet, algebra, {Word.of(g): coeff})


def poly_add(P: NcPoly, Q: NcPoly) -> NcPoly:
    alphabet = _check_compatible(P, Q)
    return NcPoly(alphabet, P.algebra, list(P.items()) + list(Q.items()))


def poly_scale(P: NcPoly, c) -> NcPoly:
    """c * P for a complex scalar c, or a * P (left multiplication) for a coefficient matrix."""
    if np.isscalar(c):
        return NcPoly(P.alphabet, P.algebra, [(w, complex(c) * a) for w, a in P.items()])
    a0 = P.algebra.coerce(c)
    return NcPoly(P.alphabet, P.algebra, [(w, a0 @ a) for w, a in P.items()])


def poly_sub(P: NcPoly, Q: NcPoly) -> NcPoly:
    return poly_add(P, poly_scale(Q, -1))


def poly_mul(P: NcPoly, Q: NcPoly) -> NcPoly:
    alphabet = _check_compatible(P, Q)
    return NcPoly(alphabet, P.algebra, [(u + v, a @ b) for u, a in P.items() for v, b in Q.items()])


def poly_pow(P: NcPoly, k: int) -> NcPoly:
    if k < 0:
        raise ValueError("Negative powers are not polynomials")
    out = poly_const(1, P.alphabet, P.algebra)
    for _ in range(k):
        out = poly_mul(out, P)
    return out


def poly_adjoint(P: NcPoly) -> NcPoly:
    """a (x) M  ->  a* (x) reverse(M); all generators are self-adjoint."""
    return NcPoly(P.alphabet, P.algebra, [(w.reversed(), a.conj().T) for w, a in P.items()])


def poly_degree(P: NcPoly) -> float:
    return P.degree


def poly_xdegree(P: NcPoly) -> float:
    return P.xdegree


def random_poly(
    alphabet: Alphabet,
    degree: int,
    rng: np.random.Generator,
    algebra: CoeffAlgebra | None = None,
    max_terms: int = 4,
) -> NcPoly:
    """Up to max_terms X-words of length <= degree with standard Gaussian coefficients."""
    algebra = algebra or CoeffAlgebra()
    m = algebra.dim
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        length = int(rng.integers(0, degree + 1))
        word = Word.semicircular(int(u) for u in rng.integers(1, alphabet.d + 1, size=length))
        coeff = rng.standard_normal((m, m))
        if m > 1:
            coeff = coeff + 1j * rng.standard_normal((m, m))
        terms.append((word, coeff))
    return NcPoly(alphabet, algebra, terms)


# ---------------------------------------------------------------------------
# Tensors
# ---------------------------------------------------------------------------


class TensorPoly:
    """Immutable element of A (x) C<X,Z>^{(x) r}: terms keyed by r-tuples of words."""

    __slots__ = ("rank", "alphabet", "algebra", "_terms")

    def __init__(
        self,
        rank: int,
        alphabet: Alphabet,
        algebra: CoeffAlgebra | None = None,
        terms: Mapping[tuple[Word, ...], object] | Iterable[tuple[tuple[Word, ...], object]] = (),
    ):
        if rank < 1:
            raise ValueError(f"Tensor rank must be >= 1, got {rank}")
        algebra = algebra or CoeffAlgebra()
        acc: dict[tuple[Word, ...], np.ndarray] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for slots, coeff in items:
            if len(slots) != rank:
                raise ValueError(f"Tensor term has {len(slots)} slots, expected {rank}")
            a = algebra.coerce(coeff)
            acc[slots] = acc[slots] + a if slots in acc else a
        kept = {
            s: _frozen(a)
            for s, a in sorted(acc.items(), key=lambda kv: tuple(w.key() for w in kv[0]))
            if not _is_zero(a)
        }
        object.__setattr__(self, "rank", rank)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "_terms", MappingProxyType(kept))

    def __setattr__(self, name, value):
        raise AttributeError("TensorPoly is immutable")

    @property
    def terms(self) -> Mapping[tuple[Word, ...], np.ndarray]:
        return self._terms

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorPoly):
            return NotImplemented
        if self.rank != other.rank or self.algebra != other.algebra or list(self._terms) != list(other._terms):
            return False
        return all(np.array_equal(a, other._terms[s]) for s, a in self._terms.items())

    def __hash__(self):
        return hash((self.rank, self.algebra, tuple(self._terms)))

    def isclose(self, other: "TensorPoly", tol: float = 1e-9) -> bool:
        if self.rank != other.rank:
            return False
        keys = set(self._terms) | set(other._terms)
        zero = np.zeros((self.algebra.dim, self.algebra.dim))
        return all(
            np.max(np.abs(self._terms.get(k, zero) - other._terms.get(k, zero))) <= tol for k in keys
        )

    def __add__(self, other: "TensorPoly") -> "TensorPoly":
        return tensor_add(self, other)

    def __repr__(self) -> str:
        return f"TensorPoly(rank={self.rank}, terms={len(self._terms)})"


def as_tensor(P: NcPoly) -> TensorPoly:
    """View a polynomial as a rank-1 tensor."""
    return TensorPoly(1, P.alphabet, P.algebra, [((w,), a) for w, a in P.items()])


def tensor_add(S: TensorPoly, T: TensorPoly) -> TensorPoly:
    if S.rank != T.rank:
        raise ValueError(f"Cannot add tensors of rank {S.rank} and {T.rank}")
    if S.algebra != T.algebra:
        raise ValueError("Coefficient algebras differ")
    return TensorPoly(S.rank, S.alphabet.merge(T.alphabet), S.algebra, list(S.items()) + list(T.items()))


def tensor_mul(S: TensorPoly, T: TensorPoly) -> TensorPoly:
    """Slot-merging product: the last slot of S is concatenated with the first slot of T."""
    if S.algebra != T.algebra:
        raise ValueError("Coefficient algebras differ")
    terms = []
    for s, a in S.items():
        for t, b in T.items():
            terms.append((s[:-1] + (s[-1] + t[0],) + t[1:], a @ b))
    return TensorPoly(S.rank + T.rank - 1, S.alphabet.merge(T.alphabet), S.algebra, terms)


def tensor_left_mul(P: NcPoly, T: TensorPoly) -> TensorPoly:
    """(P (x) 1 (x) ... (x) 1) . T"""
    return tensor_mul(as_tensor(P), T)


def tensor_right_mul(T: TensorPoly, Q: NcPoly) -> TensorPoly:
    """T . (1 (x) ... (x) 1 (x) Q)"""
    return tensor_mul(T, as_tensor(Q))


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------


def _splits(word: Word, i: int) -> Iterable[tuple[Word, Word]]:
    target = X(i)
    for p, g in enumerate(word.letters):
        if g == target:
            yield word[:p], word[p + 1:]


def _check_index(alphabet: Alphabet, i: int) -> None:
    if not 1 <= i <= alphabet.d:
        raise AlphabetError(f"Derivative index {i} outside [1, {alphabet.d}]")


def partial_derivative(P: NcPoly, i: int) -> TensorPoly:
    """d_i P = sum over M = A X_i B of a_M (x) A (x) B."""
    _check_index(P.alphabet, i)
    terms = [((a_, b_), a) for w, a in P.items() for a_, b_ in _splits(w, i)]
    return TensorPoly(2, P.alphabet, P.algebra, terms)


def _derive_last_slot(T: TensorPoly, i: int) -> TensorPoly:
    _check_index(T.alphabet, i)
    terms = [
        (slots[:-1] + (left, right), a)
        for slots, a in T.items()
        for left, right in _splits(slots[-1], i)
    ]
    return TensorPoly(T.rank + 1, T.alphabet, T.algebra, terms)


def higher_derivative(P: NcPoly, indices: Iterable[int]) -> TensorPoly:
    """d_{i_1} (x) ... (x) d_{i_n}: each step differentiates the last slot."""
    T = as_tensor(P)
    for i in indices:
        T = _derive_last_slot(T, i)
    return T


def _compositions(r: int, parts: int) -> Iterable[tuple[int, ...]]:
    for cuts in itertools.combinations(range(1, r), parts - 1):
        bounds = (0,) + cuts + (r,)
        yield tuple(bounds[t + 1] - bounds[t] for t in range(parts))


def power_derivative_expansion(P: NcPoly, indices: Iterable[int], k: int) -> TensorPoly:
    """
    d_{z_1} o ... o d_{z_r} (P^k) written as the sum over the factors hit.

    Sum over x hit factors, block sizes r_1 + ... + r_x = r and positions k_1 < ... < k_x <= k of
    P^{k_1-1} (d_{block_1} P) P^{k_2-k_1-1} ... (d_{block_x} P) P^{k-k_x}, products slot-merged.
    """
    zs = list(indices)
    r = len(zs)
    if k < 1 or r < 1:
        raise ValueError("power_derivative_expansion needs k >= 1 and at least one index")
    powers = [as_tensor(poly_pow(P, e)) for e in range(k)]
    total = TensorPoly(r + 1, P.alphabet, P.algebra)
    for x in range(1, min(r, k) + 1):
        for sizes in _compositions(r, x):
            blocks, start = [], 0
            for size in sizes:
                blocks.append(higher_derivative(P, zs[start:start + size]))
                start += size
            for positions in itertools.combinations(range(1, k + 1), x):
                acc = powers[positions[0] - 1]
                for b in range(x):
                    acc = tensor_mul(acc, blocks[b])
                    nxt = positions[b + 1] if b + 1 < x else k + 1
                    acc = tensor_mul(acc, powers[nxt - positions[b] - 1])
                total = tensor_add(total, acc)
    return total


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate_terms(P: NcPoly, letter: Callable[[Generator], np.ndarray], dim: int) -> np.ndarray:
    """sum_M a_M (x) M(letter(g)...) as a dense (m*dim) x (m*dim) matrix."""
    cache: dict[Word, np.ndarray] = {EMPTY: np.eye(dim, dtype=complex)}
    letters: dict[Generator, np.ndarray] = {}

    def word_matrix(w: Word) -> np.ndarray:
        if w in cache:
            return cache[w]
        g = w.letters[-1]
        if g not in letters:
            mat = np.asarray(letter(g), dtype=complex)
            if mat.shape != (dim, dim):
                raise ValueError(f"Assigned matrix for {g} has shape {mat.shape}, expected {(dim, dim)}")
            letters[g] = mat
        cache[w] = word_matrix(w[:-1]) @ letters[g]
        return cache[w]

    m = P.algebra.dim
    out = np.zeros((m * dim, m * dim), dtype=complex)
    for w, a in P.items():
        out += np.kron(a, word_matrix(w))
    return out


# ---------------------------------------------------------------------------
# DSL
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<imag>i)(?![A-Za-z0-9])"
    r"|(?P<gen>[XYZ]\d+)"
    r"|(?P<op>[-+*^()])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"Unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: Alphabet, algebra: CoeffAlgebra):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.alphabet = alphabet
        self.algebra = algebra

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at_end_position(self) -> int:
        tok = self.peek()
        return tok[2] if tok else len(self.text)

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("Unexpected end of input", len(self.text))
        self.pos += 1
        return tok

    def parse(self) -> NcPoly:
        if not self.tokens:
            raise ParseError("Empty polynomial", 0)
        out = self.expr()
        if self.peek() is not None:
            raise ParseError(f"Unexpected token {self.peek()[1]!r}", self.peek()[2])
        return out

    def expr(self) -> NcPoly:
        sign = 1
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] in "+-":
            self.take()
            sign = -1 if tok[1] == "-" else 1
        out = poly_scale(self.term(), sign)
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in "+-":
            self.take()
            t = self.term()
            out = poly_add(out, t) if tok[1] == "+" else poly_sub(out, t)
        return out

    def _starts_atom(self, tok) -> bool:
        if tok is None:
            return False
        return tok[0] in ("num", "imag", "gen") or (tok[0] == "op" and tok[1] == "(")

    def term(self) -> NcPoly:
        out = self.power()
        while True:
            tok = self.peek()
            if tok and tok[0] == "op" and tok[1] == "*":
                self.take()
                out = poly_mul(out, self.power())
            elif self._starts_atom(tok):
                out = poly_mul(out, self.power())
            else:
                return out

    def power(self) -> NcPoly:
        base = self.atom()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.take()
            kind, value, where = self.take()
            if kind != "num" or not value.isdigit():
                raise ParseError("Exponent must be a non-negative integer", where)
            return poly_pow(base, int(value))
        return base

    def atom(self) -> NcPoly:
        kind, value, where = self.take()
        if kind == "num":
            c = complex(0, float(value[:-1])) if value.endswith("i") else float(value)
            return poly_const(c, self.alphabet, self.algebra)
        if kind == "imag":
            return poly_const(1j, self.alphabet, self.algebra)
        if kind == "gen":
            g = Generator.from_tag(value)
            try:
                self.alphabet.check(g)
            except AlphabetError as e:
                raise ParseError(str(e), where) from e
            return poly_generator(g, self.alphabet, self.algebra)
        if value == "(":
            inner = self.expr()
            kind2, value2, where2 = self.take()
            if value2 != ")":
                raise ParseError("Expected ')'", where2)
            return inner
        raise ParseError(f"Unexpected token {value!r}", where)


def infer_alphabet(text: str) -> Alphabet:
    """Smallest alphabet containing every generator mentioned in the text."""
    d = max((int(i) for i in re.findall(r"X(\d+)", text)), default=1)
    q = max((int(i) for i in re.findall(r"[YZ](\d+)", text)), default=0)
    return Alphabet(d, q)


def parse_poly(text: str, alphabet: Alphabet | None = None, algebra: CoeffAlgebra | None = None) -> NcPoly:
    """Parse the polynomial DSL. Y<k> is read as Z<k>; juxtaposed factors multiply."""
    alphabet = alphabet or infer_alphabet(text)
    return _Parser(text, alphabet, algebra or CoeffAlgebra()).parse()


def _format_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _format_coeff(c: complex) -> tuple[str, str]:
    """(sign, magnitude text); complex values are parenthesized and always '+'."""
    if c.imag == 0:
        sign = "-" if c.real < 0 else "+"
        return sign, _format_real(abs(c.real))
    im = c.imag
    im_text = f"{'-' if im < 0 else '+'}{_format_real(abs(im))}i"
    return "+", f"({_format_real(c.real)}{im_text})"


def format_poly(P: NcPoly) -> str:
    """Print a scalar polynomial in the DSL; parse_poly(format_poly(P)) == P."""
    if not P.algebra.is_scalar:
        raise ValueError("Matrix-coefficient polynomials are printed via poly_to_json")
    if P.is_zero():
        return "0"
    parts = []
    for w, a in P.items():
        sign, mag = _format_coeff(complex(a[0, 0]))
        if len(w) == 0:
            body = mag
        elif mag == "1":
            body = str(w)
        else:
            body = f"{mag}*{w}"
        if not parts:
            parts.append(body if sign == "+" else f"-{body}")
        else:
            parts.append(f"{sign} {body}")
    return " ".join(parts)


def poly_to_json(P: NcPoly) -> dict:
    return {
        "dim": P.algebra.dim,
        "terms": [
            {
                "coeff": [[[float(z.real), float(z.imag)] for z in row] for row in a],
                "word": [str(g) for g in w],
            }
            for w, a in P.items()
        ],
    }


def _json_coeff(raw) -> complex | np.ndarray:
    """A number or one [re, im] pair is a scalar; a matrix of [re, im] pairs is a coefficient matrix."""
    if isinstance(raw, (int, float)):
        return complex(raw)
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (2,):
        return complex(arr[0], arr[1])
    raise ValueError(f"Coefficient must be a matrix of [re, im] pairs, got shape {arr.shape}")


def poly_from_json(obj: Mapping, alphabet: Alphabet | None = None) -> NcPoly:
    raw_terms = obj.get("terms", [])
    parsed = [(Word.from_tags(t.get("word", [])), _json_coeff(t["coeff"])) for t in raw_terms]
    shapes = [c.shape[0] for _, c in parsed if isinstance(c, np.ndarray)]
    dim = int(obj.get("dim", shapes[0] if shapes else 1))
    if alphabet is None:
        d = max((g.index for w, _ in parsed for g in w if g.is_semicircular), default=1)
        q = max((g.index for w, _ in parsed for g in w if not g.is_semicircular), default=0)
        alphabet = Alphabet(d, q)
    return NcPoly(alphabet, CoeffAlgebra(dim), parsed)
