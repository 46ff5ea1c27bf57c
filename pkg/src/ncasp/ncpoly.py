"""Free non-commutative polynomials over ``m`` generators.

A word is a tuple of generator indices; the empty tuple is the unit
monomial. Polynomials are immutable maps from words to scalar coefficients
with exact-zero pruning.
"""

from __future__ import annotations

import itertools
import numbers
from typing import Iterable, Mapping, Sequence

import numpy as np

Word = tuple  # tuple[int, ...]; () is the unit monomial


def enumerate_monomials(m: int, max_degree: int) -> list[Word]:
    """All words of length <= ``max_degree``, ordered by degree then lexicographically."""
    if m < 1:
        raise ValueError(f"need at least one generator, got m={m}")
    if max_degree < 0:
        raise ValueError(f"max_degree must be non-negative, got {max_degree}")
    words: list[Word] = []
    for d in range(max_degree + 1):
        words.extend(itertools.product(range(m), repeat=d))
    return words


def num_monomials(m: int, max_degree: int) -> int:
    return sum(m**k for k in range(max_degree + 1))


def letter_counts(word: Word, m: int) -> tuple[int, ...]:
    """Multidegree of a word: how many times each generator occurs."""
    counts = [0] * m
    for letter in word:
        counts[letter] += 1
    return tuple(counts)


class NcPolynomial:
    """Element of the free algebra ``C<t_0, ..., t_{m-1}>``.

    Coefficients are stored exactly as given; only exact zeros are dropped,
    so arithmetic over representable values stays exact.
    """

    __slots__ = ("_m", "_terms", "_hash")

    def __init__(self, num_generators: int, terms: Mapping[Sequence[int], complex] | None = None):
        if num_generators < 1:
            raise ValueError(f"num_generators must be positive, got {num_generators}")
        clean: dict[Word, complex] = {}
        for word, coeff in (terms or {}).items():
            word = tuple(int(a) for a in word)
            for a in word:
                if not 0 <= a < num_generators:
                    raise ValueError(f"letter {a} out of range for {num_generators} generators")
            if not isinstance(coeff, numbers.Number):
                raise TypeError(f"coefficient for {word} is not a scalar: {coeff!r}")
            coeff = _normalize_scalar(coeff)
            total = clean.get(word, 0) + coeff
            if total == 0:
                clean.pop(word, None)
            else:
                clean[word] = total
        self._m = num_generators
        self._terms = dict(sorted(clean.items(), key=lambda kv: (len(kv[0]), kv[0])))
        self._hash = None

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, m: int) -> "NcPolynomial":
        return cls(m)

    @classmethod
    def constant(cls, m: int, c: complex = 1.0) -> "NcPolynomial":
        return cls(m, {(): c})

    @classmethod
    def generator(cls, m: int, i: int) -> "NcPolynomial":
        return cls(m, {(i,): 1.0})

    @classmethod
    def monomial(cls, m: int, word: Sequence[int], c: complex = 1.0) -> "NcPolynomial":
        return cls(m, {tuple(word): c})

    @classmethod
    def from_coefficients(cls, m: int, words: Sequence[Word], coeffs: Iterable[complex]) -> "NcPolynomial":
        coeffs = list(coeffs)
        if len(coeffs) != len(words):
            raise ValueError(f"{len(coeffs)} coefficients for {len(words)} words")
        terms: dict[Word, complex] = {}
        for w, c in zip(words, coeffs):
            terms[tuple(w)] = terms.get(tuple(w), 0) + c
        return cls(m, terms)

    @classmethod
    def random(cls, m: int, max_degree: int, rng: np.random.Generator, scale: float = 1.0) -> "NcPolynomial":
        """Dense random polynomial with i.i.d. normal coefficients."""
        words = enumerate_monomials(m, max_degree)
        return cls.from_coefficients(m, words, scale * rng.standard_normal(len(words)))

    # -- accessors ----------------------------------------------------

    @property
    def num_generators(self) -> int:
        return self._m

    @property
    def terms(self) -> dict[Word, complex]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        """Length of the longest word; -1 for the zero polynomial."""
        return max((len(w) for w in self._terms), default=-1)

    def coefficient(self, word: Sequence[int]) -> complex:
        return self._terms.get(tuple(word), 0.0)

    def coefficients(self, words: Sequence[Word]) -> np.ndarray:
        return np.array([self.coefficient(w) for w in words])

    def is_zero(self) -> bool:
        return not self._terms

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    # -- arithmetic ---------------------------------------------------

    def _check(self, other: "NcPolynomial") -> None:
        if not isinstance(other, NcPolynomial):
            raise TypeError(f"expected NcPolynomial, got {type(other).__name__}")
        if other._m != self._m:
            raise ValueError(f"generator count mismatch: {self._m} vs {other._m}")

    def __add__(self, other):
        if isinstance(other, numbers.Number):
            other = NcPolynomial.constant(self._m, other)
        self._check(other)
        terms = dict(self._terms)
        for w, c in other._terms.items():
            terms[w] = terms.get(w, 0) + c
        return NcPolynomial(self._m, terms)

    __radd__ = __add__

    def __neg__(self):
        return NcPolynomial(self._m, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, numbers.Number):
            other = NcPolynomial.constant(self._m, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: complex) -> "NcPolynomial":
        return NcPolynomial(self._m, {w: c * v for w, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return self.scale(other)
        self._check(other)
        terms: dict[Word, complex] = {}
        for w1, c1 in self._terms.items():
            for w2, c2 in other._terms.items():
                w = w1 + w2
                terms[w] = terms.get(w, 0) + c1 * c2
        return NcPolynomial(self._m, terms)

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = NcPolynomial.constant(self._m, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, NcPolynomial):
            return NotImplemented
        return self._m == other._m and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._m, tuple(self._terms.items())))
        return self._hash

    def __repr__(self):
        if not self._terms:
            return f"NcPolynomial({self._m}, 0)"
        parts = []
        for w, c in self._terms.items():
            name = "*".join(f"t{a}" for a in w) if w else "1"
            parts.append(f"{c!r}*{name}")
        return f"NcPolynomial({self._m}, " + " + ".join(parts) + ")"

    # -- evaluation ---------------------------------------------------

    def __call__(self, *matrices):
        return evaluate(self, matrices)

    def commutative_collapse(self) -> np.ndarray:
        """Univariate coefficients of p(t, t, ..., t), lowest degree first."""
        out = np.zeros(max(self.degree, 0) + 1, dtype=np.result_type(*self._terms.values(), float) if self._terms else float)
        for w, c in self._terms.items():
            out[len(w)] += c
        return out


def _normalize_scalar(c):
    if isinstance(c, (bool, np.bool_)):
        return float(c)
    if isinstance(c, numbers.Integral):
        return float(c)
    if isinstance(c, numbers.Real):
        return float(c)
    c = complex(c)
    return c.real if c.imag == 0 else c


def _as_matrices(S) -> list[np.ndarray]:
    mats = getattr(S, "matrices", S)
    mats = [np.asarray(A) for A in mats]
    if not mats:
        raise ValueError("empty shift set")
    n = mats[0].shape[0]
    for A in mats:
        if A.ndim != 2 or A.shape != (n, n):
            raise ValueError(f"shift matrices must all be {n}x{n}, got {A.shape}")
    return mats


def evaluate(p: NcPolynomial, S) -> np.ndarray:
    """Matrix ``sum_w coeff(w) S_{w_1} ... S_{w_k}``.

    ``S`` is a ShiftSet or a sequence of square matrices. Prefix products
    are shared across words within one call.
    """
    mats = _as_matrices(S)
    if len(mats) != p.num_generators:
        raise ValueError(f"polynomial has {p.num_generators} generators, got {len(mats)} matrices")
    n = mats[0].shape[0]
    dtype = np.result_type(*mats, *(np.asarray(c) for c in p.terms.values()), float)
    out = np.zeros((n, n), dtype=dtype)
    prefix: dict[Word, np.ndarray] = {(): np.eye(n, dtype=dtype)}
    for w, c in p.items():
        out += c * _word_product(w, mats, prefix)
    return out


def _word_product(w: Word, mats: Sequence[np.ndarray], cache: dict) -> np.ndarray:
    if w in cache:
        return cache[w]
    val = _word_product(w[:-1], mats, cache) @ mats[w[-1]]
    cache[w] = val
    return val


def word_matrix(w: Sequence[int], S) -> np.ndarray:
    mats = _as_matrices(S)
    n = mats[0].shape[0]
    out = np.eye(n, dtype=np.result_type(*mats, float))
    for a in w:
        out = out @ mats[a]
    return out


def commutator(m: int, i: int, j: int) -> NcPolynomial:
    gi, gj = NcPolynomial.generator(m, i), NcPolynomial.generator(m, j)
    return gi * gj - gj * gi


# -- text serialization -----------------------------------------------------


def format_polynomial(p: NcPolynomial) -> str:
    """One ``coeff * g0.g1`` term per line under a ``generators m`` header.

    Coefficients use ``repr`` so parsing is lossless.
    """
    lines = [f"generators {p.num_generators}"]
    for w, c in p.items():
        word = ".".join(f"g{a}" for a in w) if w else "1"
        lines.append(f"{c!r} * {word}")
    return "\n".join(lines) + "\n"


def parse_polynomial(text: str, num_generators: int | None = None) -> NcPolynomial:
    m = num_generators
    terms: dict[Word, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("generators"):
            declared = int(line.split()[1])
            if m is not None and m != declared:
                raise ValueError(f"line {lineno}: declares {declared} generators, expected {m}")
            m = declared
            continue
        if "*" not in line:
            raise ValueError(f"line {lineno}: expected 'coeff * word', got {raw!r}")
        coeff_s, word_s = (s.strip() for s in line.rsplit("*", 1))
        try:
            coeff = complex(coeff_s.replace(" ", ""))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad coefficient {coeff_s!r}") from exc
        if word_s == "1":
            word: Word = ()
        else:
            letters = word_s.split(".")
            if not all(tok.startswith("g") and tok[1:].isdigit() for tok in letters):
                raise ValueError(f"line {lineno}: bad word {word_s!r}")
            word = tuple(int(tok[1:]) for tok in letters)
        terms[word] = terms.get(word, 0) + (coeff.real if coeff.imag == 0 else coeff)
    if m is None:
        m = 1 + max((max(w) for w in terms if w), default=0)
    return NcPolynomial(m, terms)
