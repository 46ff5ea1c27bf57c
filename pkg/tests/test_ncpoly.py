from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncasp.ncpoly import (
    NcPolynomial,
    commutator,
    enumerate_monomials,
    evaluate,
    format_polynomial,
    letter_counts,
    num_monomials,
    parse_polynomial,
    word_matrix,
)

from conftest import random_shifts


def brute_eval(p, mats):
    """Oracle: multiply each word out from scratch."""
    n = mats[0].shape[0]
    out = np.zeros((n, n), dtype=complex)
    for w, c in p.items():
        out += c * reduce(np.matmul, [mats[a] for a in w], np.eye(n))
    return out


coeff = st.floats(-4, 4, allow_nan=False).map(lambda c: round(c, 3))


@st.composite
def polys(draw, m=2, max_degree=3):
    words = enumerate_monomials(m, max_degree)
    picked = draw(st.lists(st.sampled_from(words), max_size=6))
    return NcPolynomial(m, {w: draw(coeff) for w in picked})


def test_monomial_order_and_count():
    words = enumerate_monomials(2, 2)
    assert words == [(), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]
    assert num_monomials(3, 3) == 1 + 3 + 9 + 27 == len(enumerate_monomials(3, 3))
    assert letter_counts((0, 1, 0), 2) == (2, 1)


def test_zero_coefficients_pruned():
    p = NcPolynomial(2, {(0,): 1.0, (1,): 0.0})
    assert len(p) == 1
    assert (p - p).is_zero()
    assert NcPolynomial(1, {(0,): 2}).coefficient((0,)) == 2.0


def test_bad_letters_rejected():
    with pytest.raises(ValueError):
        NcPolynomial(2, {(2,): 1.0})
    with pytest.raises(ValueError):
        NcPolynomial(0)


def test_noncommutative_product():
    t0, t1 = NcPolynomial.generator(2, 0), NcPolynomial.generator(2, 1)
    assert t0 * t1 != t1 * t0
    assert commutator(2, 0, 1) == t0 * t1 - t1 * t0
    assert (t0 + t1) ** 2 == t0 * t0 + t0 * t1 + t1 * t0 + t1 * t1


def test_unit_word_is_identity(rng):
    S = random_shifts(rng, 2, 4)
    assert np.allclose(evaluate(NcPolynomial.constant(2, 3.0), S), 3 * np.eye(4))
    assert np.allclose(word_matrix((0, 1, 1), S), S[0] @ S[1] @ S[1])


@given(polys(), polys())
def test_evaluation_is_a_homomorphism(p, q):
    rng = np.random.default_rng(0)
    S = random_shifts(rng, 2, 3)
    assert np.allclose(evaluate(p + q, S), evaluate(p, S) + evaluate(q, S), atol=1e-9)
    assert np.allclose(evaluate(p * q, S), evaluate(p, S) @ evaluate(q, S), atol=1e-8)


@given(polys(m=3, max_degree=3))
def test_prefix_cache_matches_brute_force(p):
    S = random_shifts(np.random.default_rng(1), 3, 4)
    assert np.allclose(evaluate(p, S), brute_eval(p, S), atol=1e-10)


@given(polys(m=3))
def test_text_round_trip(p):
    assert parse_polynomial(format_polynomial(p)) == p


def test_complex_round_trip():
    p = NcPolynomial(2, {(0, 1): 1 + 2j, (): -0.5})
    assert parse_polynomial(format_polynomial(p)) == p


def test_parse_errors():
    with pytest.raises(ValueError, match="line 2"):
        parse_polynomial("generators 2\n1.0 * g0.x1\n")
    with pytest.raises(ValueError):
        parse_polynomial("generators 2\n", num_generators=3)


def test_commutative_collapse():
    p = NcPolynomial(2, {(0, 1): 1.0, (1, 0): 2.0, (): 1.0})
    assert np.allclose(p.commutative_collapse(), [1.0, 0.0, 3.0])


def test_commuting_shifts_collapse(rng):
    # with S_0 = S_1 = A the filter becomes the scalar polynomial in A
    A = rng.standard_normal((3, 3))
    p = NcPolynomial.random(2, 3, rng)
    c = p.commutative_collapse()
    expect = sum(ck * np.linalg.matrix_power(A, k) for k, ck in enumerate(c))
    assert np.allclose(evaluate(p, [A, A]), expect)
