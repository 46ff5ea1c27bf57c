import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncasp.asm import apply_filter, validate_model
from ncasp.quaternion import (
    HAMILTON,
    QuaternionExperimentConfig,
    QuaternionFilter,
    QuaternionSignal,
    _perturbed_operators,
    block_matrix,
    block_shift_set,
    filter_polynomial,
    il_norm_at,
    quaternion_convolve,
    quaternion_generator_matrices,
    quaternion_il_emptiness_check,
    quaternion_relations,
    reduce_word,
)
from ncasp.spectral import cyclic_shift


def hamilton(p, q):
    """Oracle: textbook Hamilton product of (w, x, y, z) 4-tuples."""
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


def random_filter(rng, K=3):
    return QuaternionFilter(rng.standard_normal((4, K)))


def random_signal(rng, N=8):
    return QuaternionSignal(*rng.standard_normal((4, N)))


def test_generator_matrices_are_left_multiplication():
    Mi, Mj, Mk = quaternion_generator_matrices().matrices
    rng = np.random.default_rng(0)
    q = rng.standard_normal(4)
    for M, unit in ((Mi, [0, 1, 0, 0]), (Mj, [0, 0, 1, 0]), (Mk, [0, 0, 0, 1])):
        assert np.allclose(M @ q, hamilton(unit, q))


def test_generator_products():
    Mi, Mj, Mk = quaternion_generator_matrices().matrices
    I = np.eye(4)
    assert np.array_equal(Mi @ Mi, -I)
    assert np.array_equal(Mi @ Mj, Mk) and np.array_equal(Mj @ Mi, -Mk)
    assert np.array_equal(Mi @ Mj @ Mk, -I)


def test_all_relations_hold():
    rel = quaternion_relations()
    report = validate_model(quaternion_generator_matrices(), list(rel.values()))
    assert max(report.residuals) < 1e-12 and report.all_satisfied


def test_hamilton_table_matches_textbook_product():
    for a in range(4):
        for b in range(4):
            s, c = HAMILTON[a][b]
            assert np.array_equal(hamilton(np.eye(4)[a], np.eye(4)[b]), s * np.eye(4)[c])


def test_word_reduction():
    assert reduce_word((1, 1, 1, 1)) == (1, 0)
    assert reduce_word((1, 2, 3)) == (-1, 0)
    assert reduce_word(()) == (1, 0)
    rep = quaternion_il_emptiness_check(3)
    assert rep.closed
    assert len(set(rep.reduction_table.values())) == 8


def test_unit_and_pure_i_filters(rng):
    u = random_signal(rng)
    one = QuaternionFilter(np.array([[1.0], [0], [0], [0]]))
    assert np.allclose(quaternion_convolve(one, u).stacked(), u.stacked())
    i_tap = QuaternionFilter(np.array([[0.0], [1.0], [0], [0]]))
    w = rng.standard_normal(8)
    out = quaternion_convolve(i_tap, QuaternionSignal(w, 0 * w, 0 * w, 0 * w))
    assert np.allclose(out.stacked(), np.concatenate([0 * w, w, 0 * w, 0 * w]))


@pytest.mark.parametrize("seed", range(10))
def test_convolution_matches_block_oracle(seed):
    rng = np.random.default_rng(seed)
    F, u = random_filter(rng), random_signal(rng)
    assert np.allclose(quaternion_convolve(F, u).stacked(), block_matrix(F, 8) @ u.stacked(), atol=1e-10)
    # the same filter as a polynomial on the block realization
    y = apply_filter(filter_polynomial(F), block_shift_set(8), u.stacked())
    assert np.allclose(y, block_matrix(F, 8) @ u.stacked(), atol=1e-10)


def test_explicit_shift_argument(rng):
    F, u = random_filter(rng), random_signal(rng)
    a = quaternion_convolve(F, u)
    b = quaternion_convolve(F, u, C=cyclic_shift(8))
    assert np.allclose(a.stacked(), b.stacked())
    with pytest.raises(ValueError):
        quaternion_convolve(F, u, C=np.eye(5))


def test_pointwise_hamilton_with_single_tap(rng):
    F = QuaternionFilter(rng.standard_normal((4, 1)))
    u = random_signal(rng, N=5)
    out = quaternion_convolve(F, u).stacked().reshape(4, 5)
    U = u.stacked().reshape(4, 5)
    for t in range(5):
        assert np.allclose(out[:, t], hamilton(F.taps[:, 0], U[:, t]))


@given(st.integers(0, 10_000))
def test_associativity(seed):
    rng = np.random.default_rng(seed)
    F, G, u = random_filter(rng), random_filter(rng), random_signal(rng)
    FG = block_matrix(F, 8) @ block_matrix(G, 8)
    lhs = FG @ u.stacked()
    rhs = quaternion_convolve(F, quaternion_convolve(G, u)).stacked()
    assert np.allclose(lhs, rhs, atol=1e-10)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_real_linear(a, b):
    rng = np.random.default_rng(1)
    F, u, v = random_filter(rng), random_signal(rng), random_signal(rng)
    mix = QuaternionSignal.from_stacked(a * u.stacked() + b * v.stacked())
    lhs = quaternion_convolve(F, mix).stacked()
    rhs = a * quaternion_convolve(F, u).stacked() + b * quaternion_convolve(F, v).stacked()
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_signal_validation():
    with pytest.raises(ValueError):
        QuaternionSignal(np.ones(3), np.ones(3), np.ones(2), np.ones(3))
    with pytest.raises(ValueError):
        QuaternionSignal.from_stacked(np.ones(6))
    with pytest.raises(ValueError):
        QuaternionFilter(np.ones((3, 2)))


def test_il_norm_of_delay_is_radius():
    rep = quaternion_il_emptiness_check(2, radii=(1.0, 10.0, 100.0))
    assert np.allclose(rep.il_norms, [1.0, 10.0, 100.0])
    assert rep.growth_slope == pytest.approx(1.0)


def test_constant_filter_has_zero_il_norm(rng):
    F = QuaternionFilter(rng.standard_normal((4, 1)))
    assert il_norm_at(F, 50.0) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_il_growth_linear_for_first_order_taps(seed):
    rng = np.random.default_rng(seed)
    F = QuaternionFilter(rng.standard_normal((4, 2)))
    rep = quaternion_il_emptiness_check(1, F=F)
    assert abs(rep.growth_slope - 1.0) <= 0.05


def test_il_growth_follows_tap_degree(rng):
    F = QuaternionFilter(rng.standard_normal((4, 3)))  # quadratic tap polynomials
    rep = quaternion_il_emptiness_check(1, F=F)
    assert rep.growth_slope > 1.5
    assert rep.il_norms[-1] > rep.il_norms[0]


def test_zero_perturbation_leaves_operators():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((2, 1, 16, 16))
    out = _perturbed_operators([H], "additive", 0.0, 4, seed=1)
    assert np.array_equal(out[0], H)
    rel = _perturbed_operators([H], "relative", 0.3, 4, seed=1)
    assert not np.array_equal(rel[0], H)


def test_config_validation():
    with pytest.raises(ValueError):
        QuaternionExperimentConfig(num_seeds=0)
    with pytest.raises(ValueError):
        QuaternionExperimentConfig(epsilons_additive=(-0.1,))
