"""Quaternion signal model over length-N time signals with circular delay.

Signals are four real channels (coefficients of 1, i, j, k). Filters are
``p1(t) 1 + p2(t) i + p3(t) j + p4(t) k`` with ``t`` realized as the circular
delay ``C``. Channel routing follows the Hamilton product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algnn import (
    NetworkSpec,
    TrainOptions,
    forward,
    forward_with_operators,
    init_network,
    layer_operators,
    train,
)
from .asm import ShiftSet
from .data import synth_quaternion_classification
from .frechet import frechet_norm, loglog_slope
from .ncpoly import NcPolynomial
from .spectral import cyclic_shift

BASIS = ("1", "i", "j", "k")

# e_a * e_b = sign * e_c, indexed [a][b] -> (sign, c) with 0=1, 1=i, 2=j, 3=k.
HAMILTON = (
    ((1, 0), (1, 1), (1, 2), (1, 3)),
    ((1, 1), (-1, 0), (1, 3), (-1, 2)),
    ((1, 2), (-1, 3), (-1, 0), (1, 1)),
    ((1, 3), (1, 2), (-1, 1), (-1, 0)),
)


def quaternion_generator_matrices() -> ShiftSet:
    """Left-multiplication matrices of i, j, k on coordinates (w, x, y, z)."""
    Mi = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
    Mj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
    Mk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
    return ShiftSet([Mi, Mj, Mk])


def quaternion_relations() -> dict[str, NcPolynomial]:
    """Defining relations of the quaternions as polynomials in (i, j, k) that must vanish."""
    one = NcPolynomial.constant(3, 1.0)
    i, j, k = (NcPolynomial.generator(3, a) for a in range(3))
    return {
        "i^2 = -1": i * i + one,
        "j^2 = -1": j * j + one,
        "k^2 = -1": k * k + one,
        "ij = k": i * j - k,
        "ji = -k": j * i + k,
        "jk = i": j * k - i,
        "kj = -i": k * j + i,
        "ki = j": k * i - j,
        "ik = -j": i * k + j,
        "ijk = -1": i * j * k + one,
    }


def reduce_word(word) -> tuple[int, int]:
    """Reduce a product of basis units (indices into 1, i, j, k) to ``(sign, unit)``."""
    sign, cur = 1, 0
    for a in word:
        s, cur = HAMILTON[cur][a]
        sign *= s
    return sign, cur


@dataclass
class QuaternionSignal:
    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.w, self.x, self.y, self.z = (np.asarray(v, dtype=float) for v in (self.w, self.x, self.y, self.z))
        if not (len(self.w) == len(self.x) == len(self.y) == len(self.z)):
            raise ValueError("all four quaternion components must share one length")

    @classmethod
    def from_stacked(cls, v: np.ndarray) -> "QuaternionSignal":
        v = np.asarray(v, dtype=float)
        if v.size % 4:
            raise ValueError("stacked quaternion signal length must be a multiple of 4")
        return cls(*v.reshape(4, -1))

    @property
    def components(self) -> list[np.ndarray]:
        return [self.w, self.x, self.y, self.z]

    @property
    def length(self) -> int:
        return len(self.w)

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.components)


@dataclass
class QuaternionFilter:
    """Tap vectors ``p1..p4`` (lowest delay first) for the 1, i, j, k parts."""

    taps: np.ndarray  # (4, K)

    def __post_init__(self):
        self.taps = np.atleast_2d(np.asarray(self.taps, dtype=float))
        if self.taps.shape[0] != 4:
            raise ValueError("a quaternion filter needs four tap vectors")
        if not np.all(np.isfinite(self.taps)):
            raise ValueError("filter taps must be finite")

    @property
    def num_taps(self) -> int:
        return self.taps.shape[1]


def circular_filter(taps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``p(C) x = sum_k taps[k] C^k x`` for the circular delay ``C``."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    for k, h in enumerate(taps):
        if h:
            out += h * np.roll(x, k)
    return out


def quaternion_convolve(F: QuaternionFilter, u: QuaternionSignal, C: np.ndarray | None = None) -> QuaternionSignal:
    """Hamilton product of the filter with the signal, each part acting by circular convolution.

    ``C`` may be any N x N shift realizing ``t``; by default the circular delay.
    """
    N = u.length
    if C is not None:
        C = np.asarray(C)
        if C.shape != (N, N):
            raise ValueError(f"shift must be {N}x{N}, got {C.shape}")

    def apply(taps, v):
        if C is None:
            return circular_filter(taps, v)
        out, cur = np.zeros(N), v.astype(float)
        for h in taps:
            out += h * cur
            cur = C @ cur
        return out

    comps = u.components
    out = [np.zeros(N) for _ in range(4)]
    for a in range(4):
        for b in range(4):
            sign, c = HAMILTON[a][b]
            out[c] += sign * apply(F.taps[a], comps[b])
    return QuaternionSignal(*out)


def block_shift_set(N: int) -> ShiftSet:
    """Generators of the 4N-dimensional realization: ``I_4 kron C`` then ``M_a kron I_N`` for i, j, k."""
    C = cyclic_shift(N)
    gens = quaternion_generator_matrices()
    return ShiftSet([np.kron(np.eye(4), C)] + [np.kron(M, np.eye(N)) for M in gens])


def filter_words(taps: int) -> list[tuple[int, ...]]:
    """Word list ``e_a t^k`` (unit a in 1, i, j, k; delay k) for quaternion filters in the block realization."""
    words = []
    for a in range(4):
        for k in range(taps):
            words.append(((a,) if a else ()) + (0,) * k)
    return words


def filter_polynomial(F: QuaternionFilter) -> NcPolynomial:
    """The filter as a polynomial in (t, i, j, k) over :func:`filter_words`."""
    return NcPolynomial.from_coefficients(4, filter_words(F.num_taps), F.taps.ravel())


def block_matrix(F: QuaternionFilter, N: int) -> np.ndarray:
    """``sum_a M_a kron p_a(C)``, the 4N x 4N realization of the filter."""
    C = cyclic_shift(N)
    mats = [np.eye(4)] + list(quaternion_generator_matrices().matrices)
    out = np.zeros((4 * N, 4 * N))
    for a in range(4):
        pC = sum(h * np.linalg.matrix_power(C, k) for k, h in enumerate(F.taps[a]))
        out += np.kron(mats[a], pC)
    return out


# -- integral-Lipschitz emptiness --------------------------------------------


@dataclass
class ILEmptinessReport:
    reduction_table: dict[tuple[int, ...], tuple[int, int]]
    closed: bool
    radii: list[float]
    il_norms: list[float]
    growth_slope: float


def il_norm_at(F: QuaternionFilter, lam: complex) -> float:
    """Right-multiplied derivative norm in the delay variable at frequency ``lam``.

    The irreducible block pairs the scalar delay frequency with the 4-D action
    of the quaternion units.
    """
    gens = quaternion_generator_matrices().matrices
    S = ShiftSet([lam * np.eye(4)] + [M.astype(complex) for M in gens])
    return frechet_norm(filter_polynomial(F), S, 0, right_multiply=True)


def quaternion_il_emptiness_check(
    max_degree: int, F: QuaternionFilter | None = None, radii=(10.0, 30.0, 100.0, 300.0, 1000.0), angles: int = 16
) -> ILEmptinessReport:
    """Every unit monomial reduces to one of eight signed units, and the IL norm of a
    filter with a nonconstant tap polynomial grows without bound in the frequency radius.

    ``growth_slope`` is the log-log slope of ``sup_{|lam| = R}`` IL norm against ``R``.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    table = {}
    for d in range(max_degree + 1):
        for w in np.ndindex(*(4,) * d) if d else [()]:
            table[tuple(w)] = reduce_word(w)
    closed = set(table.values()) <= {(s, c) for s in (1, -1) for c in range(4)}
    if F is None:
        F = QuaternionFilter(np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))
    norms = []
    for R in radii:
        lams = R * np.exp(2j * np.pi * np.arange(angles) / angles)
        norms.append(max(il_norm_at(F, lam) for lam in lams))
    return ILEmptinessReport(table, closed, list(radii), norms, loglog_slope(radii, norms))


# -- perturbation experiment -------------------------------------------------


@dataclass
class QuaternionExperimentConfig:
    epsilons_additive: tuple = (0.005, 0.01, 0.05, 0.1, 0.5)
    epsilons_relative: tuple = (0.05, 0.1, 0.5, 1.0, 5.0)
    num_seeds: int = 5
    signal_length: int = 32
    taps: int = 3
    channels: int = 16
    train_samples: int = 400
    test_samples: int = 400
    noise: float = 0.1
    epochs: int = 30
    lr: float = 0.05
    init_scale: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.num_seeds < 1 or self.signal_length < 4 or self.taps < 1 or self.channels < 1:
            raise ValueError("invalid quaternion experiment configuration")
        if any(e < 0 for e in (*self.epsilons_additive, *self.epsilons_relative)):
            raise ValueError("epsilons must be non-negative")


@dataclass
class QuaternionRow:
    mode: str
    epsilon: float
    first_conv_diff: float
    last_conv_diff: float
    accuracy: float


def build_quaternion_net(cfg: QuaternionExperimentConfig) -> NetworkSpec:
    n = 4 * cfg.signal_length
    return init_network(
        4, [1, cfg.channels, cfg.channels], words=filter_words(cfg.taps), nonlinearity="relu",
        readout="dense", out_dim=4, n=n, seed=cfg.seed, scale=cfg.init_scale,
    )


def train_quaternion_net(cfg: QuaternionExperimentConfig):
    S = block_shift_set(cfg.signal_length)
    Xtr, ytr = synth_quaternion_classification(cfg.train_samples, cfg.signal_length, cfg.noise, seed=cfg.seed)
    Xte, yte = synth_quaternion_classification(cfg.test_samples, cfg.signal_length, cfg.noise, seed=cfg.seed + 1)
    net = build_quaternion_net(cfg)
    opts = TrainOptions(lr=cfg.lr, epochs=cfg.epochs, batch=32, momentum=0.9, loss="cross_entropy", seed=cfg.seed)
    net, hist = train(net, S, Xtr, ytr, opts)
    return net, S, (Xte, yte), hist


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def _perturbed_operators(ops, mode: str, eps: float, N: int, seed: int):
    """Perturb the real-part delay filter ``A`` of every first-layer quaternion filter.

    additive: ``A -> A + T``; relative: ``A -> A + T A``; ``T`` uniform in [-eps, eps].
    """
    rng = np.random.default_rng(seed)
    H = ops[0].copy()
    F_out, F_in = H.shape[:2]
    for f in range(F_out):
        for g in range(F_in):
            T = eps * rng.uniform(-1.0, 1.0, size=(N, N))
            if mode == "relative":
                A = H[f, g, :N, :N]  # real-part operator sits on the diagonal blocks
                T = T @ A
            H[f, g] += np.kron(np.eye(4), T)
    return [H] + list(ops[1:])


def quaternion_perturb_experiment(cfg: QuaternionExperimentConfig) -> tuple[list[QuaternionRow], float]:
    """Train once, then inject additive/relative noise into the first layer's real-part filters.

    Differences are Frobenius norms over the whole test set of the first and
    last convolution outputs (before the nonlinearity). Returns the rows, in
    sweep order, and the unperturbed test accuracy.
    """
    net, S, (Xte, yte), _ = train_quaternion_net(cfg)
    N = cfg.signal_length
    ops = layer_operators(net, S)
    X = Xte[:, :, None]
    base_out, base_pre, _ = forward_with_operators(net, ops, X)
    base_acc = accuracy(base_out, yte)
    rows = []
    for mode, eps_list in (("additive", cfg.epsilons_additive), ("relative", cfg.epsilons_relative)):
        for eps in eps_list:
            firsts, lasts, accs = [], [], []
            for s in range(cfg.num_seeds):
                pert = _perturbed_operators(ops, mode, eps, N, seed=cfg.seed * 7919 + s)
                out, pre, _ = forward_with_operators(net, pert, X)
                firsts.append(np.linalg.norm(pre[0] - base_pre[0]))
                lasts.append(np.linalg.norm(pre[-1] - base_pre[-1]))
                accs.append(accuracy(out, yte))
            rows.append(QuaternionRow(mode, float(eps), float(np.mean(firsts)), float(np.mean(lasts)), float(np.mean(accs))))
    return rows, base_acc


def unperturbed_accuracy(net: NetworkSpec, S: ShiftSet, X: np.ndarray, y: np.ndarray) -> float:
    out, _ = forward(net, S, X[:, :, None])
    return accuracy(out, y)
