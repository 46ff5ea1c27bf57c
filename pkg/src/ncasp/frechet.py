"""Fréchet derivatives of matrix polynomials and the stability quantities built on them.

Vectorization is column-major throughout: ``vec(A X B) = (B^T kron A) vec(X)``.
The derivative is complex-linear in its argument, so plain transposes (not
conjugate transposes) appear in the Kronecker form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .asm import ShiftSet, apply_filter
from .ncpoly import NcPolynomial, Word, word_matrix

VEC_CAP = 4096
DENSE_SVD_CAP = 4096


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


# -- perturbations -----------------------------------------------------------


@dataclass
class Perturbation:
    """Per-generator affine deformation ``T(S_i) = T0_i + T1_i S_i``."""

    T0: list[np.ndarray]
    T1: list[np.ndarray]

    def __post_init__(self):
        if len(self.T0) != len(self.T1):
            raise ValueError("T0 and T1 must have one entry per generator")
        self.T0 = [np.asarray(T) for T in self.T0]
        self.T1 = [np.asarray(T) for T in self.T1]
        n = self.T0[0].shape[0] if self.T0 else 0
        for T in (*self.T0, *self.T1):
            if T.shape != (n, n):
                raise ValueError(f"perturbation blocks must be {n}x{n}, got {T.shape}")

    @classmethod
    def zero(cls, m: int, n: int) -> "Perturbation":
        return cls([np.zeros((n, n)) for _ in range(m)], [np.zeros((n, n)) for _ in range(m)])

    @classmethod
    def random(
        cls,
        m: int,
        n: int,
        epsilon: float,
        mode: str = "both",
        distribution: str = "uniform",
        seed: int = 0,
    ) -> "Perturbation":
        """Entries i.i.d. in ``[-epsilon, epsilon]`` (or N(0, epsilon^2)).

        ``mode`` selects which of T0 (additive) / T1 (relative) are nonzero.
        The underlying draws depend only on ``seed``, so sweeping ``epsilon``
        rescales one fixed direction.
        """
        if mode not in ("additive", "relative", "both"):
            raise ValueError(f"unknown perturbation mode {mode!r}")
        rng = np.random.default_rng(seed)
        if distribution == "uniform":
            draw = lambda: rng.uniform(-1.0, 1.0, size=(n, n))  # noqa: E731
        elif distribution == "gaussian":
            draw = lambda: rng.standard_normal((n, n))  # noqa: E731
        else:
            raise ValueError(f"unknown distribution {distribution!r}")
        base0 = [draw() for _ in range(m)]
        base1 = [draw() for _ in range(m)]
        T0 = [epsilon * B if mode in ("additive", "both") else np.zeros((n, n)) for B in base0]
        T1 = [epsilon * B if mode in ("relative", "both") else np.zeros((n, n)) for B in base1]
        return cls(T0, T1)

    @property
    def count(self) -> int:
        return len(self.T0)

    def scaled(self, c: float) -> "Perturbation":
        return Perturbation([c * T for T in self.T0], [c * T for T in self.T1])

    def T(self, S: ShiftSet) -> list[np.ndarray]:
        """``T(S_i)`` for each generator."""
        return [T0 + T1 @ A for T0, T1, A in zip(self.T0, self.T1, S.matrices)]

    def derivative(self, i: int) -> np.ndarray:
        """``D_T(S_i)``: the Fréchet derivative of ``S -> T0 + T1 S`` is left-multiplication by T1."""
        return self.T1[i]


def perturb(S: ShiftSet, P: Perturbation) -> ShiftSet:
    """``S~_i = S_i + T0_i + T1_i S_i``."""
    if P.count != S.count:
        raise ValueError(f"perturbation has {P.count} generators, shift set has {S.count}")
    if P.count and P.T0[0].shape[0] != S.n:
        raise ValueError(f"perturbation is {P.T0[0].shape[0]}-dimensional, shift set is {S.n}")
    return ShiftSet([A + T for A, T in zip(S.matrices, P.T(S))])


def delta_factor(P: Perturbation) -> float:
    """Smallest ``delta`` with ``||T||_F <= delta ||T||_2`` over every T0_i, T1_i."""
    best = 0.0
    for T in (*P.T0, *P.T1):
        s = np.linalg.norm(T, 2)
        if s > 0:
            best = max(best, np.linalg.norm(T, "fro") / s)
    return float(best)


# -- derivative operators ----------------------------------------------------


@dataclass
class DerivativeOperator:
    """Linear map ``xi -> sum_r f_r xi h_r`` on ``n x n`` matrices."""

    generator: int
    n: int
    terms: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi)
        if xi.shape != (self.n, self.n):
            raise ValueError(f"expected {self.n}x{self.n} direction, got {xi.shape}")
        out = np.zeros((self.n, self.n), dtype=np.result_type(xi, *(f for f, _ in self.terms), float))
        for f, h in self.terms:
            out += f @ xi @ h
        return out

    def vectorized(self) -> np.ndarray:
        n2 = self.n * self.n
        if n2 > VEC_CAP:
            raise ValueError(f"vectorized operator would be {n2}x{n2}; cap is {VEC_CAP}")
        out = np.zeros((n2, n2), dtype=np.result_type(*(f for f, _ in self.terms), float))
        for f, h in self.terms:
            out += np.kron(h.T, f)
        return out

    def scaled(self, c: complex) -> "DerivativeOperator":
        return DerivativeOperator(self.generator, self.n, [(c * f, h) for f, h in self.terms])


def word_derivative(w: Word, i: int, S: ShiftSet) -> DerivativeOperator:
    """Product rule over each occurrence of letter ``i`` in ``w``."""
    if not 0 <= i < S.count:
        raise ValueError(f"generator {i} out of range for {S.count} generators")
    terms = []
    for pos, a in enumerate(w):
        if a == i:
            terms.append((word_matrix(w[:pos], S), word_matrix(w[pos + 1:], S)))
    return DerivativeOperator(i, S.n, terms)


def _check_dims(p: NcPolynomial, S: ShiftSet, i: int) -> None:
    if p.num_generators != S.count:
        raise ValueError(f"polynomial has {p.num_generators} generators, shift set has {S.count}")
    if not 0 <= i < S.count:
        raise ValueError(f"generator {i} out of range")


def _prefix_suffix_terms(p: NcPolynomial, S: ShiftSet, i: int) -> list[tuple[complex, np.ndarray, np.ndarray]]:
    mats = S.matrices
    n = S.n
    eye = np.eye(n, dtype=np.result_type(*mats, float))
    prefix: dict[Word, np.ndarray] = {(): eye}
    suffix: dict[Word, np.ndarray] = {(): eye}

    def pre(w):
        if w not in prefix:
            prefix[w] = pre(w[:-1]) @ mats[w[-1]]
        return prefix[w]

    def suf(w):
        if w not in suffix:
            suffix[w] = mats[w[0]] @ suf(w[1:])
        return suffix[w]

    out = []
    for w, c in p.items():
        for pos, a in enumerate(w):
            if a == i:
                out.append((c, pre(w[:pos]), suf(w[pos + 1:])))
    return out


def derivative_operator(p: NcPolynomial, S: ShiftSet, i: int) -> DerivativeOperator:
    """Partial Fréchet derivative of ``p`` with respect to ``S_i`` as an operator."""
    _check_dims(p, S, i)
    return DerivativeOperator(i, S.n, [(c * f, h) for c, f, h in _prefix_suffix_terms(p, S, i)])


def frechet_apply(p: NcPolynomial, S: ShiftSet, i: int, xi: np.ndarray) -> np.ndarray:
    """``D_{p|S_i}(S){xi}``: first-order change of ``p(S)`` under ``S_i -> S_i + xi``."""
    _check_dims(p, S, i)
    xi = np.asarray(xi)
    if xi.shape != (S.n, S.n):
        raise ValueError(f"direction must be {S.n}x{S.n}, got {xi.shape}")
    return derivative_operator(p, S, i)(xi)


def frechet_vectorized(
    p: NcPolynomial, S: ShiftSet, i: int, right_multiply: bool = False, cap: int = VEC_CAP
) -> np.ndarray:
    """``n^2 x n^2`` matrix of the derivative acting on ``vec(xi)``.

    With ``right_multiply`` the operator is ``xi -> D{xi S_i}``, so that
    ``frechet_vectorized(...) @ vec(xi) == vec(frechet_apply(p, S, i, xi @ S_i))``.
    """
    _check_dims(p, S, i)
    n2 = S.n * S.n
    if n2 > cap:
        raise ValueError(f"vectorized operator would be {n2}x{n2}; cap is {cap}")
    Si = S.matrices[i]
    terms = _prefix_suffix_terms(p, S, i)
    dtype = np.result_type(*S.matrices, *(np.asarray(c) for c, _, _ in terms), float) if terms else float
    out = np.zeros((n2, n2), dtype=dtype)
    for c, f, h in terms:
        right = Si @ h if right_multiply else h
        out += c * np.kron(right.T, f)
    return out


def frechet_norm(p: NcPolynomial, S: ShiftSet, i: int, right_multiply: bool = False, vec_limit: int = 64) -> float:
    """Operator 2-norm of the (optionally right-multiplied) derivative.

    Dense for ``n <= vec_limit``; otherwise matrix-free power iteration on
    ``D^* D`` through the prefix/suffix terms.
    """
    if S.n <= vec_limit:
        return operator_norm(frechet_vectorized(p, S, i, right_multiply))
    Si = S.matrices[i]
    terms = [(c * f, Si @ h if right_multiply else h) for c, f, h in _prefix_suffix_terms(p, S, i)]
    if not terms:
        return 0.0

    def fwd(X):
        return sum(f @ X @ h for f, h in terms)

    def adj(Y):
        return sum(f.conj().T @ Y @ h.conj().T for f, h in terms)

    return _power_norm(fwd, adj, (S.n, S.n), seed=0)


# -- norms -------------------------------------------------------------------


def operator_norm(A: np.ndarray, method: str = "auto", tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest singular value. Dense SVD up to side 4096, else power iteration."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    if not np.all(np.isfinite(A)):
        raise ValueError("operator_norm: non-finite entries")
    if method == "auto":
        method = "svd" if max(A.shape) <= DENSE_SVD_CAP else "power"
    if method == "svd":
        return float(np.linalg.norm(A, 2))
    if method == "power":
        return _power_norm(lambda v: A @ v, lambda v: A.conj().T @ v, (A.shape[1],), tol=tol, max_iter=max_iter)
    raise ValueError(f"unknown method {method!r}")


def _power_norm(fwd, adj, shape, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = adj(fwd(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new = np.sqrt(nw)
        v = w / nw
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(np.linalg.norm(fwd(v)))


# -- Lipschitz estimation ----------------------------------------------------


@dataclass
class LipschitzEstimate:
    L0_hat: float
    L1_hat: float
    sample_count: int
    radius: float
    block_size: int
    seed: int
    per_sample_L0: list[float] = field(default_factory=list)
    per_sample_L1: list[float] = field(default_factory=list)


def sample_domain(m: int, r: int, R: float, samples: int, seed: int) -> list[list[np.ndarray]]:
    """Random ``m``-tuples of ``r x r`` matrices inside the ball ``||L||_2 <= R``.

    Sample ``s`` uses seed ``seed + s``. Entries are uniform in [-1, 1] and each
    matrix is rescaled to norm ``u R`` with ``u`` uniform in (0, 1]; sample 0
    sits on the boundary (``u = 1``) since maxima tend to live there.
    """
    out = []
    for s in range(samples):
        rng = np.random.default_rng(seed + s)
        tup = []
        for _ in range(m):
            L = rng.uniform(-1.0, 1.0, size=(r, r))
            u = 1.0 if s == 0 else 1.0 - rng.random()
            nrm = np.linalg.norm(L, 2)
            tup.append(L * (u * R / nrm) if nrm > 0 else L)
        out.append(tup)
    return out


def estimate_lipschitz(
    p: NcPolynomial,
    r: int,
    R: float,
    samples: int,
    seed: int = 0,
    anchors: Sequence[Sequence[np.ndarray]] = (),
) -> LipschitzEstimate:
    """Randomized lower estimates of the Lipschitz and integral-Lipschitz constants.

    ``L0_hat`` is the max over samples of ``sum_i ||Dbar_i||``; ``L1_hat`` the max
    over samples and generators of the right-multiplied derivative norm.
    ``anchors`` are extra tuples known to lie in the domain (e.g. a fixture's own
    spectral blocks); they are evaluated before the random samples.
    """
    if r < 1 or R <= 0 or samples < 1:
        raise ValueError("need r >= 1, R > 0, samples >= 1")
    m = p.num_generators
    points = [list(a) for a in anchors] + sample_domain(m, r, R, samples, seed)
    l0s, l1s = [], []
    for tup in points:
        S = ShiftSet(tup)
        l0s.append(sum(frechet_norm(p, S, i) for i in range(m)))
        l1s.append(max(frechet_norm(p, S, i, right_multiply=True) for i in range(m)))
    return LipschitzEstimate(
        L0_hat=float(max(l0s)),
        L1_hat=float(max(l1s)),
        sample_count=len(points),
        radius=R,
        block_size=r,
        seed=seed,
        per_sample_L0=l0s,
        per_sample_L1=l1s,
    )


# -- stability ---------------------------------------------------------------


@dataclass
class StabilityReport:
    measured: float
    first_order: float
    theorem3_bound: float
    residual: float
    delta: float
    L0: float
    L1: float
    sup_T: float
    sup_DT: float
    x_norm: float


def stability_report(
    p: NcPolynomial,
    S: ShiftSet,
    P: Perturbation,
    x: np.ndarray,
    L0: float | None = None,
    L1: float | None = None,
    delta: float | None = None,
    estimate_opts: dict | None = None,
) -> StabilityReport:
    """Measured filter deformation against its first-order prediction and the Lipschitz bound.

    The bound is ``m delta (L0 sup||T(S_i)|| + L1 sup||T1_i||) ||x||``. Missing
    ``L0``/``L1`` are estimated with ``estimate_opts`` (keys r, R, samples, seed).
    """
    x = np.asarray(x)
    if x.shape[0] != S.n:
        raise ValueError(f"signal length {x.shape[0]} does not match operator size {S.n}")
    St = perturb(S, P)
    y = apply_filter(p, S, x)
    yt = apply_filter(p, St, x)
    Ts = P.T(S)
    m = S.count
    D_terms = [frechet_apply(p, S, i, Ts[i]) for i in range(m)]
    x_norm = float(np.linalg.norm(x))
    first = sum(operator_norm(D) for D in D_terms) * x_norm
    lin = sum(D for D in D_terms) @ x if D_terms else np.zeros_like(y)
    residual = float(np.linalg.norm(yt - y - lin))

    if L0 is None or L1 is None:
        opts = {"r": S.n, "R": max(operator_norm(A) for A in S.matrices) or 1.0, "samples": 32, "seed": 0}
        opts.update(estimate_opts or {})
        est = estimate_lipschitz(p, opts["r"], opts["R"], opts["samples"], opts["seed"], opts.get("anchors", ()))
        L0 = est.L0_hat if L0 is None else L0
        L1 = est.L1_hat if L1 is None else L1
    if delta is None:
        delta = delta_factor(P)
    sup_T = max((operator_norm(T) for T in Ts), default=0.0)
    sup_DT = max((operator_norm(P.derivative(i)) for i in range(m)), default=0.0)
    bound = m * delta * (L0 * sup_T + L1 * sup_DT) * x_norm
    return StabilityReport(
        measured=float(np.linalg.norm(y - yt)),
        first_order=float(first),
        theorem3_bound=float(bound),
        residual=residual,
        delta=float(delta),
        L0=float(L0),
        L1=float(L1),
        sup_T=float(sup_T),
        sup_DT=float(sup_DT),
        x_norm=x_norm,
    )


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])

