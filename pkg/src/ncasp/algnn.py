"""Algebraic neural networks built from non-commutative filter banks.

A layer maps ``n x F_in`` features to ``n x F_out`` features via
``Y[:, f] = sum_g p_fg(S) X[:, g]`` followed by a pointwise nonlinearity and
zeroing pooling. Every filter ``p_fg`` is a coefficient vector over a fixed
word list shared by all layers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .asm import ShiftSet
from .frechet import Perturbation, delta_factor, estimate_lipschitz, frechet_vectorized, operator_norm, sample_domain
from .ncpoly import NcPolynomial, Word, enumerate_monomials

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "ncasp-network"
CHECKPOINT_VERSION = 1

# Every nonlinearity here is 1-Lipschitz with sigma(0) = 0.
NONLINEARITIES = ("relu", "abs", "tanh", "identity")
LIPSCHITZ_CONSTANT = {name: 1.0 for name in NONLINEARITIES}


def activate(name: str, y: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(y, 0.0)
    if name == "abs":
        return np.abs(y)
    if name == "tanh":
        return np.tanh(y)
    if name == "identity":
        return y
    raise ValueError(f"unknown nonlinearity {name!r}")


def activate_grad(name: str, y: np.ndarray) -> np.ndarray:
    """Derivative of the nonlinearity; the subgradient at 0 is taken as 0."""
    if name == "relu":
        return (y > 0).astype(float)
    if name == "abs":
        return np.sign(y)
    if name == "tanh":
        return 1.0 - np.tanh(y) ** 2
    if name == "identity":
        return np.ones_like(y)
    raise ValueError(f"unknown nonlinearity {name!r}")


@dataclass
class LayerSpec:
    in_features: int
    out_features: int
    coeffs: np.ndarray  # (out_features, in_features, num_words)
    nonlinearity: str = "relu"
    pooling_mask: np.ndarray | None = None  # True = kept node

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape[:2] != (self.out_features, self.in_features):
            raise ValueError(f"coefficient tensor {self.coeffs.shape} does not match "
                             f"({self.out_features}, {self.in_features}, words)")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.pooling_mask is not None:
            self.pooling_mask = np.asarray(self.pooling_mask, dtype=bool)

    def filter(self, f: int, g: int, words: Sequence[Word], m: int) -> NcPolynomial:
        return NcPolynomial.from_coefficients(m, words, self.coeffs[f, g])


@dataclass
class Readout:
    """Affine map from final-layer features to outputs.

    ``local``: the same ``F_L -> out`` map at every node, optionally reading a
    single node. ``dense``: flatten the kept nodes' features and map to ``out``.
    """

    kind: str
    weight: np.ndarray
    bias: np.ndarray
    node: int | None = None

    def __post_init__(self):
        if self.kind not in ("local", "dense"):
            raise ValueError(f"unknown readout kind {self.kind!r}")
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)


@dataclass
class NetworkSpec:
    num_generators: int
    words: list[Word]
    layers: list[LayerSpec]
    readout: Readout | None = None

    def __post_init__(self):
        self.words = [tuple(w) for w in self.words]
        for k, layer in enumerate(self.layers):
            if layer.coeffs.shape[2] != len(self.words):
                raise ValueError(f"layer {k} has {layer.coeffs.shape[2]} coefficients per filter, "
                                 f"word list has {len(self.words)}")
            if k and layer.in_features != self.layers[k - 1].out_features:
                raise ValueError(f"layer {k} expects {layer.in_features} features, "
                                 f"layer {k - 1} produces {self.layers[k - 1].out_features}")

    @property
    def parameters(self) -> list[np.ndarray]:
        params = [layer.coeffs for layer in self.layers]
        if self.readout is not None:
            params += [self.readout.weight, self.readout.bias]
        return params

    def kept_nodes(self, n: int) -> np.ndarray:
        mask = self.layers[-1].pooling_mask
        return np.arange(n) if mask is None else np.flatnonzero(mask)

    def copy(self) -> "NetworkSpec":
        layers = [LayerSpec(l.in_features, l.out_features, l.coeffs.copy(), l.nonlinearity,
                            None if l.pooling_mask is None else l.pooling_mask.copy()) for l in self.layers]
        ro = None
        if self.readout is not None:
            ro = Readout(self.readout.kind, self.readout.weight.copy(), self.readout.bias.copy(), self.readout.node)
        return NetworkSpec(self.num_generators, list(self.words), layers, ro)


def init_network(
    num_generators: int,
    features: Sequence[int],
    max_degree: int = 2,
    words: Sequence[Word] | None = None,
    nonlinearity: str = "relu",
    masks: Sequence[np.ndarray | None] | None = None,
    readout: str | None = "local",
    out_dim: int = 1,
    readout_node: int | None = None,
    n: int | None = None,
    seed: int = 0,
    scale: float = 1.0,
) -> NetworkSpec:
    """Random network with ``len(features) - 1`` layers.

    Filter coefficients are N(0, scale^2 / (F_in * num_words)). A dense readout
    needs the node count ``n``.
    """
    rng = np.random.default_rng(seed)
    words = list(words) if words is not None else enumerate_monomials(num_generators, max_degree)
    layers = []
    for k, (fi, fo) in enumerate(zip(features[:-1], features[1:])):
        std = scale / np.sqrt(fi * len(words))
        mask = None if masks is None else masks[k]
        layers.append(LayerSpec(fi, fo, std * rng.standard_normal((fo, fi, len(words))), nonlinearity, mask))
    ro = None
    if readout == "local":
        ro = Readout("local", rng.standard_normal((features[-1], out_dim)) / np.sqrt(features[-1]),
                     np.zeros(out_dim), readout_node)
    elif readout == "dense":
        if n is None:
            raise ValueError("a dense readout needs the node count n")
        last_mask = layers[-1].pooling_mask if layers else None
        kept = n if last_mask is None else int(np.count_nonzero(last_mask))
        fan_in = kept * features[-1]
        ro = Readout("dense", rng.standard_normal((fan_in, out_dim)) / np.sqrt(fan_in), np.zeros(out_dim))
    elif readout is not None:
        raise ValueError(f"unknown readout kind {readout!r}")
    return NetworkSpec(num_generators, words, layers, ro)


def degree_pooling_mask(S: ShiftSet, keep: int) -> np.ndarray:
    """Keep the ``keep`` nodes of highest degree on the first shift layer (ties: lower index)."""
    deg = np.abs(S.matrices[0]).sum(axis=1)
    order = sorted(range(S.n), key=lambda u: (-deg[u], u))
    mask = np.zeros(S.n, dtype=bool)
    mask[order[:keep]] = True
    return mask


def word_matrices(words: Sequence[Word], S: ShiftSet) -> np.ndarray:
    """Stack of ``S_{w_1} ... S_{w_k}`` for each word, sharing prefix products."""
    mats = S.matrices
    cache: dict[Word, np.ndarray] = {(): np.eye(S.n)}

    def get(w):
        if w not in cache:
            cache[w] = get(w[:-1]) @ mats[w[-1]]
        return cache[w]

    return np.stack([get(tuple(w)) for w in words])


# -- forward / backward ------------------------------------------------------


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # per layer: (B, n, F_in)
    shifted: list[np.ndarray]  # per layer: (B, W, n, F_in)
    pre: list[np.ndarray]  # per layer: (B, n, F_out)
    activations: list[np.ndarray]  # per layer, after pooling: (B, n, F_out)
    word_mats: np.ndarray
    batched: bool


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :, None], False
    if x.ndim == 2:
        return x[None], False
    if x.ndim == 3:
        return x, True
    raise ValueError(f"expected (n,), (n, F) or (B, n, F) input, got shape {x.shape}")


def _pool(layer: LayerSpec, A: np.ndarray) -> np.ndarray:
    if layer.pooling_mask is None:
        return A
    return A * layer.pooling_mask[None, :, None]


def _readout_forward(net: NetworkSpec, A: np.ndarray) -> np.ndarray:
    ro = net.readout
    if ro is None:
        return A
    if ro.kind == "local":
        out = A @ ro.weight + ro.bias
        return out if ro.node is None else out[:, ro.node, :]
    kept = net.kept_nodes(A.shape[1])
    return A[:, kept, :].reshape(A.shape[0], -1) @ ro.weight + ro.bias


def forward(net: NetworkSpec, S: ShiftSet, x: np.ndarray, word_mats: np.ndarray | None = None):
    """Run the network; returns ``(output, cache)``.

    ``x`` is ``(n,)``, ``(n, F0)`` or a batch ``(B, n, F0)``. ``cache.activations``
    holds each layer's pooled output for backprop and difference reports.
    """
    if S.count != net.num_generators:
        raise ValueError(f"network expects {net.num_generators} shift operators, got {S.count}")
    X, batched = _as_batch(x)
    if X.shape[1] != S.n:
        raise ValueError(f"input has {X.shape[1]} nodes, shift operators are {S.n}x{S.n}")
    if net.layers and X.shape[2] != net.layers[0].in_features:
        raise ValueError(f"input has {X.shape[2]} features, first layer expects {net.layers[0].in_features}")
    W = word_matrices(net.words, S) if word_mats is None else word_mats
    cache = ForwardCache([], [], [], [], W, batched)
    for layer in net.layers:
        Z = np.einsum("wij,bjg->bwig", W, X, optimize=True)
        Y = np.einsum("bwig,fgw->bif", Z, layer.coeffs, optimize=True)
        A = _pool(layer, activate(layer.nonlinearity, Y))
        cache.inputs.append(X)
        cache.shifted.append(Z)
        cache.pre.append(Y)
        cache.activations.append(A)
        X = A
    out = _readout_forward(net, X)
    if not batched:
        out = out[0]
    return out, cache


def layer_operators(net: NetworkSpec, S: ShiftSet) -> list[np.ndarray]:
    """Dense ``(F_out, F_in, n, n)`` operator tensor ``p_fg(S)`` for each layer."""
    W = word_matrices(net.words, S)
    return [np.einsum("fgw,wij->fgij", layer.coeffs, W, optimize=True) for layer in net.layers]


def forward_with_operators(net: NetworkSpec, operators: Sequence[np.ndarray], x: np.ndarray):
    """Forward pass with explicitly supplied (possibly perturbed) layer operators.

    Returns ``(output, pre_activations, activations)``.
    """
    X, batched = _as_batch(x)
    pres, acts = [], []
    for layer, H in zip(net.layers, operators):
        Y = np.einsum("fgij,bjg->bif", H, X, optimize=True)
        X = _pool(layer, activate(layer.nonlinearity, Y))
        pres.append(Y)
        acts.append(X)
    out = _readout_forward(net, X)
    if not batched:
        out = out[0]
    return out, pres, acts


@dataclass
class Gradients:
    coeffs: list[np.ndarray]
    readout_weight: np.ndarray | None = None
    readout_bias: np.ndarray | None = None

    def as_list(self) -> list[np.ndarray]:
        out = list(self.coeffs)
        if self.readout_weight is not None:
            out += [self.readout_weight, self.readout_bias]
        return out


def backward(net: NetworkSpec, cache: ForwardCache, loss_grad: np.ndarray) -> Gradients:
    """Exact reverse-mode gradients given ``dLoss/dOutput`` (same shape as the output)."""
    G = np.asarray(loss_grad, dtype=float)
    if not cache.batched:
        G = G[None]
    A = cache.activations[-1] if cache.activations else cache.inputs[0]
    ro = net.readout
    gw = gb = None
    if ro is None:
        dA = G.reshape(A.shape)
    elif ro.kind == "local":
        if ro.node is not None:
            full = np.zeros(A.shape[:2] + (G.shape[-1],))
            full[:, ro.node, :] = G
            G = full
        gw = np.einsum("bif,bio->fo", A, G)
        gb = G.sum(axis=(0, 1))
        dA = G @ ro.weight.T
    else:
        kept = net.kept_nodes(A.shape[1])
        flat = A[:, kept, :].reshape(A.shape[0], -1)
        gw = flat.T @ G
        gb = G.sum(axis=0)
        dA = np.zeros_like(A)
        dA[:, kept, :] = (G @ ro.weight.T).reshape(A.shape[0], len(kept), A.shape[2])

    W = cache.word_mats
    grads: list[np.ndarray] = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if layer.pooling_mask is not None:
            dA = dA * layer.pooling_mask[None, :, None]
        dY = dA * activate_grad(layer.nonlinearity, cache.pre[k])
        grads[k] = np.einsum("bwig,bif->fgw", cache.shifted[k], dY, optimize=True)
        if k:
            T = np.einsum("bjf,fgw->bwjg", dY, layer.coeffs, optimize=True)
            dA = np.einsum("wji,bwjg->big", W, T, optimize=True)
    return Gradients(grads, gw, gb)


# -- losses ------------------------------------------------------------------


def loss_and_grad(kind: str, output: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient with respect to ``output``."""
    out = np.asarray(output, dtype=float)
    B = out.shape[0]
    if kind == "mse":
        diff = out - np.asarray(target, dtype=float).reshape(out.shape)
        return float(np.mean(np.sum(diff**2, axis=-1))), 2 * diff / B
    if kind == "smooth_l1":
        diff = out - np.asarray(target, dtype=float).reshape(out.shape)
        a = np.abs(diff)
        loss = np.where(a < 1.0, 0.5 * diff**2, a - 0.5)
        return float(np.sum(loss) / diff.size), np.where(a < 1.0, diff, np.sign(diff)) / diff.size
    if kind == "cross_entropy":
        labels = np.asarray(target, dtype=int)
        z = out - out.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        grad = np.exp(logp)
        grad[np.arange(B), labels] -= 1.0
        return float(-logp[np.arange(B), labels].mean()), grad / B
    raise ValueError(f"unknown loss {kind!r}")


# -- integral-Lipschitz regularizer -------------------------------------------


def il_word_operators(words: Sequence[Word], m: int, samples: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """``(samples, m, words, r^2, r^2)`` right-multiplied derivative matrices of each word."""
    out = []
    for tup in samples:
        S = ShiftSet(tup)
        out.append([[frechet_vectorized(NcPolynomial.monomial(m, w), S, i, right_multiply=True)
                     for w in words] for i in range(m)])
    return np.array(out, dtype=float)


def il_penalty(coeffs: np.ndarray, word_ops: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum over filters of ``max_{sample, i} ||sum_w c_w M_w||_2`` and its subgradient.

    The maximizing ``(sample, i)`` uses first-index tie-breaking; the gradient of
    the spectral norm there is ``u^T M_w v`` for the top singular pair.
    """
    F_out, F_in, _ = coeffs.shape
    ops = np.einsum("fgw,siwab->fgsiab", coeffs, word_ops, optimize=True)
    ns, mi = ops.shape[2:4]
    U, s, Vt = np.linalg.svd(ops, full_matrices=False)
    top = s[..., 0].reshape(F_out, F_in, ns * mi)
    best = np.argmax(top, axis=2)
    value = float(np.take_along_axis(top, best[..., None], axis=2).sum())
    si, ii = np.unravel_index(best, (ns, mi))
    f_idx, g_idx = np.meshgrid(np.arange(F_out), np.arange(F_in), indexing="ij")
    u = U[f_idx, g_idx, si, ii, :, 0]
    v = Vt[f_idx, g_idx, si, ii, 0, :]
    M = word_ops[si, ii]  # (F_out, F_in, W, a, b)
    grad = np.einsum("fga,fgwab,fgb->fgw", u, M, v, optimize=True)
    return value, grad


def filter_l1_hat(coeffs: np.ndarray, word_ops: np.ndarray) -> np.ndarray:
    """Per-filter integral-Lipschitz estimate over a fixed sample set."""
    ops = np.einsum("fgw,siwab->fgsiab", coeffs, word_ops, optimize=True)
    s = np.linalg.svd(ops, compute_uv=False)[..., 0]
    return s.reshape(coeffs.shape[0], coeffs.shape[1], -1).max(axis=2)


# -- training ----------------------------------------------------------------


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainOptions:
    lr: float = 0.05
    epochs: int = 40
    batch: int = 32
    momentum: float = 0.9
    loss: str = "mse"
    il_lambda: float = 0.0
    il_block: int = 2
    il_radius: float = 1.0
    il_samples: int = 8
    seed: int = 0


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)  # full-dataset task loss, index 0 = before training
    penalty: list[float] = field(default_factory=list)


def dataset_loss(net: NetworkSpec, S: ShiftSet, X: np.ndarray, y: np.ndarray, kind: str, word_mats=None) -> float:
    out, _ = forward(net, S, X, word_mats)
    return loss_and_grad(kind, out, y)[0]


def train(net: NetworkSpec, S: ShiftSet, X: np.ndarray, y: np.ndarray, opts: TrainOptions) -> tuple[NetworkSpec, TrainHistory]:
    """Minibatch gradient descent with momentum on task loss + ``il_lambda`` * IL penalty.

    The IL sample set is redrawn once per epoch (seeded) and frozen within it.
    Returns a trained copy; the input network is left untouched.
    """
    net = net.copy()
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, :, None]
    rng = np.random.default_rng(opts.seed)
    W = word_matrices(net.words, S)
    m = net.num_generators
    velocity = [np.zeros_like(p) for p in net.parameters]
    hist = TrainHistory()
    hist.loss.append(dataset_loss(net, S, X, y, opts.loss, W))
    B = X.shape[0]
    for epoch in range(opts.epochs):
        word_ops = None
        if opts.il_lambda > 0:
            samples = sample_domain(m, opts.il_block, opts.il_radius, opts.il_samples, seed=opts.seed * 100_003 + epoch)
            word_ops = il_word_operators(net.words, m, samples)
        order = rng.permutation(B)
        for start in range(0, B, opts.batch):
            idx = order[start:start + opts.batch]
            out, cache = forward(net, S, X[idx], W)
            loss, g_out = loss_and_grad(opts.loss, out, y[idx])
            grads = backward(net, cache, g_out).as_list()
            if word_ops is not None:
                for k, layer in enumerate(net.layers):
                    _, g_il = il_penalty(layer.coeffs, word_ops)
                    grads[k] = grads[k] + opts.il_lambda * g_il
            for p, v, g in zip(net.parameters, velocity, grads):
                v *= opts.momentum
                v -= opts.lr * g
                p += v
        full = dataset_loss(net, S, X, y, opts.loss, W)
        if not np.isfinite(full) or not all(np.all(np.isfinite(p)) for p in net.parameters):
            raise TrainingDiverged(f"loss became non-finite at epoch {epoch + 1}")
        hist.loss.append(full)
        if word_ops is not None:
            hist.penalty.append(sum(il_penalty(l.coeffs, word_ops)[0] for l in net.layers))
        log.debug("epoch %d loss %.6g", epoch + 1, full)
    return net, hist


# -- stability ---------------------------------------------------------------


@dataclass
class NetworkStabilityReport:
    layer_differences: list[float]
    end_to_end: float
    output_difference: float
    bound: float
    deltas: list[float]
    B: list[float]
    C: list[float]
    L0: list[float]
    L1: list[float]
    delta: float
    sup_T: float
    sup_DT: float

    @property
    def ratio(self) -> float:
        return self.bound / self.end_to_end if self.end_to_end > 0 else np.inf


def network_stability_report(
    net: NetworkSpec,
    S: ShiftSet,
    S_tilde: ShiftSet,
    x: np.ndarray,
    perturbation: Perturbation | None = None,
    estimate_opts: dict | None = None,
) -> NetworkStabilityReport:
    """Measured layer-wise deformation under ``S -> S~`` and the layered stability bound.

    The bound is ``sum_l Delta_l prod_{r>=l} C_r prod_{r>l} B_r prod_{r<l} C_r B_r ||x||``
    with ``Delta_l = delta m (L0_l sup||T|| + L1_l sup||D_T||)``. ``B_l`` is the
    measured ``max(||p_l(S)||, ||p_l(S~)||)``, so the bound is a posteriori. It is
    only assembled for one feature per layer; otherwise it is NaN. Without an
    explicit ``perturbation`` the change ``S~ - S`` is treated as additive.
    """
    if S.n != S_tilde.n or S.count != S_tilde.count:
        raise ValueError("shift sets must share dimension and generator count")
    X, _ = _as_batch(x)
    out, cache = forward(net, S, X)
    out_t, cache_t = forward(net, S_tilde, X)
    layer_diffs = [float(np.linalg.norm(a - b)) for a, b in zip(cache.activations, cache_t.activations)]
    end = layer_diffs[-1] if layer_diffs else 0.0
    out_diff = float(np.linalg.norm(np.asarray(out) - np.asarray(out_t)))

    if perturbation is None:
        perturbation = Perturbation([Bt - A for A, Bt in zip(S.matrices, S_tilde.matrices)],
                                    [np.zeros((S.n, S.n)) for _ in range(S.count)])
    m = S.count
    delta = delta_factor(perturbation)
    Ts = perturbation.T(S)
    sup_T = max(operator_norm(T) for T in Ts)
    sup_DT = max(operator_norm(perturbation.derivative(i)) for i in range(m))

    one_feature = all(l.in_features == 1 and l.out_features == 1 for l in net.layers)
    L0s, L1s, deltas, Bs, Cs = [], [], [], [], []
    bound = float("nan")
    if one_feature:
        opts = {"r": S.n, "R": max(operator_norm(A) for A in (*S.matrices, *S_tilde.matrices)),
                "samples": 16, "seed": 0}
        opts.update(estimate_opts or {})
        anchors = list(opts.get("anchors", [])) + [list(S.matrices)]
        for layer in net.layers:
            p = layer.filter(0, 0, net.words, m)
            est = estimate_lipschitz(p, opts["r"], opts["R"], opts["samples"], opts["seed"], anchors=anchors)
            L0s.append(est.L0_hat)
            L1s.append(est.L1_hat)
            deltas.append(delta * m * (est.L0_hat * sup_T + est.L1_hat * sup_DT))
            Hs = [H[0, 0] for H in (layer_operators(_single(net, layer), S)[0], layer_operators(_single(net, layer), S_tilde)[0])]
            Bs.append(max(operator_norm(H) for H in Hs))
            Cs.append(LIPSCHITZ_CONSTANT[layer.nonlinearity])
        L = len(net.layers)
        x_norm = float(np.linalg.norm(X))
        total = 0.0
        for l in range(L):
            term = deltas[l]
            term *= np.prod(Cs[l:])
            term *= np.prod(Bs[l + 1:])
            term *= np.prod([Cs[r] * Bs[r] for r in range(l)])
            total += term
        bound = float(total * x_norm)
    return NetworkStabilityReport(layer_diffs, end, out_diff, bound, deltas, Bs, Cs, L0s, L1s, delta, sup_T, sup_DT)


def _single(net: NetworkSpec, layer: LayerSpec) -> NetworkSpec:
    return NetworkSpec(net.num_generators, net.words, [layer], None)


# -- checkpoints -------------------------------------------------------------


def _arr(a: np.ndarray) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel(order="C")]}


def _unarr(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["shape"])


def network_to_json(net: NetworkSpec) -> str:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "num_generators": net.num_generators,
        "words": [list(w) for w in net.words],
        "layers": [
            {
                "in_features": l.in_features,
                "out_features": l.out_features,
                "nonlinearity": l.nonlinearity,
                "pooling_mask": None if l.pooling_mask is None else [bool(v) for v in l.pooling_mask],
                "coeffs": _arr(l.coeffs),
            }
            for l in net.layers
        ],
        "readout": None if net.readout is None else {
            "kind": net.readout.kind,
            "node": net.readout.node,
            "weight": _arr(net.readout.weight),
            "bias": _arr(net.readout.bias),
        },
    }
    return json.dumps(doc)


def network_from_json(text: str) -> NetworkSpec:
    doc = json.loads(text)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a network checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    layers = [
        LayerSpec(l["in_features"], l["out_features"], _unarr(l["coeffs"]), l["nonlinearity"],
                  None if l["pooling_mask"] is None else np.array(l["pooling_mask"], dtype=bool))
        for l in doc["layers"]
    ]
    ro = doc["readout"]
    readout = None if ro is None else Readout(ro["kind"], _unarr(ro["weight"]), _unarr(ro["bias"]), ro["node"])
    return NetworkSpec(doc["num_generators"], [tuple(w) for w in doc["words"]], layers, readout)


def save_network(net: NetworkSpec, path: str | Path) -> None:
    Path(path).write_text(network_to_json(net))


def load_network(path: str | Path) -> NetworkSpec:
    return network_from_json(Path(path).read_text())
