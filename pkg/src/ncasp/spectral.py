"""Matrix-valued frequency analysis against known irreducible-representation tables.

Each block ``i`` of an :class:`IrrepTable` holds an irreducible representation of
dimension ``d_i`` appearing ``m_i`` times. The change of basis ``Q`` lists the
copies of block 0 first, then block 1, and so on, each copy occupying ``d_i``
consecutive columns, so ``Q^{-1} S_k Q`` is block diagonal.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .asm import ShiftSet
from .frechet import operator_norm
from .ncpoly import NcPolynomial, evaluate

SINGULAR_TOL = 1e-12


@dataclass
class IrrepBlock:
    name: str
    dim: int
    multiplicity: int
    frequencies: list[np.ndarray]  # one d x d matrix per generator
    projector: np.ndarray | None = None


@dataclass
class IrrepTable:
    blocks: list[IrrepBlock]
    change_of_basis: np.ndarray
    _Qinv: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.change_of_basis = np.asarray(self.change_of_basis)
        n = self.change_of_basis.shape[0]
        if sum(b.dim * b.multiplicity for b in self.blocks) != n:
            raise ValueError("sum of multiplicity * dim must equal n")
        if self.blocks and any(b.projector is None for b in self.blocks):
            Qinv = self.Qinv
            for b, cols in zip(self.blocks, self.block_columns()):
                if b.projector is None:
                    b.projector = self.change_of_basis[:, cols] @ Qinv[cols, :]

    @property
    def n(self) -> int:
        return self.change_of_basis.shape[0]

    @property
    def Qinv(self) -> np.ndarray:
        if self._Qinv is None:
            Q = self.change_of_basis
            s = np.linalg.svd(Q, compute_uv=False)
            if s[-1] <= SINGULAR_TOL * s[0]:
                raise np.linalg.LinAlgError("change of basis is singular")
            self._Qinv = np.linalg.inv(Q)
        return self._Qinv

    def block_columns(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            width = b.dim * b.multiplicity
            out.append(slice(start, start + width))
            start += width
        return out

    def is_unitary(self, tol: float = 1e-10) -> bool:
        Q = self.change_of_basis
        return bool(np.linalg.norm(Q.conj().T @ Q - np.eye(self.n)) < tol)


# -- block responses ---------------------------------------------------------


def block_response(p: NcPolynomial, block: IrrepBlock) -> np.ndarray:
    """Frequency response ``p(Lambda_1, ..., Lambda_m)`` on one irreducible block."""
    return evaluate(p, block.frequencies)


def expand_block_diagonal(values: Sequence[np.ndarray], table: IrrepTable) -> np.ndarray:
    """Block-diagonal matrix with ``m_i`` copies of ``values[i]``."""
    mats = []
    for v, b in zip(values, table.blocks):
        mats.extend([np.asarray(v)] * b.multiplicity)
    n = table.n
    out = np.zeros((n, n), dtype=np.result_type(*mats, float))
    start = 0
    for M in mats:
        d = M.shape[0]
        out[start:start + d, start:start + d] = M
        start += d
    return out


def lift(values: Sequence[np.ndarray], table: IrrepTable) -> np.ndarray:
    """``Q blockdiag(copies) Q^{-1}``: re-embed per-block values in the signal basis."""
    return table.change_of_basis @ expand_block_diagonal(values, table) @ table.Qinv


def lift_block(i: int, value: np.ndarray, table: IrrepTable) -> np.ndarray:
    """Operator acting as ``value`` on every copy of block ``i`` and zero elsewhere."""
    zeros = [np.zeros((b.dim, b.dim)) for b in table.blocks]
    zeros[i] = value
    return lift(zeros, table)


# -- fixtures ----------------------------------------------------------------


def _compose(a: tuple, b: tuple) -> tuple:
    """Permutation composition ``(a b)(x) = a(b(x))``."""
    return tuple(a[b[x]] for x in range(len(b)))


def s3_elements() -> list[tuple]:
    return sorted(itertools.permutations(range(3)))


S3_TRANSPOSITION = (1, 0, 2)
S3_THREE_CYCLE = (1, 2, 0)


def s3_irreps() -> dict[str, dict[tuple, np.ndarray]]:
    """Trivial, sign and standard (real orthogonal 2-D) representations of S3.

    The standard representation is generated by the reflection ``diag(1, -1)``
    for the transposition and the rotation by 120 degrees for the 3-cycle,
    extended to all of S3 by composing along a breadth-first walk.
    """
    c, s = np.cos(2 * np.pi / 3), np.sin(2 * np.pi / 3)
    gens = {
        S3_TRANSPOSITION: {"trivial": np.eye(1), "sign": -np.eye(1), "standard": np.diag([1.0, -1.0])},
        S3_THREE_CYCLE: {"trivial": np.eye(1), "sign": np.eye(1), "standard": np.array([[c, -s], [s, c]])},
    }
    e = (0, 1, 2)
    reps = {name: {e: np.eye(d)} for name, d in (("trivial", 1), ("sign", 1), ("standard", 2))}
    frontier = [e]
    while frontier:
        nxt = []
        for g in frontier:
            for gen, mats in gens.items():
                h = _compose(gen, g)
                if h not in reps["trivial"]:
                    for name in reps:
                        reps[name][h] = mats[name] @ reps[name][g]
                    nxt.append(h)
        frontier = nxt
    return reps


def s3_regular_fixture() -> tuple[ShiftSet, IrrepTable]:
    """Left-regular representation of S3 on C[S3] with its symmetry-adapted basis.

    Columns ``sqrt(d/|G|) sum_g phi(g)_{ab} e_g`` (row ``a``, copy ``b``) span the
    isotypic components; by Schur orthogonality they are orthonormal, and QR
    cleans up rounding so ``Q`` is orthogonal to machine precision.
    """
    G = s3_elements()
    index = {g: k for k, g in enumerate(G)}
    n = len(G)

    def left_mult(a):
        L = np.zeros((n, n))
        for g in G:
            L[index[_compose(a, g)], index[g]] = 1.0
        return L

    S = ShiftSet([left_mult(S3_TRANSPOSITION), left_mult(S3_THREE_CYCLE)])
    reps = s3_irreps()
    cols, blocks = [], []
    for name in ("trivial", "sign", "standard"):
        phi = reps[name]
        d = phi[G[0]].shape[0]
        for b in range(d):
            for a in range(d):
                v = np.zeros(n)
                for g in G:
                    v[index[g]] = phi[g][a, b]
                cols.append(np.sqrt(d / n) * v)
        blocks.append(
            IrrepBlock(name, d, d, [phi[S3_TRANSPOSITION].copy(), phi[S3_THREE_CYCLE].copy()])
        )
    Q = np.column_stack(cols)
    Qo, Rf = np.linalg.qr(Q)
    Qo = Qo * np.sign(np.diag(Rf))  # keep column orientation of the projection basis
    return S, IrrepTable(blocks, Qo)


def cyclic_shift(N: int) -> np.ndarray:
    """Circular delay: ``(C x)[j] = x[j - 1]``."""
    return np.roll(np.eye(N), 1, axis=0)


def cycle_fixture(N: int) -> tuple[ShiftSet, IrrepTable]:
    """Cyclic shift with its DFT eigenbasis; block ``k`` has frequency ``exp(2 pi i k / N)``."""
    if N < 2:
        raise ValueError("cycle fixture needs N >= 2")
    j = np.arange(N)
    omega = np.exp(2j * np.pi / N)
    Q = np.column_stack([omega ** (-k * j) for k in range(N)]) / np.sqrt(N)
    blocks = [IrrepBlock(f"freq{k}", 1, 1, [np.array([[omega**k]])]) for k in range(N)]
    return ShiftSet([cyclic_shift(N)]), IrrepTable(blocks, Q)


# -- checks ------------------------------------------------------------------


@dataclass
class DecompositionReport:
    block_residual: float
    idempotent_residual: float
    orthogonality_residual: float
    completeness_residual: float
    multiplicity_ok: bool

    def passed(self, tol: float = 1e-10) -> bool:
        return self.multiplicity_ok and max(
            self.block_residual, self.idempotent_residual, self.orthogonality_residual, self.completeness_residual
        ) < tol


def verify_decomposition(S: ShiftSet, T: IrrepTable) -> DecompositionReport:
    """Residuals of ``Q^{-1} S_k Q`` against the table and of the projector algebra."""
    if T.n != S.n:
        raise ValueError(f"table is {T.n}-dimensional, shift set is {S.n}")
    Q, Qinv = T.change_of_basis, T.Qinv
    block_res = 0.0
    for k, A in enumerate(S.matrices):
        try:
            target = expand_block_diagonal([b.frequencies[k] for b in T.blocks], T)
        except (IndexError, ValueError):
            block_res = np.inf
            continue
        block_res = max(block_res, float(np.linalg.norm(Qinv @ A @ Q - target)))
    Ps = [b.projector for b in T.blocks]
    idem = max(float(np.linalg.norm(P @ P - P)) for P in Ps)
    orth = max((float(np.linalg.norm(Ps[a] @ Ps[b])) for a in range(len(Ps)) for b in range(len(Ps)) if a != b), default=0.0)
    comp = float(np.linalg.norm(sum(Ps) - np.eye(S.n)))
    mult_ok = sum(b.dim * b.multiplicity for b in T.blocks) == S.n
    return DecompositionReport(block_res, idem, orth, comp, mult_ok)


@dataclass
class SpectralFilterReport:
    operator_residual: float
    projection_residual: float


def spectral_filter_check(
    p: NcPolynomial, S: ShiftSet, T: IrrepTable, num_signals: int = 5, seed: int = 0
) -> SpectralFilterReport:
    """Compare ``p(S)`` with its reconstruction from block responses.

    ``operator_residual`` is ``||p(S) - sum_i lift(p(Lambda_i)) P_i||_F``.
    ``projection_residual`` checks ``xhat_i(p(S) x) = p(Lambda_i) xhat_i(x)`` copy by
    copy in the ``Q`` basis, maximized over random signals.
    """
    if T.n != S.n or p.num_generators != S.count:
        raise ValueError("inconsistent table, shift set and polynomial")
    pS = evaluate(p, S)
    values = [block_response(p, b) for b in T.blocks]
    recon = sum(lift_block(i, v, T) @ b.projector for i, (v, b) in enumerate(zip(values, T.blocks)))
    op_res = float(np.linalg.norm(pS - recon))

    rng = np.random.default_rng(seed)
    Qinv = T.Qinv
    proj_res = 0.0
    for _ in range(num_signals):
        x = rng.standard_normal(S.n)
        xhat, yhat = Qinv @ x, Qinv @ (pS @ x)
        start = 0
        for v, b in zip(values, T.blocks):
            for _copy in range(b.multiplicity):
                sl = slice(start, start + b.dim)
                proj_res = max(proj_res, float(np.linalg.norm(yhat[sl] - v @ xhat[sl])))
                start += b.dim
    return SpectralFilterReport(op_res, proj_res)


def filter_norm_via_blocks(p: NcPolynomial, T: IrrepTable) -> float:
    """``max_i ||p(Lambda_i)||``; equals ``||p(S)||_2`` when ``Q`` is unitary."""
    return max(operator_norm(block_response(p, b)) for b in T.blocks)


# -- serialization -----------------------------------------------------------


def _enc(M: np.ndarray) -> dict:
    M = np.asarray(M)
    out = {"shape": list(M.shape), "real": [float(v) for v in M.real.ravel()]}
    if np.iscomplexobj(M):
        out["imag"] = [float(v) for v in M.imag.ravel()]
    return out


def _dec(d: dict) -> np.ndarray:
    M = np.array(d["real"], dtype=float).reshape(d["shape"])
    if "imag" in d:
        M = M + 1j * np.array(d["imag"], dtype=float).reshape(d["shape"])
    return M


def table_to_json(T: IrrepTable) -> str:
    doc = {
        "format": "irrep-table",
        "version": 1,
        "n": T.n,
        "blocks": [
            {
                "name": b.name,
                "dim": b.dim,
                "multiplicity": b.multiplicity,
                "frequencies": [_enc(L) for L in b.frequencies],
                "projector": _enc(b.projector),
            }
            for b in T.blocks
        ],
        "change_of_basis": _enc(T.change_of_basis),
    }
    return json.dumps(doc)


def table_from_json(text: str) -> IrrepTable:
    doc = json.loads(text)
    if doc.get("format") != "irrep-table":
        raise ValueError("not an irrep-table document")
    blocks = [
        IrrepBlock(b["name"], b["dim"], b["multiplicity"], [_dec(L) for L in b["frequencies"]], _dec(b["projector"]))
        for b in doc["blocks"]
    ]
    T = IrrepTable(blocks, _dec(doc["change_of_basis"]))
    if T.n != doc["n"]:
        raise ValueError("header n does not match change of basis")
    return T


def save_table(T: IrrepTable, path: str | Path) -> None:
    Path(path).write_text(table_to_json(T))


def load_table(path: str | Path) -> IrrepTable:
    return table_from_json(Path(path).read_text())
