"""Algebraic signal models realized by tuples of shift matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ncpoly import NcPolynomial, Word, evaluate

RELATION_TOL = 1e-9


class ShiftSet:
    """Ordered tuple of ``m`` square ``n x n`` shift operators (read-only)."""

    __slots__ = ("_mats",)

    def __init__(self, matrices: Sequence[np.ndarray]):
        mats = []
        for A in matrices:
            A = np.array(A, copy=True)
            if not np.issubdtype(A.dtype, np.complexfloating):
                A = A.astype(float)
            A.setflags(write=False)
            mats.append(A)
        if not mats:
            raise ValueError("a shift set needs at least one operator")
        n = mats[0].shape[0]
        for k, A in enumerate(mats):
            if A.ndim != 2 or A.shape != (n, n):
                raise ValueError(f"operator {k} has shape {A.shape}, expected ({n}, {n})")
        self._mats = tuple(mats)

    @property
    def matrices(self) -> tuple[np.ndarray, ...]:
        return self._mats

    @property
    def n(self) -> int:
        return self._mats[0].shape[0]

    @property
    def count(self) -> int:
        return len(self._mats)

    def __len__(self):
        return len(self._mats)

    def __getitem__(self, i):
        return self._mats[i]

    def __iter__(self):
        return iter(self._mats)

    def conjugate_by(self, P: np.ndarray) -> "ShiftSet":
        """Relabel nodes: ``S_i -> P S_i P^T`` for a permutation matrix ``P``."""
        return ShiftSet([P @ A @ P.T for A in self._mats])

    def __repr__(self):
        return f"ShiftSet(m={self.count}, n={self.n})"


@dataclass
class Multigraph:
    """Node set of size ``num_nodes`` with one weighted adjacency per edge class."""

    num_nodes: int
    edge_layers: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        layers = []
        for r, A in enumerate(self.edge_layers):
            A = np.asarray(A, dtype=float)
            if A.shape != (self.num_nodes, self.num_nodes):
                raise ValueError(f"layer {r} has shape {A.shape}, expected {self.num_nodes}x{self.num_nodes}")
            if not np.all(np.isfinite(A)):
                raise ValueError(f"layer {r} has non-finite weights")
            if np.any(np.diag(A) != 0):
                raise ValueError(f"layer {r} has self-loops")
            layers.append(A)
        self.edge_layers = layers

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Sequence[Sequence[tuple]], symmetric: bool = True) -> "Multigraph":
        """Build from per-layer ``(u, v, w)`` lists; ``symmetric`` mirrors each edge."""
        layers = []
        for layer in edges:
            A = np.zeros((num_nodes, num_nodes))
            for u, v, w in layer:
                A[u, v] = w
                if symmetric:
                    A[v, u] = w
            layers.append(A)
        return cls(num_nodes, layers)

    @property
    def num_layers(self) -> int:
        return len(self.edge_layers)


def apply_filter(p: NcPolynomial, S: ShiftSet, x: np.ndarray) -> np.ndarray:
    """``y = p(S) x`` by iterated shifts, never forming ``p(S)``.

    ``x`` may be a vector or an ``n x F`` block of signals. Suffix products
    ``S_{w_j} ... S_{w_k} x`` are cached so shared word tails are applied once.
    """
    mats = S.matrices if isinstance(S, ShiftSet) else ShiftSet(S).matrices
    if len(mats) != p.num_generators:
        raise ValueError(f"polynomial has {p.num_generators} generators, shift set has {len(mats)}")
    x = np.asarray(x)
    n = mats[0].shape[0]
    if x.shape[0] != n:
        raise ValueError(f"signal length {x.shape[0]} does not match operator size {n}")
    dtype = np.result_type(x, *mats, *(np.asarray(c) for c in p.terms.values()), float)
    cache: dict[Word, np.ndarray] = {(): x.astype(dtype, copy=False)}

    def shifted(w: Word) -> np.ndarray:
        if w not in cache:
            cache[w] = mats[w[0]] @ shifted(w[1:])
        return cache[w]

    y = np.zeros(x.shape, dtype=dtype)
    for w, c in p.items():
        y += c * shifted(w)
    return y


def shift_from_multigraph(G: Multigraph, normalization: str = "spectral") -> ShiftSet:
    """One shift operator per edge layer.

    ``spectral`` divides by the operator 2-norm, ``degree`` by the max row sum,
    ``none`` keeps raw weights.
    """
    mats = []
    for r, A in enumerate(G.edge_layers):
        if normalization == "none":
            mats.append(A.copy())
        elif normalization == "spectral":
            s = np.linalg.norm(A, 2)
            if s == 0:
                raise ValueError(f"edge layer {r} is empty; cannot normalize by a zero norm")
            mats.append(A / s)
        elif normalization == "degree":
            d = np.abs(A).sum(axis=1).max()
            if d == 0:
                raise ValueError(f"edge layer {r} is empty; cannot normalize by a zero degree")
            mats.append(A / d)
        else:
            raise ValueError(f"unknown normalization {normalization!r}")
    return ShiftSet(mats)


@dataclass
class RelationReport:
    residuals: list[float]
    tol: float = RELATION_TOL

    @property
    def satisfied(self) -> list[bool]:
        return [r <= self.tol for r in self.residuals]

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)


def validate_model(S: ShiftSet, relations: Sequence[NcPolynomial]) -> RelationReport:
    """Frobenius residual of each relation evaluated at ``S``."""
    return RelationReport([float(np.linalg.norm(evaluate(r, S), "fro")) for r in relations])


# -- multigraph file format --------------------------------------------------
#
# header ``n m``; then one ``layer u v weight`` line per stored (directed) entry.


def save_multigraph(G: Multigraph, path: str | Path) -> None:
    lines = [f"{G.num_nodes} {G.num_layers}"]
    for r, A in enumerate(G.edge_layers):
        for u, v in zip(*np.nonzero(A)):
            lines.append(f"{r} {u} {v} {float(A[u, v])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_multigraph(path: str | Path) -> Multigraph:
    lines = [(k, ln) for k, ln in enumerate(Path(path).read_text().splitlines(), 1)
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty multigraph file")
    try:
        n, m = (int(t) for t in lines[0][1].split())
    except ValueError as exc:
        raise ValueError(f"{path}:{lines[0][0]}: header must be 'n m'") from exc
    layers = [np.zeros((n, n)) for _ in range(m)]
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'layer u v weight'")
        try:
            r, u, v = (int(t) for t in parts[:3])
            w = float(parts[3])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: cannot parse {line!r}") from exc
        if not 0 <= r < m:
            raise ValueError(f"{path}:{lineno}: layer {r} out of range [0, {m})")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"{path}:{lineno}: node out of range [0, {n})")
        layers[r][u, v] = w
    return Multigraph(n, layers)
