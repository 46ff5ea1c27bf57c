"""Rating data, movie multigraphs and synthetic fixtures."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .asm import Multigraph

log = logging.getLogger(__name__)

NUM_ML_GENRES = 19


@dataclass
class RatingMatrix:
    """Users x movies ratings in 1..5, 0 = missing, plus per-movie genre flags."""

    ratings: np.ndarray
    genres: np.ndarray
    user_ids: list[int] = field(default_factory=list)
    movie_ids: list[int] = field(default_factory=list)
    duplicates: int = 0

    def __post_init__(self):
        self.ratings = np.asarray(self.ratings, dtype=np.int64)
        self.genres = np.asarray(self.genres, dtype=bool)
        if self.ratings.ndim != 2:
            raise ValueError("ratings must be a users x movies matrix")
        if np.any((self.ratings < 0) | (self.ratings > 5)):
            raise ValueError("ratings must lie in {0, ..., 5}")
        if self.genres.shape[0] != self.ratings.shape[1]:
            raise ValueError("need one genre bitset per movie")
        if not self.user_ids:
            self.user_ids = list(range(self.ratings.shape[0]))
        if not self.movie_ids:
            self.movie_ids = list(range(self.ratings.shape[1]))

    @property
    def num_users(self) -> int:
        return self.ratings.shape[0]

    @property
    def num_movies(self) -> int:
        return self.ratings.shape[1]

    @property
    def num_ratings(self) -> int:
        return int(np.count_nonzero(self.ratings))

    def subset_users(self, rows) -> "RatingMatrix":
        rows = np.asarray(rows, dtype=int)
        return RatingMatrix(self.ratings[rows], self.genres, [self.user_ids[r] for r in rows], list(self.movie_ids))


def load_movielens(path: str | Path) -> RatingMatrix:
    """Parse an ``ml-100k``-style directory (``u.data`` and ``u.item``).

    Duplicate (user, movie) records keep the last rating and are counted in
    ``RatingMatrix.duplicates``.
    """
    path = Path(path)
    data_file, item_file = path / "u.data", path / "u.item"
    for f in (data_file, item_file):
        if not f.exists():
            raise FileNotFoundError(f"missing MovieLens file {f}")

    records: dict[tuple[int, int], int] = {}
    duplicates = 0
    for lineno, line in enumerate(data_file.read_text(encoding="latin-1").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"{data_file}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        try:
            user, item, rating, _ = (int(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"{data_file}:{lineno}: non-integer field") from exc
        if not 1 <= rating <= 5:
            raise ValueError(f"{data_file}:{lineno}: rating {rating} outside 1..5")
        if (user, item) in records:
            duplicates += 1
        records[(user, item)] = rating
    if duplicates:
        log.warning("%d duplicate ratings in %s (last one kept)", duplicates, data_file)

    genres_by_item: dict[int, np.ndarray] = {}
    for lineno, line in enumerate(item_file.read_text(encoding="latin-1").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) < 1 + NUM_ML_GENRES:
            raise ValueError(f"{item_file}:{lineno}: expected {NUM_ML_GENRES} trailing genre flags")
        try:
            item = int(parts[0])
            flags = [int(v) for v in parts[-NUM_ML_GENRES:]]
        except ValueError as exc:
            raise ValueError(f"{item_file}:{lineno}: malformed item record") from exc
        if any(v not in (0, 1) for v in flags):
            raise ValueError(f"{item_file}:{lineno}: genre flags must be 0/1")
        genres_by_item[item] = np.array(flags, dtype=bool)

    users = sorted({u for u, _ in records})
    items = sorted({i for _, i in records} | set(genres_by_item))
    uidx = {u: k for k, u in enumerate(users)}
    iidx = {i: k for k, i in enumerate(items)}
    R = np.zeros((len(users), len(items)), dtype=np.int64)
    for (u, i), r in records.items():
        R[uidx[u], iidx[i]] = r
    G = np.array([genres_by_item.get(i, np.zeros(NUM_ML_GENRES, dtype=bool)) for i in items]).reshape(len(items), NUM_ML_GENRES)
    return RatingMatrix(R, G, users, items, duplicates)


# -- similarity layers -------------------------------------------------------


def pearson_similarity(R: np.ndarray, min_corated: int = 2) -> np.ndarray:
    """Movie-movie Pearson correlation over users who rated both.

    Pairs with fewer than ``min_corated`` co-raters or a constant rating vector
    get weight 0. The diagonal is zero.
    """
    R = np.asarray(R, dtype=float)
    B = (R > 0).astype(float)
    n = B.T @ B
    sx = R.T @ B  # sx[i, j] = sum of movie-i ratings over co-raters of (i, j)
    sxx = (R**2).T @ B
    sxy = R.T @ R
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sxy - sx * sx.T / n
        vx = sxx - sx**2 / n
        vy = vx.T
        denom = np.sqrt(vx * vy)
        rho = cov / denom
    ok = (n >= min_corated) & (vx > 1e-12) & (vy > 1e-12)
    rho = np.where(ok, rho, 0.0)
    rho = np.clip(rho, -1.0, 1.0)
    np.fill_diagonal(rho, 0.0)
    return rho


def jaccard_similarity(genres: np.ndarray) -> np.ndarray:
    G = np.asarray(genres, dtype=float)
    inter = G @ G.T
    sizes = G.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        J = np.where(union > 0, inter / union, 0.0)
    np.fill_diagonal(J, 0.0)
    return J


def knn_sparsify(W: np.ndarray, k: int) -> np.ndarray:
    """Keep each row's ``k`` strongest positive edges (ties: lower column), then symmetrize by max."""
    n = W.shape[0]
    K = np.zeros_like(W)
    for u in range(n):
        # stable sort on -weight keeps lower indices first among ties
        order = np.argsort(-W[u], kind="stable")
        keep = [v for v in order[:k] if W[u, v] > 0]
        K[u, keep] = W[u, keep]
    return np.maximum(K, K.T)


def top_rated_movies(R: RatingMatrix, count: int) -> np.ndarray:
    counts = np.count_nonzero(R.ratings, axis=0)
    rated = int(np.count_nonzero(counts))
    if count > rated:
        raise ValueError(f"asked for {count} movies but only {rated} have ratings")
    return np.argsort(-counts, kind="stable")[:count]


def build_movie_multigraph(
    R: RatingMatrix,
    top_movies: int,
    knn: int,
    negative: str = "clip",
    movies: np.ndarray | None = None,
) -> tuple[Multigraph, np.ndarray]:
    """Two-layer movie multigraph: Pearson rating similarity and Jaccard genre similarity.

    Returns the graph and the selected movie columns (most rated first, ties by
    lower index) unless ``movies`` fixes the selection. ``negative`` is
    ``clip`` (negative correlations -> 0) or ``abs``.
    """
    if movies is None:
        movies = top_rated_movies(R, top_movies)
    sub = R.ratings[:, movies]
    rho = pearson_similarity(sub)
    if negative == "clip":
        rho = np.clip(rho, 0.0, None)
    elif negative == "abs":
        rho = np.abs(rho)
    else:
        raise ValueError(f"unknown negative-correlation policy {negative!r}")
    jac = jaccard_similarity(R.genres[movies])
    layers = [knn_sparsify(rho, knn), knn_sparsify(jac, knn)]
    return Multigraph(len(movies), layers), np.asarray(movies)


# -- recommendation signals --------------------------------------------------


@dataclass
class RatingSignals:
    """One signal per user who rated the target: ratings over the selected movies
    with the target entry zeroed, and the held-out target rating as label."""

    inputs: np.ndarray  # (B, n)
    targets: np.ndarray  # (B,)
    users: np.ndarray  # row indices into the rating matrix
    target_node: int

    def __len__(self):
        return len(self.targets)

    def take(self, idx) -> "RatingSignals":
        idx = np.asarray(idx, dtype=int)
        return RatingSignals(self.inputs[idx], self.targets[idx], self.users[idx], self.target_node)


def rating_signals(R: RatingMatrix, movies: np.ndarray, target_node: int = 0) -> RatingSignals:
    sub = R.ratings[:, movies].astype(float)
    users = np.flatnonzero(sub[:, target_node] > 0)
    X = sub[users].copy()
    y = X[:, target_node].copy()
    X[:, target_node] = 0.0
    return RatingSignals(X, y, users, target_node)


def train_test_split(signals: RatingSignals, ratio: float, seed: int = 0) -> tuple[RatingSignals, RatingSignals]:
    """Deterministic shuffled split; ``ratio`` is the training fraction."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    B = len(signals)
    n_train = int(round(ratio * B))
    if n_train == 0 or n_train == B:
        raise ValueError(f"split of {B} signals at ratio {ratio} leaves one side empty")
    order = np.random.default_rng(seed).permutation(B)
    train, test = signals.take(np.sort(order[:n_train])), signals.take(np.sort(order[n_train:]))
    # the held-out rating must never leak into the inputs
    train.inputs[:, signals.target_node] = 0.0
    test.inputs[:, signals.target_node] = 0.0
    return train, test


@dataclass
class SyntheticRecommendation:
    ratings: RatingMatrix
    movies: np.ndarray
    graph: Multigraph
    signals: RatingSignals


def synth_recommendation(
    n_movies: int = 50,
    n_users: int = 200,
    noise: float = 0.3,
    seed: int = 0,
    knn: int = 10,
    density: float = 0.4,
    num_genres: int = 6,
    planted_duplicate: bool = True,
) -> SyntheticRecommendation:
    """Latent two-factor rating model run through the Pearson/Jaccard pipeline.

    Movie 0 is the target: every user rates it with probability 0.9. With
    ``planted_duplicate`` movie 1 is a copy of movie 0 (same factors, same
    raters), so at ``noise=0`` its rating equals the held-out target rating.
    Genres are assigned from quantiles of the second movie factor.
    """
    if n_movies < 3 or n_users < 3 or density <= 0:
        raise ValueError("need at least 3 movies, 3 users and positive density")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_users, 2))
    V = rng.standard_normal((n_movies, 2))
    bias = 0.5 * rng.standard_normal(n_movies)
    mask = rng.random((n_users, n_movies)) < density
    mask[:, 0] = rng.random(n_users) < 0.9
    if planted_duplicate:
        V[1], bias[1] = V[0], bias[0]
        mask[:, 1] = mask[:, 0]
    raw = 3.0 + bias + U @ V.T + noise * rng.standard_normal((n_users, n_movies))
    if planted_duplicate:
        raw[:, 1] = raw[:, 0]
    ratings = np.clip(np.rint(raw), 1, 5).astype(np.int64) * mask

    edges = np.quantile(V[:, 1], np.linspace(0, 1, num_genres + 1)[1:-1])
    primary = np.searchsorted(edges, V[:, 1])
    secondary = (primary + (V[:, 0] > 0)) % num_genres
    genres = np.zeros((n_movies, num_genres), dtype=bool)
    genres[np.arange(n_movies), primary] = True
    genres[np.arange(n_movies), secondary] = True

    R = RatingMatrix(ratings, genres)
    # the target stays column 0 regardless of rating counts
    movies = np.concatenate([[0], [j for j in top_rated_movies(R, n_movies) if j != 0]]).astype(int)
    graph, movies = build_movie_multigraph(R, n_movies, knn, movies=movies)
    return SyntheticRecommendation(R, movies, graph, rating_signals(R, movies, 0))


# -- quaternion classification -----------------------------------------------


QUATERNION_CLASS_RATES = (1, 3, 5, 7)  # phase-rotation cycles per signal length, one per class


def _quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product over the last axis (w, x, y, z)."""
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ], axis=-1)


def synth_quaternion_classification(
    num_samples: int, length: int = 32, noise: float = 0.1, seed: int = 0, rates=QUATERNION_CLASS_RATES
) -> tuple[np.ndarray, np.ndarray]:
    """Four-class quaternion signals ``u(t) = exp(mu theta_c t) q0`` plus Gaussian noise.

    Each sample draws a random unit quaternion ``q0`` and a random pure unit
    axis ``mu``; the class sets the rotation rate ``theta_c = 2 pi rates[c] / length``.
    Component energies carry no class information, only the temporal pattern does.
    Returns ``X`` of shape ``(num_samples, 4 * length)`` (components stacked
    w, x, y, z) and integer labels.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, len(rates), size=num_samples)
    q0 = rng.standard_normal((num_samples, 4))
    q0 /= np.linalg.norm(q0, axis=1, keepdims=True)
    mu = rng.standard_normal((num_samples, 3))
    mu /= np.linalg.norm(mu, axis=1, keepdims=True)
    theta = 2 * np.pi * np.asarray(rates, dtype=float)[labels] / length
    ang = theta[:, None] * np.arange(length)[None, :]  # (B, N)
    rot = np.concatenate([np.cos(ang)[..., None], np.sin(ang)[..., None] * mu[:, None, :]], axis=-1)
    u = _quat_mul(rot, np.broadcast_to(q0[:, None, :], rot.shape))  # (B, N, 4)
    X = np.moveaxis(u, -1, 1) + noise * rng.standard_normal((num_samples, 4, length))
    return X.reshape(num_samples, 4 * length), labels
