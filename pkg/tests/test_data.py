import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncasp.data import (
    NUM_ML_GENRES,
    RatingMatrix,
    build_movie_multigraph,
    jaccard_similarity,
    knn_sparsify,
    load_movielens,
    pearson_similarity,
    rating_signals,
    synth_quaternion_classification,
    synth_recommendation,
    top_rated_movies,
    train_test_split,
)


def write_ml(tmp_path, records, items):
    (tmp_path / "u.data").write_text("".join(f"{u}\t{i}\t{r}\t881250949\n" for u, i, r in records))
    lines = []
    for i, flags in items:
        lines.append("|".join([str(i), f"Movie {i}", "01-Jan-1995", "", "http://x"] + [str(f) for f in flags]))
    (tmp_path / "u.item").write_text("\n".join(lines) + "\n")
    return tmp_path


def flags(*on):
    return [1 if g in on else 0 for g in range(NUM_ML_GENRES)]


def test_load_movielens(tmp_path):
    recs = [(1, 10, 4), (2, 10, 3), (1, 20, 5), (2, 10, 1), (3, 30, 2)]
    d = write_ml(tmp_path, recs, [(10, flags(0, 3)), (20, flags(3)), (30, flags()), (40, flags(1))])
    R = load_movielens(d)
    assert R.user_ids == [1, 2, 3] and R.movie_ids == [10, 20, 30, 40]
    assert R.duplicates == 1
    assert R.ratings[1, 0] == 1  # last duplicate wins
    assert R.num_ratings == 4
    assert R.genres[0, 0] and R.genres[0, 3] and not R.genres[2].any()


def test_load_movielens_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_movielens(tmp_path)
    d = write_ml(tmp_path, [(1, 10, 4)], [(10, flags())])
    (d / "u.data").write_text("1\t10\t4\t0\n\n1\t11\t9\t0\n")
    with pytest.raises(ValueError, match=r"u\.data:3"):
        load_movielens(d)
    (d / "u.data").write_text("1\t10\t4\n")
    with pytest.raises(ValueError, match=r"u\.data:1"):
        load_movielens(d)
    (d / "u.data").write_text("1\t10\t4\t0\n")
    (d / "u.item").write_text("10|x|" + "|".join(["2"] * NUM_ML_GENRES) + "\n")
    with pytest.raises(ValueError, match=r"u\.item:1"):
        load_movielens(d)


def test_rating_matrix_validation():
    with pytest.raises(ValueError):
        RatingMatrix(np.array([[6]]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        RatingMatrix(np.array([[1, 2]]), np.zeros((1, 2)))


def pearson_oracle(R, i, j):
    both = (R[:, i] > 0) & (R[:, j] > 0)
    if both.sum() < 2:
        return 0.0
    a, b = R[both, i].astype(float), R[both, j].astype(float)
    if a.std() < 1e-9 or b.std() < 1e-9:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


@given(st.integers(0, 10_000))
def test_pearson_matches_corrcoef(seed):
    rng = np.random.default_rng(seed)
    R = rng.integers(1, 6, size=(12, 5)) * (rng.random((12, 5)) < 0.6)
    rho = pearson_similarity(R)
    for i in range(5):
        for j in range(5):
            want = 0.0 if i == j else pearson_oracle(R, i, j)
            assert rho[i, j] == pytest.approx(want, abs=1e-9)


def test_pearson_single_corater_is_zero():
    R = np.array([[5, 4, 0], [1, 0, 2], [0, 3, 3]])
    assert not pearson_similarity(R).any()


def test_jaccard():
    G = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 0]], dtype=bool)
    J = jaccard_similarity(G)
    assert J[0, 1] == pytest.approx(1 / 3) and J[0, 2] == 0 and J[2, 2] == 0


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_knn_sparsify_properties(seed, k):
    rng = np.random.default_rng(seed)
    W = rng.random((10, 10)) - 0.2
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0)
    K = knn_sparsify(W, k)
    assert np.array_equal(K, K.T)
    assert not np.diag(K).any()
    top = [set(v for v in np.argsort(-W[u], kind="stable")[:k] if W[u, v] > 0) for u in range(10)]
    for u in range(10):
        assert all(K[u, v] == W[u, v] for v in top[u])
        assert all(v in top[u] or u in top[v] for v in np.flatnonzero(K[u]))
    assert (K >= 0).all()
    assert np.all((K == 0) | (K == W))


def test_top_rated_and_multigraph():
    syn = synth_recommendation(n_movies=12, n_users=60, seed=3, knn=3)
    assert syn.movies[0] == 0
    assert len(syn.graph.edge_layers) == 2 and syn.graph.num_nodes == 12
    for A in syn.graph.edge_layers:
        assert np.array_equal(A, A.T) and (A >= 0).all()
    with pytest.raises(ValueError):
        top_rated_movies(syn.ratings, 1000)
    with pytest.raises(ValueError):
        build_movie_multigraph(syn.ratings, 5, 2, negative="square")


def test_planted_duplicate_copies_target():
    syn = synth_recommendation(n_movies=10, n_users=50, noise=0.0, seed=1)
    sig = syn.signals
    col1 = list(syn.movies).index(1)
    assert np.array_equal(sig.inputs[:, col1], sig.targets)
    assert not sig.inputs[:, 0].any()


def test_rating_signals_and_split():
    syn = synth_recommendation(n_movies=10, n_users=50, seed=2)
    sig = rating_signals(syn.ratings, syn.movies, 0)
    tr, te = train_test_split(sig, 0.9, seed=4)
    assert len(tr) + len(te) == len(sig) and len(tr) == round(0.9 * len(sig))
    assert not set(tr.users) & set(te.users)
    a, _ = train_test_split(sig, 0.9, seed=4)
    assert np.array_equal(a.users, tr.users)
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            train_test_split(sig, bad)


def test_synthetic_quaternion_shapes():
    X, y = synth_quaternion_classification(40, length=16, noise=0.0, seed=0)
    assert X.shape == (40, 64) and set(np.unique(y)) <= {0, 1, 2, 3}
    # noiseless signals are unit quaternions at every time step
    q = X.reshape(40, 4, 16)
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0)
    X2, y2 = synth_quaternion_classification(40, length=16, noise=0.0, seed=0)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
