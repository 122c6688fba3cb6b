import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psdes.dataio import Dataset
from psdes.regions import (
    compute_roc,
    nearest,
    nearest_batch,
    output_profile,
    profile_neighbors,
    query_outputs,
)


def _dsel(points, labels=None):
    points = np.asarray(points, dtype=float)
    labels = labels if labels is not None else np.arange(len(points)) % 2
    return Dataset(points, labels, ("a", "b"))


def test_roc_hand_checked():
    roc = compute_roc(np.array([0.9, 0.0]), _dsel([[0, 0], [1, 0], [3, 0]]), 2)
    assert roc.indices.tolist() == [1, 0]
    assert np.allclose(roc.distances, [0.1, 0.9])


def test_roc_identity_and_full_size():
    dsel = _dsel([[0, 0], [1, 1], [2, 5], [-1, 3]])
    roc = compute_roc(np.array([2.0, 5.0]), dsel, 1)
    assert roc.indices.tolist() == [2] and roc.distances[0] == 0
    full = compute_roc(np.zeros(2), dsel, 4)
    assert sorted(full.indices.tolist()) == [0, 1, 2, 3]
    assert np.all(np.diff(full.distances) >= 0)
    with pytest.raises(ValueError):
        compute_roc(np.zeros(2), dsel, 5)


def test_distance_ties_go_to_lower_index():
    dsel = _dsel([[1, 0], [-1, 0], [0, 1], [0, -1]])
    assert compute_roc(np.zeros(2), dsel, 3).indices.tolist() == [0, 1, 2]


def test_exclusion_skips_row():
    dsel = _dsel([[0, 0], [1, 0], [3, 0]])
    roc = compute_roc(np.zeros(2), dsel, 2, exclude=0)
    assert roc.indices.tolist() == [1, 2]


def brute_force_knn(q, R, k):
    pairs = sorted((float(np.sqrt(np.sum((R[i] - q) ** 2))), i) for i in range(len(R)))
    return [i for _, i in pairs[:k]], [d for d, _ in pairs[:k]]


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40), d=st.integers(1, 5), data=st.data())
def test_knn_matches_brute_force(seed, n, d, data):
    k = data.draw(st.integers(1, n))
    rng = np.random.default_rng(seed)
    # coarse grid values produce plenty of exact distance ties
    R = rng.integers(-3, 4, size=(n, d)).astype(float)
    q = rng.integers(-3, 4, size=d).astype(float)
    idx, dist = nearest(q, R, k)
    ref_idx, ref_dist = brute_force_knn(q, R, k)
    assert idx.tolist() == ref_idx
    assert np.allclose(dist, ref_dist, rtol=0, atol=1e-12)
    assert len(set(idx.tolist())) == k


def test_knn_brute_force_200_queries():
    rng = np.random.default_rng(0)
    R = rng.normal(size=(150, 4))
    Q = rng.normal(size=(200, 4))
    idx, dist = nearest_batch(Q, R, 7)
    for qi in range(200):
        ref_idx, ref_dist = brute_force_knn(Q[qi], R, 7)
        assert idx[qi].tolist() == ref_idx
        assert np.allclose(dist[qi], ref_dist, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_neighbor_set_invariant_to_row_permutation(seed):
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(25, 3))
    q = rng.normal(size=3)
    perm = rng.permutation(25)
    a, _ = nearest(q, R, 6)
    b, _ = nearest(q, R[perm], 6)
    pts_a = sorted(map(tuple, R[a]))
    pts_b = sorted(map(tuple, R[perm][b]))
    assert pts_a == pts_b


def test_profile_blocks(prepared3):
    _, dsel, test, pool, _ = prepared3
    x = test.features[0]
    prof = output_profile(pool, x)
    L = pool.n_classes
    assert prof.shape == (pool.size * L,)
    for i, clf in enumerate(pool.classifiers):
        assert np.array_equal(prof[i * L:(i + 1) * L], clf.predict_proba(x))
    q = query_outputs(pool, x)
    assert np.array_equal(q.votes, [c.predict(x) for c in pool.classifiers])


def test_profile_neighbors_identity(prepared3):
    _, dsel, _, pool, _ = prepared3
    nb = profile_neighbors(pool.dsel_profiles[4], pool, 3)
    assert nb.distances[0] == 0
    # rows with identical profiles tie at distance 0; the lowest index comes first
    twins = np.flatnonzero(np.all(pool.dsel_profiles == pool.dsel_profiles[4], axis=1))
    assert nb.indices[0] == twins.min()
    with pytest.raises(ValueError):
        profile_neighbors(pool.dsel_profiles[0], pool, dsel.n_samples + 1)


def test_profile_neighbors_hand_ordering():
    from dataclasses import replace

    from psdes.baseclf import PerceptronModel
    from psdes.pool import Pool, Provenance

    clf = PerceptronModel(np.zeros((1, 1)), np.zeros(1), 2)
    pool = Pool((clf,), (Provenance(0, clf.kind),), 2)
    # distances from the origin: 2, 1, 5
    pool = replace(pool, dsel_profiles=np.array([[2.0, 0.0], [0.0, 1.0], [3.0, 4.0]]))
    nb = profile_neighbors(np.zeros(2), pool, 2)
    assert nb.indices.tolist() == [1, 0]
    assert np.allclose(nb.distances, [1.0, 2.0])
