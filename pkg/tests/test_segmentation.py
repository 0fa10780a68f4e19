import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.cluster import DBSCAN

from finpersona.exceptions import (
    DataError,
    DegenerateDataError,
    DegenerateGeometryError,
    DimensionError,
    InsufficientDataError,
    InsufficientPointsError,
)
from finpersona.segmentation import (
    LedoitWolfPCA,
    WassersteinDelaunayDBSCAN,
    customer_distance,
    delaunay_triangulate,
    ledoit_wolf,
    pca_fit,
    pca_transform,
    segment_id_map,
    segment_ids,
    segment_quality,
    wasserstein_1d,
    wd_dbscan,
)


def _lw_oracle(X):
    # direct transcription of the shrinkage formula
    n, p = X.shape
    Xc = X - X.mean(0)
    S = Xc.T @ Xc / n
    mu = np.trace(S) / p
    d2 = np.linalg.norm(S - mu * np.eye(p), "fro") ** 2
    b2 = sum(np.linalg.norm(np.outer(x, x) - S, "fro") ** 2 for x in Xc) / n**2
    delta = min(b2, d2) / d2
    return (1 - delta) * S + delta * mu * np.eye(p), delta


def test_ledoit_wolf_matches_formula(rng):
    for _ in range(20):
        X = rng.normal(size=(int(rng.integers(5, 40)), int(rng.integers(2, 6)))) * rng.uniform(0.1, 10.0)
        want, delta = _lw_oracle(X)
        got = ledoit_wolf(X)
        assert got.shrinkage_delta == pytest.approx(delta, rel=1e-12, abs=1e-15)
        assert np.max(np.abs(got.matrix - want)) <= 1e-12 * max(1.0, np.abs(want).max())


def test_ledoit_wolf_matches_sklearn(rng):
    from sklearn.covariance import LedoitWolf

    X = rng.normal(size=(60, 4))
    X[:, 1] += X[:, 0]
    ref = LedoitWolf().fit(X)
    got = ledoit_wolf(X)
    assert got.shrinkage_delta == pytest.approx(ref.shrinkage_, rel=1e-10)
    assert np.allclose(got.matrix, ref.covariance_, atol=1e-12)


def test_duplicate_columns_become_positive_definite(rng):
    x = rng.normal(size=(50, 1))
    X = np.hstack([x, x])
    got = ledoit_wolf(X)
    assert np.linalg.eigvalsh(np.cov(X.T, bias=True)).min() < 1e-12
    assert np.linalg.eigvalsh(got.matrix).min() >= got.shrinkage_delta * got.target_mu * (1 - 1e-9) > 0


def test_large_iid_sample_approaches_sample_covariance(rng):
    X = rng.normal(size=(10000, 4))
    got = ledoit_wolf(X)
    assert np.abs(got.matrix - np.cov(X.T, bias=True)).max() < 0.05
    # the intensity itself only vanishes when the scaled identity is a poor target
    Y = X * np.array([1.0, 2.0, 3.0, 4.0])
    assert ledoit_wolf(Y).shrinkage_delta < 0.05


def test_full_shrinkage_is_scaled_identity(rng):
    X = rng.normal(size=(30, 3))
    got = ledoit_wolf(X, shrinkage=1.0)
    assert np.array_equal(got.matrix, got.target_mu * np.eye(3))


def test_ledoit_wolf_errors():
    with pytest.raises(InsufficientDataError):
        ledoit_wolf(np.ones((1, 3)))
    with pytest.raises(DegenerateDataError):
        ledoit_wolf(np.ones((10, 3)))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 5)), elements=st.floats(-100, 100)))
def test_shrunk_matrix_positive_definite(X):
    if np.ptp(X, axis=0).max() < 1e-3:
        return
    got = ledoit_wolf(X)
    assert np.allclose(got.matrix, got.matrix.T, atol=1e-12)
    if got.shrinkage_delta > 1e-6:
        np.linalg.cholesky(got.matrix)


def test_pca_diagonal_case():
    from finpersona.segmentation import ShrunkCovariance

    cov = ShrunkCovariance(np.diag([4.0, 1.0]), 0.0, 2.5)
    m = pca_fit(cov, np.zeros(2), 1)
    assert np.allclose(m.components, [[1.0, 0.0]])
    assert m.explained_variance[0] == pytest.approx(4.0)


def test_pca_isotropic_axis_aligned():
    from finpersona.segmentation import ShrunkCovariance

    m = pca_fit(ShrunkCovariance(2.0 * np.eye(3), 1.0, 2.0), np.zeros(3), 3)
    assert np.allclose(np.abs(m.components), np.eye(3))
    assert np.allclose(m.explained_variance, 2.0)


def test_pca_eigen_residual(rng):
    from finpersona.segmentation import ShrunkCovariance

    A = rng.normal(size=(5, 5))
    cov = A @ A.T
    m = pca_fit(ShrunkCovariance(cov, 0.0, np.trace(cov) / 5), np.zeros(5), 5)
    for lam, c in zip(m.explained_variance, m.components):
        assert np.linalg.norm(cov @ c - lam * c) < 1e-8
        assert np.abs(c).argmax() == np.argmax(c)
    assert np.allclose(m.components @ m.components.T, np.eye(5), atol=1e-10)
    assert np.all(np.diff(m.explained_variance) <= 0)


def test_pca_dimension_errors(rng):
    cov = ledoit_wolf(rng.normal(size=(20, 3)))
    with pytest.raises(DimensionError):
        pca_fit(cov, np.zeros(3), 4)
    m = pca_fit(cov, np.zeros(3), 2)
    with pytest.raises(DimensionError):
        pca_transform(m, np.zeros((2, 4)))


def test_pca_transform_centering_and_round_trip(rng):
    X = rng.normal(size=(40, 3))
    cov = ledoit_wolf(X)
    m = pca_fit(cov, X.mean(0), 3)
    assert np.allclose(pca_transform(m, np.tile(X.mean(0), (4, 1))), 0.0)
    Z = pca_transform(m, X)
    assert np.abs(Z @ m.components + m.mean - X).max() < 1e-9


def test_lw_pca_estimator(rng):
    X = rng.normal(size=(100, 4))
    est = LedoitWolfPCA(n_components=2).fit(X)
    assert est.transform(X).shape == (100, 2)
    assert est.get_params()["n_components"] == 2


def test_w1_examples(rng):
    a = rng.normal(size=6)
    assert wasserstein_1d(a, a) == 0.0
    assert wasserstein_1d(np.zeros(6), np.ones(6)) == 1.0
    with pytest.raises(DataError):
        wasserstein_1d(np.zeros(5), np.zeros(6))


def _assignment_w1(a, b):
    return min(np.mean(np.abs(a - b[list(p)])) for p in itertools.permutations(range(len(b))))


def test_w1_equals_brute_force_assignment(rng):
    # integer samples keep every partial sum exact, so equality is bitwise
    for _ in range(25):
        a, b = rng.integers(-50, 50, size=6).astype(float), rng.integers(-50, 50, size=6).astype(float)
        assert wasserstein_1d(a, b) == _assignment_w1(a, b)
    for _ in range(25):
        a, b = rng.normal(size=6), rng.normal(size=6)
        assert wasserstein_1d(a, b) == pytest.approx(_assignment_w1(a, b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=18, max_size=18))
def test_w1_metric_axioms(v):
    a, b, c = np.array(v[:6]), np.array(v[6:12]), np.array(v[12:])
    assert wasserstein_1d(a, b) == wasserstein_1d(b, a)
    assert wasserstein_1d(a, c) <= wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-9


def _temporal(rng, n, features, k=6):
    rows = []
    for cid in range(n):
        for t in range(1, k + 1):
            rows.append({"customer_id": cid, "month_index": t, **{f: float(rng.gamma(2.0, 3.0)) for f in features}})
    return pd.DataFrame(rows)


def test_customer_distance_oracles(rng):
    from finpersona.segmentation import standardize_features

    feats = ["logins", "sessions", "card_spend"]
    temporal = _temporal(rng, 5, feats)
    assert customer_distance(1, 1, temporal, feats) == 0.0
    ids, cube = standardize_features(temporal, feats)
    manual = np.mean([wasserstein_1d(cube[1, f], cube[3, f]) for f in range(3)])
    assert customer_distance(1, 3, temporal, feats) == pytest.approx(manual, abs=1e-12)
    single = standardize_features(temporal, feats[:1])[1]
    assert customer_distance(0, 2, temporal, feats[:1]) == pytest.approx(
        wasserstein_1d(single[0, 0], single[2, 0]), abs=1e-12
    )


def test_customer_distance_pseudometric(rng):
    from finpersona.segmentation import standardize_features

    feats = ["logins", "sessions"]
    temporal = _temporal(rng, 30, feats)
    _, cube = standardize_features(temporal, feats)
    D = np.array([[np.mean([wasserstein_1d(cube[i, f], cube[j, f]) for f in range(2)]) for j in range(30)] for i in range(30)])
    assert np.array_equal(D, D.T)
    for i, j, k in rng.integers(0, 30, size=(1000, 3)):
        assert D[i, k] <= D[i, j] + D[j, k] + 1e-12


def test_customer_distance_missing_month(rng):
    temporal = _temporal(rng, 3, ["logins"])
    with pytest.raises(DataError):
        customer_distance(0, 1, temporal.iloc[1:], ["logins"])


def _in_circle(P, tri, q):
    a, b, c = (P[i] - q for i in tri)
    m = np.array([[a[0], a[1], a @ a], [b[0], b[1], b @ b], [c[0], c[1], c @ c]])
    u, v = P[tri[1]] - P[tri[0]], P[tri[2]] - P[tri[0]]
    orient = u[0] * v[1] - u[1] * v[0]
    return np.linalg.det(m) * np.sign(orient)


def _check_empty_circumcircles(points, g):
    scale = max(1.0, np.abs(points).max()) ** 4
    for tri in g.triangles:
        for q in range(len(points)):
            if q in tri:
                continue
            assert _in_circle(points, tri, points[q]) <= 1e-9 * scale


def _edges_from_triangles(tris):
    return sorted({tuple(sorted((int(t[i]), int(t[(i + 1) % 3])))) for t in tris for i in range(3)})


def test_delaunay_minimal():
    g = delaunay_triangulate(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert len(g.triangles) == 1 and len(g.edges) == 3


def test_delaunay_square():
    g = delaunay_triangulate(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    assert len(g.triangles) == 2 and len(g.edges) == 5
    assert [0, 2] in g.edges.tolist()


def test_delaunay_errors():
    with pytest.raises(InsufficientPointsError):
        delaunay_triangulate(np.zeros((2, 2)))
    with pytest.raises(DegenerateGeometryError):
        delaunay_triangulate(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))


def test_delaunay_empty_circumcircle_100_sets(rng):
    for _ in range(100):
        P = rng.uniform(-1, 1, size=(int(rng.integers(3, 51)), 2))
        g = delaunay_triangulate(P)
        _check_empty_circumcircles(P, g)
        assert g.edges.tolist() == [list(e) for e in _edges_from_triangles(g.triangles)]


def test_delaunay_matches_scipy_on_general_position(rng):
    from scipy.spatial import Delaunay

    P = rng.uniform(size=(60, 2))
    ours = _edges_from_triangles(delaunay_triangulate(P).triangles)
    ref = _edges_from_triangles(Delaunay(P).simplices)
    assert ours == ref


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 200), st.integers(0, 10**6))
def test_delaunay_property(n, seed):
    P = np.random.default_rng(seed).normal(size=(n, 2))
    _check_empty_circumcircles(P, delaunay_triangulate(P))


def test_delaunay_merges_duplicates():
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    g = delaunay_triangulate(P)
    assert len(g.triangles) == 1


def _blobs(rng, n=20):
    a = rng.normal(0.0, 0.3, size=(n, 2))
    b = rng.normal(10.0, 0.3, size=(n, 2))
    return np.vstack([a, b])


def test_wd_dbscan_two_blobs_matches_plain_dbscan(rng):
    P = _blobs(rng)
    g = delaunay_triangulate(P)
    dist = lambda i, j: float(np.linalg.norm(P[i] - P[j]))
    got = wd_dbscan(g, dist, eps=2.0, min_pts=3)
    assert got.n_clusters == 2 and (got.labels >= 0).all()
    # plain DBSCAN on the full matrix with non-edges pushed out of range
    D = np.full((len(P), len(P)), 1e9)
    np.fill_diagonal(D, 0.0)
    for i, j in g.edges:
        D[i, j] = D[j, i] = dist(i, j)
    ref = DBSCAN(eps=2.0, min_samples=3, metric="precomputed").fit(D).labels_
    assert np.array_equal(got.labels, ref)


def test_wd_dbscan_limits(rng):
    P = _blobs(rng)
    g = delaunay_triangulate(P)
    w = np.linalg.norm(P[g.edges[:, 0]] - P[g.edges[:, 1]], axis=1)
    assert (wd_dbscan(g, w, eps=1e-12, min_pts=2).labels == -1).all()
    assert (wd_dbscan(g, w, eps=1e-12, min_pts=1).labels >= 0).all()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 100.0))
def test_wd_dbscan_scale_invariance(seed, scale):
    P = _blobs(np.random.default_rng(seed), 12)
    g = delaunay_triangulate(P)
    w = np.linalg.norm(P[g.edges[:, 0]] - P[g.edges[:, 1]], axis=1)
    a = wd_dbscan(g, w, 1.5, 3).labels
    b = wd_dbscan(g, w * scale, 1.5 * scale, 3).labels
    assert np.array_equal(a, b)


def test_segment_quality_examples(rng):
    truth = rng.integers(0, 5, size=10000)
    assert segment_quality(truth, truth)["ari"] == 1.0
    assert abs(segment_quality(rng.integers(0, 5, size=10000), truth)["ari"]) < 0.02
    assert segment_quality(np.full(10, -1), np.zeros(10))["ari"] is None


def test_segment_quality_pair_counting_oracle(rng):
    from math import comb

    truth = rng.integers(0, 5, size=2000)
    labels = truth.copy()
    flip = rng.random(2000) < 0.1
    labels[flip] = rng.integers(0, 5, size=flip.sum())
    table = np.zeros((5, 5), dtype=np.int64)
    np.add.at(table, (labels, truth), 1)
    index = sum(comb(int(v), 2) for v in table.ravel())
    a = sum(comb(int(v), 2) for v in table.sum(1))
    b = sum(comb(int(v), 2) for v in table.sum(0))
    expected = a * b / comb(2000, 2)
    ari = (index - expected) / (0.5 * (a + b) - expected)
    assert segment_quality(labels, truth)["ari"] == pytest.approx(ari, abs=1e-12)


def test_segment_ids_by_size():
    labels = np.array([2, 2, 2, 0, 0, 1, -1, 3, 3, 3, 3, 4, 5])
    mapping = segment_id_map(labels)
    ids = segment_ids(labels, mapping=mapping)
    assert ids[7] == 0 and ids[0] == 1
    assert set(ids.tolist()) <= set(range(5))


def test_estimator_recovers_segments(small_data):
    from finpersona.segmentation import SEGMENT_DISTANCE_FEATURES, standardize_features, static_matrix

    _, static, months = small_data
    X = static_matrix(static)
    _, cube = standardize_features(months, SEGMENT_DISTANCE_FEATURES)
    est = WassersteinDelaunayDBSCAN().fit(X, cube)
    q = segment_quality(est.labels_, static.sort_values("customer_id")["true_segment"].to_numpy())
    assert q["ari"] > 0.5
    assert np.array_equal(est.predict(X[:10], cube[:10]) >= 0, np.ones(10, dtype=bool))
