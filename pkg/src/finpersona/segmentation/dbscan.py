"""DBSCAN over a Delaunay graph with Wasserstein edge distances."""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import as_float_matrix
from ..exceptions import DataError, DegenerateGeometryError
from .covariance import LedoitWolfPCA
from .delaunay import DelaunayGraph, delaunay_triangulate
from .wasserstein import sorted_cube_distance


@dataclass
class SegmentAssignment:
    labels: np.ndarray
    n_clusters: int


def wd_dbscan(graph, dist, eps, min_pts):
    """Classic DBSCAN where candidate neighbors are graph-adjacent points.

    Parameters
    ----------
    graph : DelaunayGraph
    dist : callable or ndarray
        ``dist(i, j)`` or precomputed distances aligned with ``graph.edges``.
    eps : float
    min_pts : int
        Minimum neighborhood size, counting the point itself.

    Returns
    -------
    SegmentAssignment
        Cluster ids in order of discovery when scanning points by index;
        ``-1`` marks noise.
    """
    if eps <= 0:
        raise DataError("eps must be > 0")
    if min_pts < 1:
        raise DataError("min_pts must be >= 1")
    n = len(graph.points)
    if n == 0:
        return SegmentAssignment(labels=np.empty(0, dtype=np.int64), n_clusters=0)
    edges = np.asarray(graph.edges, dtype=np.int64).reshape(-1, 2)
    if callable(dist):
        w = np.array([dist(int(i), int(j)) for i, j in edges], dtype=np.float64)
    else:
        w = np.asarray(dist, dtype=np.float64)
        if w.shape != (len(edges),):
            raise DataError("edge distances must align with graph.edges")
    keep = edges[w <= eps]
    nbrs = [[] for _ in range(n)]
    for i, j in keep.tolist():
        nbrs[i].append(j)
        nbrs[j].append(i)
    for lst in nbrs:
        lst.sort()
    core = np.array([len(lst) + 1 >= min_pts for lst in nbrs])

    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for p in range(n):
        if labels[p] != -1 or not core[p]:
            continue
        labels[p] = cluster
        queue = deque([p])
        while queue:
            q = queue.popleft()
            if not core[q]:
                continue
            for r in nbrs[q]:
                if labels[r] == -1:
                    labels[r] = cluster
                    queue.append(r)
        cluster += 1
    return SegmentAssignment(labels=labels, n_clusters=cluster)


def knn_graph(points, k=8):
    """Symmetric k-nearest-neighbor graph, used when the projection has d >= 3."""
    pts = np.asarray(points, dtype=np.float64)
    k = min(k, len(pts) - 1)
    _, idx = cKDTree(pts).query(pts, k=k + 1)
    src = np.repeat(np.arange(len(pts)), k)
    e = np.stack([src, idx[:, 1:].ravel()], axis=1)
    e.sort(axis=1)
    e = np.unique(e, axis=0)
    return DelaunayGraph(points=pts, edges=e, triangles=np.empty((0, 3), dtype=np.int64))


class WassersteinDelaunayDBSCAN(ClusterMixin, BaseEstimator):
    """Segment customers: Ledoit-Wolf PCA geometry, Wasserstein neighborhoods.

    The graph is the Delaunay triangulation of the ``n_components``-D
    projection of the static features (k-NN graph when ``n_components >= 3``).
    Edge weights are customer distances over the monthly feature samples.

    Parameters
    ----------
    n_components : int, default=2
    eps : float or None
        Neighborhood radius; ``None`` uses ``eps_percentile`` of the edge
        distances.
    eps_percentile : float, default=90
    min_pts : int, default=5
    jitter : float, default=1e-9
        Scale of the one-off perturbation applied to collinear projections.
    random_state : int, default=0
    """

    def __init__(
        self,
        n_components=2,
        eps=None,
        eps_percentile=90.0,
        min_pts=5,
        knn=8,
        jitter=1e-9,
        random_state=0,
    ):
        self.n_components = n_components
        self.eps = eps
        self.eps_percentile = eps_percentile
        self.min_pts = min_pts
        self.knn = knn
        self.jitter = jitter
        self.random_state = random_state

    def _graph(self, Z):
        if self.n_components >= 3:
            return knn_graph(Z, self.knn)
        try:
            return delaunay_triangulate(Z)
        except DegenerateGeometryError:
            rng = np.random.default_rng(self.random_state)
            scale = max(float(np.abs(Z).max()), 1.0)
            return delaunay_triangulate(Z + self.jitter * scale * rng.standard_normal(Z.shape))

    def fit(self, X, cube):
        """Fit on static features ``X`` (n, p) and sorted monthly cube (n, F, K)."""
        X = as_float_matrix(X, "X")
        cube = np.asarray(cube, dtype=np.float64)
        if cube.ndim != 3 or cube.shape[0] != X.shape[0]:
            raise DataError("cube must have shape (n_samples, n_features, k_months)")
        self.pca_ = LedoitWolfPCA(n_components=self.n_components).fit(X)
        Z = self.pca_.transform(X)
        self.embedding_ = Z
        self.graph_ = self._graph(Z)
        e = self.graph_.edges
        self.edge_distances_ = sorted_cube_distance(cube, e[:, 0], e[:, 1])
        if self.eps is None:
            self.eps_ = float(np.percentile(self.edge_distances_, self.eps_percentile))
        else:
            self.eps_ = float(self.eps)
        assignment = wd_dbscan(self.graph_, self.edge_distances_, self.eps_, self.min_pts)
        self.labels_ = assignment.labels
        self.n_clusters_ = assignment.n_clusters
        keep = self.edge_distances_ <= self.eps_
        deg = np.bincount(e[keep].ravel(), minlength=len(X)) + 1
        self.core_sample_indices_ = np.flatnonzero((deg >= self.min_pts) & (self.labels_ >= 0))
        self.core_cube_ = np.sort(cube[self.core_sample_indices_], axis=2)
        return self

    def predict(self, X, cube):
        """Label of the nearest core sample under the customer distance."""
        check_is_fitted(self, "labels_")
        cube = np.sort(np.asarray(cube, dtype=np.float64), axis=2)
        if len(self.core_sample_indices_) == 0:
            return np.full(len(cube), -1, dtype=np.int64)
        core_labels = self.labels_[self.core_sample_indices_]
        out = np.empty(len(cube), dtype=np.int64)
        for start in range(0, len(cube), 256):
            block = cube[start : start + 256]
            d = np.abs(block[:, None] - self.core_cube_[None]).mean(axis=(2, 3))
            out[start : start + 256] = core_labels[np.argmin(d, axis=1)]
        return out

    def fit_predict(self, X, cube):
        return self.fit(X, cube).labels_
