from .covariance import LedoitWolfPCA, PcaModel, ShrunkCovariance, ledoit_wolf, pca_fit, pca_transform
from .dbscan import SegmentAssignment, WassersteinDelaunayDBSCAN, knn_graph, wd_dbscan
from .delaunay import DelaunayGraph, delaunay_triangulate
from .features import SEGMENT_DISTANCE_FEATURES, segment_id_map, segment_ids, static_matrix
from .quality import segment_quality
from .wasserstein import customer_distance, standardize_features, wasserstein_1d

__all__ = [
    "LedoitWolfPCA",
    "PcaModel",
    "ShrunkCovariance",
    "ledoit_wolf",
    "pca_fit",
    "pca_transform",
    "SegmentAssignment",
    "WassersteinDelaunayDBSCAN",
    "knn_graph",
    "wd_dbscan",
    "DelaunayGraph",
    "delaunay_triangulate",
    "SEGMENT_DISTANCE_FEATURES",
    "segment_id_map",
    "segment_ids",
    "static_matrix",
    "segment_quality",
    "customer_distance",
    "standardize_features",
    "wasserstein_1d",
]
