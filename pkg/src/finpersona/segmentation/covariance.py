"""Ledoit-Wolf shrinkage covariance and the PCA built on top of it."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import as_float_matrix, check_width
from ..exceptions import DegenerateDataError, DimensionError, InsufficientDataError


@dataclass
class ShrunkCovariance:
    matrix: np.ndarray
    shrinkage_delta: float
    target_mu: float


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray


def ledoit_wolf(data, shrinkage=None):
    """Shrink the sample covariance toward ``mu * I``.

    ``S`` is the maximum-likelihood covariance of the centered data and
    ``mu = trace(S) / p``.  The intensity is ``min(b2, d2) / d2`` with
    ``d2 = ||S - mu I||_F^2`` and ``b2 = n^-2 sum_k ||x_k x_k^T - S||_F^2``.

    Parameters
    ----------
    data : array-like of shape (n_samples, n_features)
    shrinkage : float, optional
        Force the intensity instead of estimating it.
    """
    X = as_float_matrix(data, "data")
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError(f"ledoit_wolf needs n >= 2 samples, got {n}")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n
    mu = float(np.trace(S)) / p
    if mu <= 0.0:
        raise DegenerateDataError("sample covariance is identically zero (all-constant data)")
    if shrinkage is None:
        target = S.copy()
        target.flat[:: p + 1] -= mu
        d2 = float(np.sum(target**2))
        # sum_k ||x x^T||_F^2 = sum_k ||x_k||^4
        sq = np.sum(Xc**2, axis=1)
        b2_bar = (float(np.sum(sq**2)) / n - float(np.sum(S**2))) / n
        b2 = min(b2_bar, d2)
        delta = 0.0 if d2 == 0.0 else b2 / d2
    else:
        delta = float(shrinkage)
    delta = float(np.clip(delta, 0.0, 1.0))
    shrunk = (1.0 - delta) * S
    shrunk.flat[:: p + 1] += delta * mu
    shrunk = 0.5 * (shrunk + shrunk.T)
    return ShrunkCovariance(matrix=shrunk, shrinkage_delta=delta, target_mu=mu)


def pca_fit(cov, mean, d):
    """Top-``d`` eigenvectors of a (shrunk) covariance.

    Each component is signed so its largest-magnitude entry is positive.
    Eigenvalue ties keep the solver's axis order.
    """
    C = cov.matrix if isinstance(cov, ShrunkCovariance) else np.asarray(cov, dtype=np.float64)
    p = C.shape[0]
    if not 1 <= d <= p:
        raise DimensionError(f"d must satisfy 1 <= d <= {p}, got {d}")
    w, V = np.linalg.eigh(C)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    comps = V[:, :d].T.copy()
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(
        mean=np.asarray(mean, dtype=np.float64).copy(),
        components=comps,
        explained_variance=w[:d].copy(),
    )


def pca_transform(model, data):
    X = as_float_matrix(data, "data")
    check_width(X, model.mean.shape[0], "data")
    return (X - model.mean) @ model.components.T


class LedoitWolfPCA(TransformerMixin, BaseEstimator):
    """PCA on the Ledoit-Wolf shrunk covariance of standardized data.

    Parameters
    ----------
    n_components : int, default=2
    standardize : bool, default=True
        Z-score columns before estimating the covariance.
    shrinkage : float or None
        Fixed shrinkage intensity; ``None`` estimates it.
    """

    def __init__(self, n_components=2, standardize=True, shrinkage=None):
        self.n_components = n_components
        self.standardize = standardize
        self.shrinkage = shrinkage

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        if self.standardize:
            scale = X.std(axis=0)
            self.scale_ = np.where(scale > 0, scale, 1.0)
        else:
            self.scale_ = np.ones(X.shape[1])
        self.center_ = X.mean(axis=0)
        Z = (X - self.center_) / self.scale_
        self.covariance_ = ledoit_wolf(Z, shrinkage=self.shrinkage)
        self.model_ = pca_fit(self.covariance_, np.zeros(X.shape[1]), self.n_components)
        self.components_ = self.model_.components
        self.explained_variance_ = self.model_.explained_variance
        self.shrinkage_ = self.covariance_.shrinkage_delta
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = as_float_matrix(X, "X")
        check_width(X, self.n_features_in_)
        return pca_transform(self.model_, (X - self.center_) / self.scale_)
