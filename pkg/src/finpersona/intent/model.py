"""IMSK-HMM: Kalman-smoothed observations, Baum-Welch with mean-shift means."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DataError, FinPersonaError
from ..rules import IntentState
from .hmm import (
    VARIANCE_FLOOR,
    HmmModel,
    forward_backward_batch,
    mean_shift_recenter,
    viterbi_batch,
)
from .kalman import KalmanParams, kalman_smooth
from .scoring import decoded_frame

DEFAULT_INTENT_FEATURES = ("logins", "sessions", "page_views_total")
_BINARY = {"delinquency_flag"}
_PAGE_VIEWS = (
    "page_views_card",
    "page_views_loan",
    "page_views_mortgage",
    "page_views_savings",
    "page_views_invest",
)
# Activity rank -> IntentState code, least active first.
CANONICAL_ORDER = (
    IntentState.DORMANT,
    IntentState.CHURN_RISK,
    IntentState.BROWSING,
    IntentState.CONSIDERATION,
    IntentState.HIGH_INTENT,
)


def raw_feature_cube(temporal, features):
    """(customer_ids, (N, K, F) array) of log-scaled features in month order."""
    frame = temporal.sort_values(["customer_id", "month_index"], kind="stable")
    counts = frame.groupby("customer_id", sort=True)["month_index"].count()
    if len(counts) == 0:
        raise DataError("temporal table is empty")
    k = int(counts.max())
    if (counts != k).any():
        raise DataError(f"every customer needs {k} months")
    cols = []
    for f in features:
        if f == "page_views_total":
            x = frame[list(_PAGE_VIEWS)].to_numpy(dtype=np.float64).sum(axis=1)
        else:
            x = frame[f].to_numpy(dtype=np.float64)
        cols.append(x if f in _BINARY else np.log1p(np.clip(x, 0.0, None)))
    X = np.stack(cols, axis=1)
    return counts.index.to_numpy(), X.reshape(len(counts), k, len(features))


def _activity(means, features):
    active = [j for j, f in enumerate(features) if f not in _BINARY] or list(range(len(features)))
    return means[:, active].mean(axis=1)


def _canonical_permutation(means, features):
    """``perm[new] = old`` so states are numbered by activity rank."""
    S = means.shape[0]
    rank = np.argsort(_activity(means, features), kind="stable")
    codes = [int(c) for c in CANONICAL_ORDER] if S == len(CANONICAL_ORDER) else list(range(S))
    perm = np.empty(S, dtype=np.int64)
    for r, old in enumerate(rank):
        perm[codes[r]] = old
    return perm


def _permute(model, perm):
    return HmmModel(
        initial=model.initial[perm],
        transitions=model.transitions[np.ix_(perm, perm)],
        emission_means=model.emission_means[perm],
        emission_vars=model.emission_vars[perm],
    )


def initialize_hmm(obs, features, n_states, seed):
    """Quantile slices along the activity score, ordered canonically."""
    X = obs.reshape(-1, obs.shape[-1])
    score = _activity(X, features)
    order = np.argsort(score, kind="stable")
    slices = np.array_split(order, n_states)
    rng = np.random.default_rng(seed)
    means = np.stack([X[idx].mean(axis=0) for idx in slices])
    means = means + 1e-3 * rng.standard_normal(means.shape)
    var = np.maximum(np.stack([X[idx].var(axis=0) for idx in slices]), VARIANCE_FLOOR)
    model = HmmModel(
        initial=np.full(n_states, 1.0 / n_states),
        transitions=0.5 * np.eye(n_states) + 0.5 / n_states,
        emission_means=means,
        emission_vars=var,
    )
    perm = _canonical_permutation(means, features)
    return _permute(model, perm)


def baum_welch(obs, model, features, max_iter=100, tol=1e-4, bandwidth=1.0):
    """EM with the mean M-step replaced by one mean-shift step.

    Returns ``(model, history)`` where ``history`` lists the total
    log-likelihood before each update.
    """
    history = []
    N, K, F = obs.shape
    flat = obs.reshape(-1, F)
    for it in range(max_iter):
        loglik, gamma, xi_sum = forward_backward_batch(model, obs)
        ll = float(loglik.sum())
        if np.isinf(bandwidth) and history and ll < history[-1] - 1e-8 * max(1.0, abs(history[-1])):
            raise FinPersonaError(
                f"EM log-likelihood decreased at iteration {it}: {history[-1]} -> {ll}"
            )
        history.append(ll)
        if len(history) > 1 and ll - history[-2] < tol:
            break
        g_flat = gamma.reshape(-1, gamma.shape[-1])
        initial = gamma[:, 0].mean(axis=0)
        trans = xi_sum.sum(axis=0)
        trans /= np.maximum(trans.sum(axis=1, keepdims=True), 1e-300)
        means = mean_shift_recenter(model.emission_means, flat, g_flat, bandwidth)
        w = g_flat.sum(axis=0)
        var = np.einsum("ns,nsf->sf", g_flat, (flat[:, None, :] - means[None]) ** 2)
        var = np.maximum(var / np.maximum(w, 1e-300)[:, None], VARIANCE_FLOOR)
        model = HmmModel(initial=initial / initial.sum(), transitions=trans, emission_means=means, emission_vars=var)
    else:
        if max_iter > 0:
            loglik, _, _ = forward_backward_batch(model, obs)
            history.append(float(loglik.sum()))
    return model, history


class IMSKHMM(BaseEstimator):
    """Intent-Mean-Shift Kalman HMM over customer-month behavior.

    Parameters
    ----------
    n_states : int, default=5
    features : tuple of str
        Temporal columns; ``page_views_total`` sums the category views.
    process_var_ratio : float, default=0.5
        Kalman Q/R ratio shared by every standardized feature.
    bandwidth : float, default=1.0
        Mean-shift kernel width in standardized units; ``np.inf`` gives
        plain Baum-Welch.
    max_iter : int, default=100
    tol : float, default=1e-4
    seed : int, default=0
    """

    def __init__(
        self,
        n_states=5,
        features=DEFAULT_INTENT_FEATURES,
        process_var_ratio=0.5,
        bandwidth=1.0,
        max_iter=100,
        tol=1e-4,
        seed=0,
    ):
        self.n_states = n_states
        self.features = features
        self.process_var_ratio = process_var_ratio
        self.bandwidth = bandwidth
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    def _observations(self, temporal):
        ids, X = raw_feature_cube(temporal, self.features)
        Z = (X - self.feature_mean_) / self.feature_std_
        smoothed = kalman_smooth(Z.transpose(0, 2, 1), KalmanParams(self.process_var_ratio))
        return ids, smoothed.transpose(0, 2, 1)

    def fit(self, temporal, y=None):
        """Fit on training-visible columns of the temporal table."""
        _, X = raw_feature_cube(temporal, self.features)
        flat = X.reshape(-1, X.shape[-1])
        self.feature_mean_ = flat.mean(axis=0)
        sd = flat.std(axis=0)
        self.feature_std_ = np.where(sd > 0, sd, 1.0)
        _, obs = self._observations(temporal)
        init = initialize_hmm(obs, self.features, self.n_states, self.seed)
        self.init_model_ = init
        model, history = baum_welch(
            obs, init, self.features, max_iter=self.max_iter, tol=self.tol, bandwidth=self.bandwidth
        )
        if self.max_iter > 0:
            model = _permute(model, _canonical_permutation(model.emission_means, self.features))
        self.model_ = model
        self.history_ = history
        self.n_iter_ = max(len(history) - 1, 0)
        return self

    def decode(self, temporal):
        """Viterbi paths as a ``customer_id, month_index, decoded_state`` frame."""
        check_is_fitted(self, "model_")
        ids, obs = self._observations(temporal)
        paths, _ = viterbi_batch(self.model_, obs)
        return decoded_frame(ids, paths)

    def predict(self, temporal):
        return self.decode(temporal)["decoded_state"].to_numpy()

    def score(self, temporal, y=None):
        """Mean per-customer log-likelihood."""
        check_is_fitted(self, "model_")
        _, obs = self._observations(temporal)
        loglik, _, _ = forward_backward_batch(self.model_, obs)
        return float(loglik.mean())


def fit_imsk_hmm(temporal, features=DEFAULT_INTENT_FEATURES, kalman=KalmanParams(), **config):
    """Functional wrapper returning the fitted :class:`HmmModel`."""
    est = IMSKHMM(features=tuple(features), process_var_ratio=kalman.process_var_ratio, **config)
    return est.fit(temporal).model_
