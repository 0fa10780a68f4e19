"""Diagonal-Gaussian HMM primitives: scaled forward-backward, Viterbi, mean-shift M-step."""

import warnings
from dataclasses import dataclass

import numpy as np

from .._validation import stochastic_rows
from ..exceptions import ConfigurationError, DataError

VARIANCE_FLOOR = 1e-6
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class HmmModel:
    initial: np.ndarray
    transitions: np.ndarray
    emission_means: np.ndarray
    emission_vars: np.ndarray

    @property
    def n_states(self):
        return len(self.initial)

    def validate(self):
        if not stochastic_rows(self.initial) or not stochastic_rows(self.transitions):
            raise ConfigurationError("initial and transition rows must sum to 1")
        if np.any(self.emission_vars < VARIANCE_FLOOR * (1 - 1e-12)):
            raise ConfigurationError("emission variances below the floor")
        return self

    def to_dict(self):
        return {
            "n_states": int(self.n_states),
            "initial": self.initial.tolist(),
            "transitions": self.transitions.tolist(),
            "emission_means": self.emission_means.tolist(),
            "emission_vars": self.emission_vars.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            initial=np.asarray(d["initial"], dtype=np.float64),
            transitions=np.asarray(d["transitions"], dtype=np.float64),
            emission_means=np.asarray(d["emission_means"], dtype=np.float64),
            emission_vars=np.asarray(d["emission_vars"], dtype=np.float64),
        )


def emission_logpdf(model, obs):
    """Log density of every observation under every state; shape (..., S)."""
    x = np.asarray(obs, dtype=np.float64)[..., None, :]
    var = np.maximum(model.emission_vars, VARIANCE_FLOOR)
    z = (x - model.emission_means) ** 2 / var
    return -0.5 * (z + np.log(var) + _LOG_2PI).sum(axis=-1)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def forward_backward_batch(model, obs):
    """Scaled forward-backward over a batch of equal-length sequences.

    Parameters
    ----------
    obs : ndarray of shape (N, K, F)

    Returns
    -------
    loglik : (N,) ; gamma : (N, K, S) ; xi_sum : (N, S, S) summed over time
    """
    logb = emission_logpdf(model, obs)
    N, K, S = logb.shape
    offset = logb.max(axis=2, keepdims=True)
    b = np.exp(logb - offset)
    A = model.transitions
    alpha = np.empty((N, K, S))
    scale = np.empty((N, K))
    a = model.initial * b[:, 0]
    scale[:, 0] = a.sum(axis=1)
    alpha[:, 0] = a / scale[:, 0, None]
    for t in range(1, K):
        a = (alpha[:, t - 1] @ A) * b[:, t]
        scale[:, t] = a.sum(axis=1)
        alpha[:, t] = a / scale[:, t, None]
    beta = np.empty((N, K, S))
    beta[:, K - 1] = 1.0
    xi_sum = np.zeros((N, S, S))
    for t in range(K - 2, -1, -1):
        nb = b[:, t + 1] * beta[:, t + 1]
        xi_sum += alpha[:, t, :, None] * A[None] * (nb / scale[:, t + 1, None])[:, None, :]
        beta[:, t] = (nb @ A.T) / scale[:, t + 1, None]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=2, keepdims=True)
    loglik = np.log(scale).sum(axis=1) + offset[..., 0].sum(axis=1)
    return loglik, gamma, xi_sum


def forward_backward(model, obs):
    """Posterior state marginals for one sequence ``obs`` of shape (K, F).

    Returns
    -------
    dict
        ``log_likelihood`` (float), ``gamma`` (K, S) and ``xi`` (K-1, S, S).
    """
    x = np.asarray(obs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    logb = emission_logpdf(model, x)
    K, S = logb.shape
    offset = logb.max(axis=1, keepdims=True)
    b = np.exp(logb - offset)
    A = model.transitions
    alpha = np.empty((K, S))
    c = np.empty(K)
    a = model.initial * b[0]
    c[0] = a.sum()
    alpha[0] = a / c[0]
    for t in range(1, K):
        a = (alpha[t - 1] @ A) * b[t]
        c[t] = a.sum()
        alpha[t] = a / c[t]
    beta = np.ones((K, S))
    xi = np.empty((max(K - 1, 0), S, S))
    for t in range(K - 2, -1, -1):
        nb = b[t + 1] * beta[t + 1] / c[t + 1]
        xi[t] = alpha[t][:, None] * A * nb[None, :]
        beta[t] = A @ nb
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    return {
        "log_likelihood": float(np.log(c).sum() + offset.sum()),
        "gamma": gamma,
        "xi": xi,
    }


def viterbi_path(model, obs):
    """Most probable state path and its joint log-probability.

    Ties go to the lower state index.
    """
    x = np.asarray(obs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    logb = emission_logpdf(model, x)
    K, S = logb.shape
    logA = _log(model.transitions)
    delta = _log(model.initial) + logb[0]
    back = np.zeros((K, S), dtype=np.int64)
    for t in range(1, K):
        cand = delta[:, None] + logA
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(S)] + logb[t]
    path = np.empty(K, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(K - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(delta[path[-1]])


def viterbi_batch(model, obs):
    """Vectorized Viterbi over (N, K, F); returns paths (N, K) and log-probs (N,)."""
    logb = emission_logpdf(model, obs)
    N, K, S = logb.shape
    logA = _log(model.transitions)
    delta = _log(model.initial) + logb[:, 0]
    back = np.zeros((N, K, S), dtype=np.int64)
    for t in range(1, K):
        cand = delta[:, :, None] + logA[None]
        back[:, t] = np.argmax(cand, axis=1)
        delta = np.take_along_axis(cand, back[:, t][:, None, :], axis=1)[:, 0] + logb[:, t]
    paths = np.empty((N, K), dtype=np.int64)
    paths[:, -1] = np.argmax(delta, axis=1)
    n_idx = np.arange(N)
    for t in range(K - 1, 0, -1):
        paths[:, t - 1] = back[n_idx, t, paths[:, t]]
    return paths, delta[n_idx, paths[:, -1]]


def path_log_prob(model, obs, path):
    """Joint log-probability of a given state path and the observations."""
    logb = emission_logpdf(model, np.asarray(obs, dtype=np.float64).reshape(len(path), -1))
    logA = _log(model.transitions)
    lp = _log(model.initial[path[0]]) + logb[0, path[0]]
    for t in range(1, len(path)):
        lp += logA[path[t - 1], path[t]] + logb[t, path[t]]
    return float(lp)


def mean_shift_recenter(means, obs, gamma, bandwidth):
    """One responsibility-weighted Gaussian-kernel mean-shift step per state.

    ``m_s <- sum_n g_ns K_h(x_n - m_s) x_n / sum_n g_ns K_h(x_n - m_s)``.
    An infinite bandwidth reduces to the ordinary Baum-Welch mean update.
    A state whose kernel weights all fall below 1e-300 keeps its mean.
    """
    if not bandwidth > 0:
        raise ConfigurationError("bandwidth must be > 0")
    means = np.asarray(means, dtype=np.float64)
    X = np.asarray(obs, dtype=np.float64)
    G = np.asarray(gamma, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if G.shape != (X.shape[0], means.shape[0]):
        raise DataError(f"gamma shape {G.shape} does not match (n_obs, n_states)")
    out = means.copy()
    for s in range(means.shape[0]):
        if np.isinf(bandwidth):
            w = G[:, s]
        else:
            d2 = np.sum((X - means[s]) ** 2, axis=1)
            w = G[:, s] * np.exp(-0.5 * d2 / bandwidth**2)
        total = w.sum()
        if not total > 1e-300 or np.all(w < 1e-300):
            warnings.warn(
                f"mean-shift weights vanished for state {s}; keeping previous mean",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        out[s] = w @ X / total
    return out
