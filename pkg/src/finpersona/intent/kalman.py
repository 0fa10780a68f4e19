"""Scalar random-walk Kalman filter with Rauch-Tung-Striebel smoothing."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, DataError


@dataclass(frozen=True)
class KalmanParams:
    process_var_ratio: float = 0.5

    def __post_init__(self):
        if not self.process_var_ratio > 0:
            raise ConfigurationError("process_var_ratio must be strictly positive")


def kalman_smooth(series, params=KalmanParams()):
    """Smooth along the last axis.

    State model ``x_t = x_{t-1} + w_t`` with ``Var(w) = ratio``, observation
    ``y_t = x_t + v_t`` with ``Var(v) = 1``.  The first state has a diffuse
    prior, so a vanishing ratio returns the series mean and a huge ratio
    returns the input.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.shape[-1] < 1:
        raise DataError("series must have at least one element")
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite values")
    if not isinstance(params, KalmanParams):
        params = KalmanParams(float(params))
    q = float(params.process_var_ratio)
    K = y.shape[-1]

    # Gains do not depend on the data, so run the variance recursion once.
    p_filt = np.empty(K)
    p_pred = np.empty(K)
    gain = np.empty(K)
    p_pred[0] = np.inf
    gain[0] = 1.0
    p_filt[0] = 1.0
    for t in range(1, K):
        p_pred[t] = p_filt[t - 1] + q
        gain[t] = p_pred[t] / (p_pred[t] + 1.0)
        p_filt[t] = (1.0 - gain[t]) * p_pred[t]

    x_filt = np.empty_like(y)
    x_filt[..., 0] = y[..., 0]
    for t in range(1, K):
        prev = x_filt[..., t - 1]
        x_filt[..., t] = prev + gain[t] * (y[..., t] - prev)

    x_smooth = np.empty_like(y)
    x_smooth[..., K - 1] = x_filt[..., K - 1]
    for t in range(K - 2, -1, -1):
        c = p_filt[t] / p_pred[t + 1]
        x_smooth[..., t] = x_filt[..., t] + c * (x_smooth[..., t + 1] - x_filt[..., t])
    return x_smooth
