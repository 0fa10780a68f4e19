"""1-D Wasserstein distances between customers' monthly feature samples."""

import numpy as np

from ..exceptions import DataError


def wasserstein_1d(a, b):
    """W1 between two equal-size empirical samples: mean |a_(j) - b_(j)|."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.shape != b.shape:
        raise DataError(f"sample sizes differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise DataError("empty samples")
    return float(np.mean(np.abs(a - b)))


def standardize_features(temporal, features, k_months=None, log_transform=True):
    """Build the (n_customers, n_features, K) cube of standardized monthly values.

    Columns are ``log1p``-transformed (when requested) and z-scored over all
    rows.  Returns ``(customer_ids, cube)``; the cube's last axis is sorted so
    W1 reduces to an elementwise mean.
    """
    frame = temporal.sort_values(["customer_id", "month_index"], kind="stable")
    counts = frame.groupby("customer_id", sort=True)["month_index"].count()
    k = int(counts.max()) if k_months is None else int(k_months)
    if len(counts) == 0:
        raise DataError("temporal table is empty")
    if (counts != k).any():
        short = counts[counts != k].index[:5].tolist()
        raise DataError(f"customers missing months (expected {k}): {short}")
    X = frame[list(features)].to_numpy(dtype=np.float64)
    if log_transform:
        X = np.log1p(np.clip(X, 0.0, None))
    sd = X.std(axis=0)
    X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    cube = X.reshape(len(counts), k, len(features)).transpose(0, 2, 1)
    return counts.index.to_numpy(), np.sort(cube, axis=2)


def customer_distance(i, j, temporal, features, log_transform=True):
    """Mean over standardized features of the per-feature W1 distance.

    ``i`` and ``j`` are customer ids present in ``temporal``.
    """
    ids, cube = standardize_features(temporal, features, log_transform=log_transform)
    pos = {int(c): r for r, c in enumerate(ids)}
    for c in (i, j):
        if int(c) not in pos:
            raise DataError(f"customer {c} has no months")
    a, b = cube[pos[int(i)]], cube[pos[int(j)]]
    return float(np.mean([wasserstein_1d(a[f], b[f]) for f in range(len(features))]))


def sorted_cube_distance(cube, i, j):
    """Vectorized customer distance for index arrays over a pre-sorted cube."""
    return np.abs(cube[i] - cube[j]).mean(axis=(-1, -2))
