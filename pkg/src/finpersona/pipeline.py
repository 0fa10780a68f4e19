"""Stage functions shared by the command line and the acceptance suite."""

import numpy as np
import pandas as pd

from .exceptions import DataError
from .intent import IMSKHMM
from .personalizer import build_batch, month_labels
from .segmentation import (
    SEGMENT_DISTANCE_FEATURES,
    WassersteinDelaunayDBSCAN,
    segment_id_map,
    segment_ids,
    standardize_features,
    static_matrix,
)


def segment_customers(static, months, train_ids, eps=None, eps_percentile=90.0, min_pts=5, n_components=2):
    """Cluster the training customers and assign everyone else to the nearest core.

    Returns the fitted estimator and a frame of ``customer_id, cluster,
    segment_id`` covering every customer.
    """
    static = static.sort_values("customer_id", kind="stable")
    ids = static["customer_id"].to_numpy(dtype=np.int64)
    X = static_matrix(static)
    cube_ids, cube = standardize_features(months, SEGMENT_DISTANCE_FEATURES)
    if not np.array_equal(cube_ids, ids):
        raise DataError("static and temporal tables cover different customers")
    train = np.isin(ids, np.asarray(train_ids, dtype=np.int64))
    est = WassersteinDelaunayDBSCAN(
        n_components=n_components, eps=eps, eps_percentile=eps_percentile, min_pts=min_pts
    ).fit(X[train], cube[train])
    labels = np.empty(len(ids), dtype=np.int64)
    labels[train] = est.labels_
    if (~train).any():
        labels[~train] = est.predict(X[~train], cube[~train])
    mapping = segment_id_map(est.labels_)
    frame = pd.DataFrame(
        {"customer_id": ids, "cluster": labels, "segment_id": segment_ids(labels, mapping=mapping)}
    )
    return est, frame


def decode_intents(months, train_ids, **params):
    """Fit the intent model on training customers and decode every customer-month."""
    train = months[months["customer_id"].isin(set(int(i) for i in train_ids))]
    est = IMSKHMM(**params).fit(train)
    return est, est.decode(months)


def intent_matrix(decoded, customer_ids, k_months=6):
    """(n, K) decoded states for the given customers."""
    d = decoded.sort_values(["customer_id", "month_index"], kind="stable")
    d = d[d["customer_id"].isin(set(int(i) for i in customer_ids))]
    states = d["decoded_state"].to_numpy(dtype=np.int64)
    if len(states) != len(customer_ids) * k_months:
        raise DataError("decoded intents do not cover every requested customer-month")
    return states.reshape(len(customer_ids), k_months)


def make_batches(static, months, segments, decoded, split, k_months=6, train_months=(4, 5, 6)):
    """``{name: (batch, labels)}`` for the train, val and test customers.

    Training items cover every month in ``train_months``; validation and
    test items predict the final month only.
    """
    seg = segments.set_index("customer_id")["segment_id"]
    out = {}
    for name in ("train", "val", "test"):
        ids = np.asarray(split[f"{name}_ids"], dtype=np.int64)
        ends = list(train_months) if name == "train" else [k_months]
        batch = build_batch(
            static, months, ids, seg.loc[ids].to_numpy(), intent_matrix(decoded, ids, k_months),
            k_months, end_months=ends,
        )
        out[name] = (batch, month_labels(months, ids, k_months, end_months=ends))
    return out
