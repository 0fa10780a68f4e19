"""Score decoded intent paths against the withheld ground truth."""

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from ..exceptions import DataError


def hungarian_alignment(pred, truth, n_states):
    """Map predicted labels onto truth labels maximizing matched counts.

    Returns ``(mapping, confusion)``; ``confusion[t, p]`` counts truth ``t``
    against raw prediction ``p``.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    confusion = np.zeros((n_states, n_states), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    rows, cols = linear_sum_assignment(-confusion)
    mapping = np.arange(n_states)
    mapping[cols] = rows
    return mapping, confusion


def align_and_score(decoded, truth, n_states=5):
    """Hungarian-aligned accuracy, ARI and confusion matrix.

    Parameters
    ----------
    decoded : DataFrame
        ``customer_id``, ``month_index``, ``decoded_state``.
    truth : DataFrame
        ``customer_id``, ``month_index``, ``true_intent``.
    """
    key = ["customer_id", "month_index"]
    d = decoded[key + ["decoded_state"]]
    t = truth[key + ["true_intent"]]
    merged = d.merge(t, on=key, how="outer", indicator=True)
    if (merged["_merge"] != "both").any() or len(merged) != len(d) or len(d) == 0:
        raise DataError("decoded and truth tables cover different customer-months")
    pred = merged["decoded_state"].to_numpy(dtype=np.int64)
    true = merged["true_intent"].to_numpy(dtype=np.int64)
    mapping, raw = hungarian_alignment(pred, true, n_states)
    aligned = mapping[pred]
    confusion = np.zeros((n_states, n_states), dtype=np.int64)
    np.add.at(confusion, (true, aligned), 1)
    return {
        "accuracy": float(np.mean(aligned == true)),
        "ari": float(adjusted_rand_score(true, pred)),
        "confusion": confusion,
        "mapping": mapping,
    }


def decoded_frame(customer_ids, paths):
    ids = np.asarray(customer_ids)
    n, k = paths.shape
    return pd.DataFrame(
        {
            "customer_id": np.repeat(ids, k),
            "month_index": np.tile(np.arange(1, k + 1), n),
            "decoded_state": paths.ravel(),
        }
    )
