"""Feature matrices consumed by the segmenter."""

import numpy as np

from ..rules import N_SEGMENTS

STATIC_SEGMENT_FEATURES = (
    "age",
    "income",
    "credit_score",
    "risk_score",
    "tenure_months",
    "digital_engagement_index",
    "holds_credit_card",
    "holds_savings",
    "holds_personal_loan",
    "holds_mortgage",
)
SEGMENT_DISTANCE_FEATURES = ("card_spend", "savings_balance", "loan_balance")


def static_matrix(static, columns=STATIC_SEGMENT_FEATURES):
    """Numeric static features; income enters on a log scale."""
    X = static.sort_values("customer_id", kind="stable")[list(columns)].to_numpy(dtype=np.float64)
    if "income" in columns:
        j = list(columns).index("income")
        X[:, j] = np.log(np.clip(X[:, j], 1.0, None))
    return X


def segment_id_map(labels, n_segments=N_SEGMENTS):
    """Cluster label -> embedding id.

    Clusters are ranked by size (ties by label); the largest
    ``n_segments - 1`` keep their own id and every other label, noise
    included, falls into the last id.
    """
    labels = np.asarray(labels, dtype=np.int64)
    valid = labels[labels >= 0]
    if valid.size == 0:
        return {}
    ids, counts = np.unique(valid, return_counts=True)
    order = ids[np.lexsort((ids, -counts))]
    return {int(c): min(r, n_segments - 1) for r, c in enumerate(order)}


def segment_ids(labels, n_segments=N_SEGMENTS, mapping=None):
    """Map cluster labels onto ``0..n_segments-1`` with :func:`segment_id_map`."""
    labels = np.asarray(labels, dtype=np.int64)
    if mapping is None:
        mapping = segment_id_map(labels, n_segments)
    return np.array([mapping.get(int(l), n_segments - 1) for l in labels], dtype=np.int64)
