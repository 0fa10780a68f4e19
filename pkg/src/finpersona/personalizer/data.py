"""Turning generator tables into network batches.

An item is a (customer, month) pair.  Its input is the customer's history
up to and including that month, right-aligned in a window of K months;
months before the first observed one are NaN in the raw block and become
zeros plus an ``observed = 0`` flag after standardization.  The label is
the action recorded at that month.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError, DimensionError
from ..rules import CHANNELS, HEAD_VOCABS, HEADS, REGIONS
from ..synthgen.generator import FEATURE_COLUMNS, HOLDINGS

LOG_FEATURES = ("card_spend", "savings_balance", "loan_balance")
STATIC_NUMERIC = ("age", "income", "credit_score", "risk_score", "tenure_months", "digital_engagement_index")


@dataclass
class PersonalizationBatch:
    """Network inputs for ``n`` items.

    ``temporal`` has shape (n, K, F); ``static`` (n, S); ``segment`` and
    ``intent`` are integer ids in 0..4; ``month_index`` is the month each
    item predicts.  ``intent_months`` (n, K), when present, holds the
    per-month intent ids aligned with the temporal positions (-1 where the
    month is unobserved); ``intent`` equals its last column.
    """

    customer_ids: np.ndarray
    temporal: np.ndarray
    static: np.ndarray
    segment: np.ndarray
    intent: np.ndarray
    month_index: np.ndarray = None
    intent_months: np.ndarray = None

    def __post_init__(self):
        if self.month_index is None:
            self.month_index = np.full(len(self.customer_ids), self.temporal.shape[1], dtype=np.int64)
        if self.intent_months is not None and np.shape(self.intent_months) != self.temporal.shape[:2]:
            raise DimensionError("intent_months must have shape (n, K)")

    def __len__(self):
        return len(self.customer_ids)

    def __getitem__(self, key):
        return getattr(self, key)

    def take(self, idx):
        idx = np.asarray(idx)
        return PersonalizationBatch(
            self.customer_ids[idx], self.temporal[idx], self.static[idx], self.segment[idx],
            self.intent[idx], self.month_index[idx],
            None if self.intent_months is None else self.intent_months[idx],
        )

    def with_temporal(self, temporal, intent=None, intent_months=None):
        temporal = np.asarray(temporal, dtype=np.float64)
        if temporal.shape != self.temporal.shape:
            raise DimensionError("replacement temporal block must keep its shape")
        return PersonalizationBatch(
            self.customer_ids, temporal, self.static, self.segment,
            self.intent if intent is None else np.asarray(intent, dtype=np.int64), self.month_index,
            self.intent_months if intent_months is None else np.asarray(intent_months, dtype=np.int64),
        )


def _check_ids(ids):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size > 1 and np.any(np.diff(ids) <= 0):
        raise DataError("customer ids must be strictly increasing")
    return ids


def _wide(months, ids, columns, k_months):
    m = months[months["customer_id"].isin(set(ids.tolist()))]
    m = m.sort_values(["customer_id", "month_index"], kind="stable")
    counts = m.groupby("customer_id").size().reindex(ids)
    if counts.isna().any() or (counts != k_months).any():
        raise DataError(f"every customer needs exactly {k_months} months of rows")
    return m, m[list(columns)].to_numpy().reshape(len(ids), k_months, len(columns))


def _end_months(end_months, k_months):
    ends = np.asarray([k_months] if end_months is None else end_months, dtype=np.int64)
    if ends.size == 0 or ends.min() < 1 or ends.max() > k_months:
        raise DataError(f"end months must lie in 1..{k_months}")
    return ends


def temporal_block(months, ids, k_months=6, features=FEATURE_COLUMNS, end_months=None):
    """Right-aligned histories, shape (n * len(end_months), K, F).

    Items are ordered customer-major.  Currency columns are on a log1p
    scale; unobserved leading months are NaN.
    """
    ids = _check_ids(ids)
    ends = _end_months(end_months, k_months)
    _, X = _wide(months, ids, features, k_months)
    X = X.astype(np.float64)
    for j, c in enumerate(features):
        if c in LOG_FEATURES:
            X[:, :, j] = np.log1p(np.clip(X[:, :, j], 0.0, None))
    out = np.full((len(ids), len(ends), k_months, len(features)), np.nan)
    for e, t in enumerate(ends):
        out[:, e, k_months - t :] = X[:, :t]
    return out.reshape(len(ids) * len(ends), k_months, len(features))


def static_block(static, ids):
    """Numeric columns, one-hot region and channel preference, holdings flags."""
    s = static.set_index("customer_id").loc[list(ids)]
    num = s[list(STATIC_NUMERIC)].to_numpy(dtype=np.float64)
    num[:, 1] = np.log(np.clip(num[:, 1], 1.0, None))
    region = (s["region"].to_numpy()[:, None] == np.array(REGIONS)[None, :]).astype(np.float64)
    chan = (s["channel_pref"].to_numpy()[:, None] == np.array(CHANNELS)[None, :]).astype(np.float64)
    hold = s[list(HOLDINGS)].to_numpy(dtype=np.float64)
    return np.hstack([num, region, chan, hold])


def month_labels(months, ids, k_months=6, end_months=None):
    """Integer class codes of the actions at each item's month, (n_items, 4)."""
    ids = _check_ids(ids)
    ends = _end_months(end_months, k_months)
    _, A = _wide(months, ids, HEADS, k_months)
    A = A[:, ends - 1].reshape(-1, len(HEADS))
    out = np.empty(A.shape, dtype=np.int64)
    for j, h in enumerate(HEADS):
        lookup = {v: i for i, v in enumerate(HEAD_VOCABS[h])}
        try:
            out[:, j] = [lookup[v] for v in A[:, j]]
        except KeyError as exc:
            raise DataError(f"unknown {h} label {exc}") from None
    return out


def final_month_labels(months, ids, k_months=6):
    return month_labels(months, ids, k_months)


def build_batch(static, months, ids, segment, intent, k_months=6, end_months=None):
    """Assemble a :class:`PersonalizationBatch` for the customers in ``ids``.

    ``segment`` holds one id per customer.  ``intent`` holds either one id
    per customer (final month) or an (n, K) array of per-month states from
    which each item's month is taken.
    """
    ids = _check_ids(ids)
    ends = _end_months(end_months, k_months)
    segment = np.asarray(segment, dtype=np.int64)
    intent = np.asarray(intent, dtype=np.int64)
    if segment.shape != (len(ids),):
        raise DimensionError("segment needs one id per customer")
    if intent.ndim == 1:
        if intent.shape != (len(ids),) or end_months is not None:
            raise DimensionError("per-customer intent ids only describe the final month")
        intent = np.repeat(intent[:, None], k_months, axis=1)
    if intent.shape != (len(ids), k_months):
        raise DimensionError(f"intent must have shape ({len(ids)}, {k_months})")
    r = len(ends)
    aligned = np.full((len(ids), r, k_months), -1, dtype=np.int64)
    for j, e in enumerate(ends):
        aligned[:, j, k_months - e :] = intent[:, :e]
    return PersonalizationBatch(
        customer_ids=np.repeat(ids, r),
        temporal=temporal_block(months, ids, k_months, end_months=ends),
        static=np.repeat(static_block(static, ids), r, axis=0),
        segment=np.repeat(segment, r),
        intent=intent[:, ends - 1].reshape(-1),
        month_index=np.tile(ends, len(ids)),
        intent_months=aligned.reshape(len(ids) * r, k_months),
    )
