"""File layout of the generated dataset.

``static.csv`` and ``temporal.csv`` carry only training-visible columns;
``truth.csv`` is the validation sidecar holding ``true_segment`` and
``true_intent``.  The training-data writer selects columns by the fixed
schemas below, so truth columns cannot leak into the training files.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from ..exceptions import StageDependencyError
from .generator import FEATURE_COLUMNS, STATIC_COLUMNS, TEMPORAL_COLUMNS, TRUTH_COLUMNS

STATIC_NUMERIC = (
    "age",
    "income",
    "credit_score",
    "risk_score",
    "tenure_months",
    "digital_engagement_index",
)


def normalization_stats(static, months, train_ids):
    """Mean/std of continuous columns over the training customers only."""
    train = set(int(i) for i in train_ids)
    s = static[static["customer_id"].isin(train)]
    m = months[months["customer_id"].isin(train)]

    def summarize(frame, cols):
        out = {}
        for c in cols:
            x = frame[c].to_numpy(dtype=np.float64)
            sd = float(x.std()) if len(x) else 1.0
            out[c] = {"mean": float(x.mean()) if len(x) else 0.0, "std": sd if sd > 0 else 1.0}
        return out

    return {"static": summarize(s, STATIC_NUMERIC), "temporal": summarize(m, FEATURE_COLUMNS)}


def write_dataset(out_dir, static, months, split=None, stats=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    static.loc[:, list(STATIC_COLUMNS)].to_csv(out / "static.csv", index=False)
    months.loc[:, list(TEMPORAL_COLUMNS)].to_csv(out / "temporal.csv", index=False)
    truth = months.loc[:, ["customer_id", "month_index", "true_intent"]].merge(
        static.loc[:, ["customer_id", "true_segment"]], on="customer_id", how="left"
    )
    truth.loc[:, list(TRUTH_COLUMNS)].to_csv(out / "truth.csv", index=False)
    if split is not None:
        payload = dict(split)
        if stats is not None:
            payload["normalization"] = stats
        (out / "split.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require(path):
    if not path.exists():
        raise StageDependencyError(f"missing upstream artifact: {path}")
    return path


def read_dataset(out_dir):
    """Load the training-visible tables ``(static, temporal)``."""
    out = Path(out_dir)
    static = pd.read_csv(_require(out / "static.csv"))
    months = pd.read_csv(_require(out / "temporal.csv"))
    return static, months


def read_truth(out_dir):
    return pd.read_csv(_require(Path(out_dir) / "truth.csv"))


def read_split(out_dir):
    return json.loads(_require(Path(out_dir) / "split.json").read_text())
