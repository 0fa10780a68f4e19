"""Evaluation, the temporal shuffle test, ablations and report files."""

import csv

import numpy as np
from scipy.special import expit

from ..exceptions import DataError, ProtocolError
from ..rules import HEAD_SIZES, HEAD_VOCABS, HEADS
from .metrics import RunReport, head_report

SETTINGS = {
    "full": {},
    "no_intent": {"use_intent": False},
    "no_segment": {"use_segment": False},
    "no_temporal": {"use_temporal": False},
}
SETTING_LABELS = {
    "full": "Full model",
    "no_intent": "No-Intent",
    "no_segment": "No-Segment",
    "no_temporal": "No-Temporal",
    "full_shuffled": "Full model, months shuffled",
}
TABLE_COLUMNS = ("setting", "label", "overall") + HEADS


def evaluate(model, batch, labels, setting="full"):
    """Per-head macro-F1 and accuracy of ``model.predict(batch)``."""
    labels = np.asarray(labels)
    if len(batch) == 0 or labels.size == 0:
        raise DataError("cannot evaluate on an empty test set")
    preds = np.asarray(model.predict(batch))
    if preds.shape != labels.shape:
        raise DataError(f"predictions {preds.shape} and labels {labels.shape} differ in shape")
    heads = {h: head_report(h, preds[:, j], labels[:, j], HEAD_SIZES[h]) for j, h in enumerate(HEADS)}
    return RunReport(setting, heads)


def month_permutations(customer_ids, k_months, seed):
    """One seeded permutation of month positions per customer."""
    out = np.empty((len(customer_ids), k_months), dtype=np.int64)
    for i, cid in enumerate(customer_ids):
        out[i] = np.random.default_rng([int(seed), int(cid)]).permutation(k_months)
    return out


def shuffle_months(batch, perms):
    """Reorder each customer's months; feature rows stay intact.

    Per-month intent ids travel with their rows, so the id the model reads
    for the final position is that of whichever month now sits there.
    """
    X = batch.temporal
    perms = np.asarray(perms, dtype=np.int64)
    if perms.shape != X.shape[:2]:
        raise DataError("need one permutation per customer")
    shuffled = np.take_along_axis(X, perms[:, :, None], axis=1)
    if batch.intent_months is None:
        return batch.with_temporal(shuffled)
    months = np.take_along_axis(batch.intent_months, perms, axis=1)
    intent = np.where(months[:, -1] >= 0, months[:, -1], batch.intent)
    return batch.with_temporal(shuffled, intent=intent, intent_months=months)


def _is_temporal(model):
    inner = getattr(model, "model_", None)
    if inner is not None:
        return bool(inner.config.use_temporal)
    return bool(getattr(model, "use_temporal", True))


def shuffle_test(model, batch, labels, seed=0, perms=None):
    """Evaluate after permuting month order within every customer.

    ``perms`` overrides the seeded permutations (the identity reproduces
    :func:`evaluate`).  Models without temporal encoding are refused.
    """
    if not _is_temporal(model):
        raise ProtocolError("the shuffle test only applies to temporal models")
    if perms is None:
        perms = month_permutations(batch.customer_ids, batch.temporal.shape[1], seed)
    return evaluate(model, shuffle_months(batch, perms), labels, setting="full_shuffled")


def run_ablations(data, params=None, settings=None, shuffle_seed=0):
    """Train and test each setting on the same batches and seeds.

    ``data`` maps ``train``/``val``/``test`` to ``(batch, labels)``.
    Returns ``(reports, estimators)``; reports include the shuffled run
    of the full model when it is among the settings.
    """
    from ..personalizer import TemporalPersonalizer

    params = dict(params or {})
    settings = list(SETTINGS) if settings is None else list(settings)
    (tr, ytr), (va, yva), (te, yte) = data["train"], data["val"], data["test"]
    reports, models = {}, {}
    for name in settings:
        est = TemporalPersonalizer(**{**params, **SETTINGS[name]})
        est.fit(tr, ytr, eval_set=(va, yva))
        models[name] = est
        reports[name] = evaluate(est, te, yte, setting=name)
        if name == "full":
            reports["full_shuffled"] = shuffle_test(est, te, yte, seed=shuffle_seed)
    return reports, models


def table_rows(reports):
    rows = []
    for name, rep in reports.items():
        row = rep.row()
        row["label"] = SETTING_LABELS.get(name, name)
        rows.append(row)
    return rows


def write_table(reports, path):
    """``report_table2.csv``: one row per setting, four-decimal scores."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in table_rows(reports):
            w.writerow([row["setting"], row["label"]] + [f"{row[c]:.4f}" for c in TABLE_COLUMNS[2:]])


def format_report(reports, extra=None):
    """Plain-text rendering of the comparison table."""
    lines = [f"{'setting':<30}{'overall':>9}" + "".join(f"{h:>9}" for h in HEADS)]
    for row in table_rows(reports):
        lines.append(f"{row['label']:<30}{row['overall']:>9.4f}" + "".join(f"{row[h]:>9.4f}" for h in HEADS))
    if "full" in reports and "full_shuffled" in reports:
        drop = reports["full"].overall - reports["full_shuffled"].overall
        lines.append("")
        lines.append(f"shuffle degradation: {drop:.4f}")
    for name in ("no_intent", "no_segment", "no_temporal"):
        if "full" in reports and name in reports:
            lines.append(f"full minus {SETTING_LABELS[name]}: {reports['full'].overall - reports[name].overall:.4f}")
    for line in extra or ():
        lines.append(line)
    return "\n".join(lines) + "\n"


def expected_funnel(alignment, engagement):
    """Expected open/click/convert rates for alignment scores."""
    a = np.asarray(alignment, dtype=np.float64)
    p_open = expit(engagement["open"][0] + engagement["open"][1] * a)
    p_click = p_open * expit(engagement["click"][0] + engagement["click"][1] * a)
    p_conv = p_click * expit(engagement["convert"][0] + engagement["convert"][1] * a)
    return {"open": float(p_open.mean()), "click": float(p_click.mean()), "convert": float(p_conv.mean())}


def projected_engagement(months, static, config, customer_ids, predicted, seed=0):
    """Compare predicted, logged and random actions under the engagement model.

    ``months`` and ``static`` must carry the truth columns.  ``predicted``
    is an (n, 4) class matrix for the final month of ``customer_ids``.
    """
    from ..synthgen.generator import alignment_score

    k = config.k_months
    ids = np.asarray(customer_ids, dtype=np.int64)
    rows = months[months["customer_id"].isin(set(ids.tolist()))].sort_values(
        ["customer_id", "month_index"], kind="stable"
    )
    last = (rows["month_index"] == k).to_numpy()
    rng = np.random.default_rng(seed)
    out = {"logged": expected_funnel(alignment_score(rows, static, config)[last], config.engagement)}
    for name, codes in (
        ("predicted", np.asarray(predicted)),
        ("random", np.stack([rng.integers(0, HEAD_SIZES[h], len(ids)) for h in HEADS], axis=1)),
    ):
        alt = rows.copy()
        for j, h in enumerate(HEADS):
            col = alt[h].to_numpy(dtype=object)
            col[last] = np.asarray(HEAD_VOCABS[h], dtype=object)[codes[:, j]]
            alt[h] = col
        out[name] = expected_funnel(alignment_score(alt, static, config)[last], config.engagement)
    return out
