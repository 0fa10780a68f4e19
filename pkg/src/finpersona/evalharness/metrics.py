"""Classification metrics for the four action heads."""

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DataError


def confusion(preds, truth, n_classes):
    """Confusion counts with true classes on rows."""
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise DataError("preds and truth must be 1-D and of equal length")
    if preds.size == 0:
        raise DataError("cannot score an empty label vector")
    for name, v in (("preds", preds), ("truth", truth)):
        if v.min() < 0 or v.max() >= n_classes:
            raise DataError(f"{name} outside 0..{n_classes - 1}")
    return np.bincount(truth * n_classes + preds, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def per_class_f1(preds, truth, n_classes):
    """F1 per class; classes never predicted and never present score 0."""
    cm = confusion(preds, truth, n_classes).astype(np.float64)
    tp = np.diag(cm)
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    return np.divide(2.0 * tp, denom, out=np.zeros(n_classes), where=denom > 0)


def macro_f1(preds, truth, n_classes):
    return float(per_class_f1(preds, truth, n_classes).mean())


@dataclass
class HeadReport:
    head: str
    macro_f1: float
    accuracy: float
    per_class_f1: list = field(default_factory=list)


@dataclass
class RunReport:
    setting: str
    heads: dict

    @property
    def overall(self):
        return float(np.mean([r.macro_f1 for r in self.heads.values()]))

    def row(self):
        out = {"setting": self.setting}
        out.update({h: r.macro_f1 for h, r in self.heads.items()})
        out["overall"] = self.overall
        return out


def head_report(head, preds, truth, n_classes):
    f1 = per_class_f1(preds, truth, n_classes)
    acc = float(np.mean(np.asarray(preds) == np.asarray(truth)))
    return HeadReport(head, float(f1.mean()), acc, f1.tolist())
