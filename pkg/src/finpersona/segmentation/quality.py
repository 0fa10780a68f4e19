"""Agreement between discovered segments and the validation labels."""

import numpy as np
from sklearn.metrics import adjusted_rand_score

from ..exceptions import DataError


def segment_quality(labels, truth):
    """ARI over non-noise points plus summary counts.

    ``ari`` is ``None`` when every point is noise.
    """
    labels = np.asarray(getattr(labels, "labels", labels))
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise DataError(f"length mismatch: {labels.shape} vs {truth.shape}")
    mask = labels >= 0
    n_clusters = int(len(np.unique(labels[mask])))
    noise = float(1.0 - mask.mean()) if len(labels) else 0.0
    ari = float(adjusted_rand_score(truth[mask], labels[mask])) if mask.any() else None
    return {"ari": ari, "n_clusters": n_clusters, "noise_fraction": noise}
