"""Training, prediction and persistence for the personalization network."""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..evalharness.metrics import macro_f1
from ..exceptions import ConfigurationError, DataError, DimensionError
from ..rules import HEAD_SIZES, HEAD_VOCABS, HEADS
from .data import PersonalizationBatch
from .network import ModelConfig, forward, init_params, loss_and_grads, multitask_loss
from .optim import AdamW, clip_global_norm


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    clip_norm: float = 1.0
    batch_size: int = 128
    max_epochs: int = 200
    patience: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigurationError("patience must be >= 1")
        if not self.clip_norm > 0:
            raise ConfigurationError("clip_norm must be > 0")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigurationError("batch_size and max_epochs must be >= 1")
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigurationError("lr and weight_decay must be non-negative")


@dataclass
class PersonalizerModel:
    params: dict
    config: ModelConfig
    scaler: dict = field(default_factory=dict)

    def validate(self):
        for name, v in self.params.items():
            if not np.all(np.isfinite(v)):
                raise DataError(f"tensor {name} has non-finite entries")
        for name in ("seg_emb", "intent_emb"):
            if self.params[name].shape[0] != 5:
                raise DimensionError(f"{name} must have 5 rows")
        return self

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "scaler": {k: np.asarray(v).tolist() for k, v in self.scaler.items()},
            "tensors": {
                k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, d):
        params = {
            k: np.asarray(t["values"], dtype=np.float64).reshape(t["shape"]) for k, t in d["tensors"].items()
        }
        scaler = {k: np.asarray(v, dtype=np.float64) for k, v in d.get("scaler", {}).items()}
        return cls(params, ModelConfig(**d["config"]), scaler).validate()

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class PredictionRecord:
    customer_id: int
    month_index: int
    logits: dict
    action: dict
    attention_weights: np.ndarray


def _labels_dict(Y):
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[1] != len(HEADS):
        raise DimensionError(f"labels must have shape (n, {len(HEADS)})")
    return {h: Y[:, j] for j, h in enumerate(HEADS)}


def _batches(n, size, rng):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    return [order[i : i + size] for i in range(0, n, size)]


def predict_logits(model, batch, chunk=1024):
    """Logits per head and attention weights, evaluated in chunks."""
    n = len(batch)
    logits = {h: [] for h in HEADS}
    attn = []
    for idx in _batches(n, chunk, None):
        out, _ = forward(model.params, model.config, batch.take(idx))
        for h in HEADS:
            logits[h].append(out["logits"][h])
        attn.append(out["attention"])
    if n == 0:
        raise DataError("empty batch")
    return {h: np.concatenate(v) for h, v in logits.items()}, np.concatenate(attn)


def argmax_labels(logits):
    """Column per head; ``np.argmax`` resolves ties to the lowest index."""
    return np.stack([np.argmax(logits[h], axis=1) for h in HEADS], axis=1)


def overall_macro_f1(preds, Y):
    return float(np.mean([macro_f1(preds[:, j], Y[:, j], HEAD_SIZES[h]) for j, h in enumerate(HEADS)]))


def train(train_batch, train_labels, val_batch, val_labels, mcfg, tcfg):
    """Fit the network with AdamW and early stopping on validation macro-F1.

    Inputs must already be standardized.  Returns the best-epoch model and
    a history list of ``{epoch, train_loss, val_macro_f1}`` dicts.
    """
    if len(train_batch) == 0:
        raise DataError("training split is empty")
    Ytr = np.asarray(train_labels)
    Yva = np.asarray(val_labels)
    labels = _labels_dict(Ytr)
    _labels_dict(Yva)
    params = init_params(mcfg)
    opt = AdamW(params, lr=tcfg.lr, weight_decay=tcfg.weight_decay)
    best = (-np.inf, 0, {k: v.copy() for k, v in params.items()})
    history = []
    for epoch in range(1, tcfg.max_epochs + 1):
        rng = np.random.default_rng([tcfg.seed, epoch])
        losses = []
        for idx in _batches(len(train_batch), tcfg.batch_size, rng):
            lab = {h: v[idx] for h, v in labels.items()}
            loss, grads = loss_and_grads(params, mcfg, train_batch.take(idx), lab, train=True, rng=rng)
            clip_global_norm(grads, tcfg.clip_norm)
            opt.step(params, grads)
            losses.append(loss * len(idx))
        model = PersonalizerModel(params, mcfg)
        val = overall_macro_f1(argmax_labels(predict_logits(model, val_batch)[0]), Yva)
        history.append({"epoch": epoch, "train_loss": sum(losses) / len(train_batch), "val_macro_f1": val})
        if val > best[0]:
            best = (val, epoch, {k: v.copy() for k, v in params.items()})
        elif epoch - best[1] >= tcfg.patience:
            break
    return PersonalizerModel(best[2], mcfg).validate(), history


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_macro_f1"])
        w.writeheader()
        for row in history:
            w.writerow({"epoch": row["epoch"], "train_loss": f"{row['train_loss']:.10f}",
                        "val_macro_f1": f"{row['val_macro_f1']:.10f}"})


def _fit_scaler(batch):
    t = batch.temporal.reshape(-1, batch.temporal.shape[-1])
    t = t[~np.isnan(t).any(axis=1)]
    if len(t) == 0:
        raise DataError("no observed months to standardize")
    sd_t = t.std(axis=0)
    sd_s = batch.static.std(axis=0)
    return {
        "temporal_mean": t.mean(axis=0),
        "temporal_std": np.where(sd_t > 0, sd_t, 1.0),
        "static_mean": batch.static.mean(axis=0),
        "static_std": np.where(sd_s > 0, sd_s, 1.0),
    }


def standardize(batch, scaler):
    """Z-score with training statistics and append the ``observed`` flag.

    Unobserved (NaN) months become all-zero rows with flag 0.
    """
    z = (batch.temporal - scaler["temporal_mean"]) / scaler["temporal_std"]
    observed = ~np.isnan(z).any(axis=2, keepdims=True)
    z = np.concatenate([np.where(observed, z, 0.0), observed.astype(np.float64)], axis=2)
    return PersonalizationBatch(
        batch.customer_ids,
        z,
        (batch.static - scaler["static_mean"]) / scaler["static_std"],
        batch.segment,
        batch.intent,
        batch.month_index,
        batch.intent_months,
    )


class TemporalPersonalizer(ClassifierMixin, BaseEstimator):
    """Multi-output classifier over (product, channel, timing, level).

    ``fit`` takes a :class:`PersonalizationBatch` of raw features and an
    (n, 4) label matrix; standardization statistics come from the fitted
    batch.  ``eval_set=(batch, labels)`` drives early stopping; without it
    the training data is used.
    """

    def __init__(self, d_proj=32, d_hidden=32, d_attn=32, d_embed=8, d_trunk=64, dropout=0.1,
                 use_intent=True, use_segment=True, use_temporal=True, lr=1e-3, weight_decay=1e-4,
                 clip_norm=1.0, batch_size=128, max_epochs=200, patience=12, seed=0):
        self.d_proj = d_proj
        self.d_hidden = d_hidden
        self.d_attn = d_attn
        self.d_embed = d_embed
        self.d_trunk = d_trunk
        self.dropout = dropout
        self.use_intent = use_intent
        self.use_segment = use_segment
        self.use_temporal = use_temporal
        self.lr = lr
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _configs(self, batch):
        mcfg = ModelConfig(
            f_features=batch.temporal.shape[2] + 1, s_features=batch.static.shape[1],
            k_months=batch.temporal.shape[1], d_proj=self.d_proj, d_hidden=self.d_hidden,
            d_attn=self.d_attn, d_embed=self.d_embed, d_trunk=self.d_trunk, dropout=self.dropout,
            use_intent=self.use_intent, use_segment=self.use_segment,
            use_temporal=self.use_temporal, seed=self.seed,
        )
        tcfg = TrainConfig(lr=self.lr, weight_decay=self.weight_decay, clip_norm=self.clip_norm,
                           batch_size=self.batch_size, max_epochs=self.max_epochs,
                           patience=self.patience, seed=self.seed)
        return mcfg, tcfg

    def fit(self, X, y, eval_set=None):
        scaler = _fit_scaler(X)
        mcfg, tcfg = self._configs(X)
        Xv, yv = eval_set if eval_set is not None else (X, y)
        model, self.history_ = train(standardize(X, scaler), y, standardize(Xv, scaler), yv, mcfg, tcfg)
        model.scaler = scaler
        self.model_ = model
        self.best_epoch_ = max(self.history_, key=lambda r: (r["val_macro_f1"], -r["epoch"]))["epoch"]
        self.classes_ = [np.arange(HEAD_SIZES[h]) for h in HEADS]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise DataError("estimator is not fitted")

    def decision_function(self, X):
        self._check_fitted()
        return predict_logits(self.model_, standardize(X, self.model_.scaler))

    def predict(self, X):
        return argmax_labels(self.decision_function(X)[0])

    def predict_proba(self, X):
        logits, _ = self.decision_function(X)
        out = {}
        for h in HEADS:
            z = logits[h] - logits[h].max(axis=1, keepdims=True)
            e = np.exp(z)
            out[h] = e / e.sum(axis=1, keepdims=True)
        return out

    def score(self, X, y):
        return overall_macro_f1(self.predict(X), np.asarray(y))

    def predict_records(self, X):
        logits, attn = self.decision_function(X)
        preds = argmax_labels(logits)
        return [
            PredictionRecord(
                customer_id=int(cid), month_index=int(X.month_index[i]),
                logits={h: logits[h][i].copy() for h in HEADS},
                action={h: HEAD_VOCABS[h][preds[i, j]] for j, h in enumerate(HEADS)},
                attention_weights=attn[i].copy(),
            )
            for i, cid in enumerate(X.customer_ids)
        ]

    def loss(self, X, y):
        self._check_fitted()
        logits, _ = self.decision_function(X)
        return multitask_loss(logits, _labels_dict(y))

    @classmethod
    def from_model(cls, model):
        c = model.config
        est = cls(d_proj=c.d_proj, d_hidden=c.d_hidden, d_attn=c.d_attn, d_embed=c.d_embed,
                  d_trunk=c.d_trunk, dropout=c.dropout, use_intent=c.use_intent,
                  use_segment=c.use_segment, use_temporal=c.use_temporal, seed=c.seed)
        est.model_ = model
        est.classes_ = [np.arange(HEAD_SIZES[h]) for h in HEADS]
        return est
