"""Temporal multi-task personalization network."""

from .data import (
    PersonalizationBatch,
    build_batch,
    final_month_labels,
    month_labels,
    static_block,
    temporal_block,
)
from .network import ModelConfig, attention_pool, backward, forward, init_params, loss_and_grads, multitask_loss
from .model import (
    PersonalizerModel,
    PredictionRecord,
    TemporalPersonalizer,
    TrainConfig,
    argmax_labels,
    overall_macro_f1,
    predict_logits,
    standardize,
    train,
    write_history,
)
from .optim import AdamW, clip_global_norm

__all__ = [
    "AdamW",
    "ModelConfig",
    "PersonalizationBatch",
    "PersonalizerModel",
    "PredictionRecord",
    "TemporalPersonalizer",
    "TrainConfig",
    "argmax_labels",
    "attention_pool",
    "backward",
    "build_batch",
    "clip_global_norm",
    "final_month_labels",
    "forward",
    "init_params",
    "loss_and_grads",
    "month_labels",
    "multitask_loss",
    "overall_macro_f1",
    "predict_logits",
    "standardize",
    "static_block",
    "temporal_block",
    "train",
    "write_history",
]
