from .config import GeneratorConfig
from .generator import (
    ACTION_COLUMNS,
    ENGAGEMENT_COLUMNS,
    FEATURE_COLUMNS,
    PAGE_VIEW_COLUMNS,
    STATIC_COLUMNS,
    TEMPORAL_COLUMNS,
    TRUTH_COLUMNS,
    alignment_score,
    assign_actions,
    customer_streams,
    dominant_category,
    generate,
    generate_static,
    generate_trajectories,
    rule_labels,
    simulate_engagement,
    split_customers,
)
from .io import read_dataset, write_dataset

__all__ = [
    "GeneratorConfig",
    "ACTION_COLUMNS",
    "ENGAGEMENT_COLUMNS",
    "FEATURE_COLUMNS",
    "PAGE_VIEW_COLUMNS",
    "STATIC_COLUMNS",
    "TEMPORAL_COLUMNS",
    "TRUTH_COLUMNS",
    "alignment_score",
    "assign_actions",
    "customer_streams",
    "dominant_category",
    "generate",
    "generate_static",
    "generate_trajectories",
    "rule_labels",
    "simulate_engagement",
    "split_customers",
    "read_dataset",
    "write_dataset",
]
