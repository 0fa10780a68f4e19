"""Generator configuration and the per-segment behavioral profiles."""

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..exceptions import ConfigurationError
from ..rules import N_INTENTS, N_SEGMENTS

# Rows: BROWSING, CONSIDERATION, HIGH_INTENT, DORMANT, CHURN_RISK.
_ENGAGED = [
    [0.904, 0.052, 0.012, 0.020, 0.012],
    [0.028, 0.896, 0.060, 0.008, 0.008],
    [0.020, 0.040, 0.924, 0.008, 0.008],
    [0.024, 0.012, 0.004, 0.924, 0.036],
    [0.024, 0.012, 0.004, 0.044, 0.916],
]
_REVOLVER = [
    [0.892, 0.052, 0.012, 0.016, 0.028],
    [0.028, 0.884, 0.060, 0.008, 0.020],
    [0.020, 0.036, 0.916, 0.004, 0.024],
    [0.024, 0.008, 0.004, 0.916, 0.048],
    [0.028, 0.012, 0.008, 0.036, 0.916],
]
_DIGITAL = [
    [0.900, 0.060, 0.020, 0.012, 0.008],
    [0.028, 0.888, 0.068, 0.008, 0.008],
    [0.024, 0.044, 0.916, 0.008, 0.008],
    [0.036, 0.020, 0.008, 0.912, 0.024],
    [0.036, 0.016, 0.008, 0.036, 0.904],
]
_DORMANT = [
    [0.892, 0.036, 0.008, 0.048, 0.016],
    [0.036, 0.880, 0.036, 0.028, 0.020],
    [0.024, 0.048, 0.892, 0.024, 0.012],
    [0.020, 0.008, 0.004, 0.932, 0.036],
    [0.020, 0.008, 0.004, 0.056, 0.912],
]

DEFAULT_TRANSITIONS = [_ENGAGED, _REVOLVER, _DIGITAL, _ENGAGED, _DORMANT]
DEFAULT_INITIAL = [
    [0.30, 0.20, 0.15, 0.20, 0.15],
    [0.28, 0.20, 0.15, 0.17, 0.20],
    [0.32, 0.22, 0.18, 0.15, 0.13],
    [0.30, 0.20, 0.15, 0.20, 0.15],
    [0.25, 0.13, 0.07, 0.35, 0.20],
]
DEFAULT_MIXTURE = [0.22, 0.22, 0.20, 0.18, 0.18]

# Per-intent multipliers on segment base rates.
DEFAULT_EMISSION_MULTIPLIERS = {
    "logins": [1.0, 1.5, 2.2, 0.25, 0.6],
    "sessions": [1.0, 1.8, 2.8, 0.2, 0.45],
    "page_views": [1.0, 2.2, 4.0, 0.15, 0.5],
    "card_spend": [1.0, 1.1, 1.3, 0.5, 0.7],
    "savings_balance": [1.0, 1.0, 1.0, 1.0, 0.8],
    "delinquency": [1.0, 1.0, 0.8, 1.5, 5.0],
}

# Indicator weights of the alignment score: product, channel, timing match,
# engaged intent (HIGH_INTENT or CONSIDERATION), level match.
DEFAULT_ALIGNMENT_WEIGHTS = [0.3, 0.2, 0.15, 0.2, 0.15]
DEFAULT_ENGAGEMENT = {
    "open": [-2.0, 3.0],
    "click": [-2.5, 3.0],
    "convert": [-3.0, 3.5],
}


@dataclass
class GeneratorConfig:
    """Everything the generator needs besides the static profiles below."""

    n_customers: int = 5000
    k_months: int = 6
    seed: int = 7
    segment_mixture: list = field(default_factory=lambda: list(DEFAULT_MIXTURE))
    transition_matrices: list = field(
        default_factory=lambda: [[list(r) for r in m] for m in DEFAULT_TRANSITIONS]
    )
    initial_distributions: list = field(
        default_factory=lambda: [list(r) for r in DEFAULT_INITIAL]
    )
    emission_multipliers: dict = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_EMISSION_MULTIPLIERS.items()}
    )
    alignment_weights: list = field(default_factory=lambda: list(DEFAULT_ALIGNMENT_WEIGHTS))
    engagement: dict = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_ENGAGEMENT.items()}
    )
    label_noise: float = 0.1
    dominant_window: int = 3
    dominant_lag: int = 1
    activity_noise: float = 0.2
    category_noise: float = 0.1
    focus_persistence: float = 0.5
    focus_share: float = 0.9

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_customers < 0:
            raise ConfigurationError("n_customers must be >= 0")
        if self.k_months < 1:
            raise ConfigurationError("k_months must be >= 1")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ConfigurationError("label_noise must lie in [0, 1]")
        for name in ("focus_persistence", "focus_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.dominant_window < 1:
            raise ConfigurationError("dominant_window must be >= 1")
        if self.dominant_lag < 0:
            raise ConfigurationError("dominant_lag must be >= 0")
        mix = np.asarray(self.segment_mixture, dtype=float)
        if mix.shape != (N_SEGMENTS,) or np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-12:
            raise ConfigurationError(
                f"segment_mixture must be {N_SEGMENTS} non-negative probabilities summing to 1"
            )
        mats = np.asarray(self.transition_matrices, dtype=float)
        if mats.shape != (N_SEGMENTS, N_INTENTS, N_INTENTS):
            raise ConfigurationError(
                f"transition_matrices must have shape ({N_SEGMENTS}, {N_INTENTS}, {N_INTENTS})"
            )
        for s in range(N_SEGMENTS):
            for r in range(N_INTENTS):
                row = mats[s, r]
                if np.any(row < 0) or abs(row.sum() - 1.0) > 1e-12:
                    raise ConfigurationError(
                        f"transition_matrices[{s}] row {r} is not stochastic (sum={float(row.sum()):.6g})"
                    )
        init = np.asarray(self.initial_distributions, dtype=float)
        if init.shape != (N_SEGMENTS, N_INTENTS):
            raise ConfigurationError("initial_distributions must be 5x5")
        for s in range(N_SEGMENTS):
            if np.any(init[s] < 0) or abs(init[s].sum() - 1.0) > 1e-12:
                raise ConfigurationError(f"initial_distributions row {s} is not stochastic")
        for key, vals in self.emission_multipliers.items():
            if len(vals) != N_INTENTS:
                raise ConfigurationError(f"emission_multipliers[{key!r}] needs {N_INTENTS} values")
        if len(self.alignment_weights) != 5:
            raise ConfigurationError("alignment_weights needs 5 indicator weights")
        for key in ("open", "click", "convert"):
            if len(self.engagement.get(key, ())) != 2:
                raise ConfigurationError(f"engagement[{key!r}] must be [intercept, slope]")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown generator config keys: {sorted(unknown)}")
        merged = asdict(cls())
        for key, value in data.items():
            if isinstance(merged.get(key), dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return cls(**merged)

    def to_dict(self):
        return asdict(self)


# Static attribute profiles, indexed by segment.
STATIC_PROFILES = {
    "age": ([58.0, 34.0, 27.0, 41.0, 52.0], [7.0, 6.0, 4.0, 5.0, 10.0]),
    "log_income": (
        np.log([85000.0, 52000.0, 64000.0, 120000.0, 34000.0]).tolist(),
        [0.25, 0.25, 0.25, 0.25, 0.3],
    ),
    "credit_score": ([775.0, 630.0, 705.0, 745.0, 600.0], [22.0, 30.0, 25.0, 22.0, 40.0]),
    "risk_logit": (
        np.log(np.array([0.12, 0.6, 0.3, 0.2, 0.55]) / (1 - np.array([0.12, 0.6, 0.3, 0.2, 0.55]))).tolist(),
        [0.35, 0.35, 0.35, 0.35, 0.35],
    ),
    "tenure_months": ([150.0, 50.0, 18.0, 90.0, 70.0], [35.0, 18.0, 9.0, 25.0, 30.0]),
    "dei_logit": (
        np.log(np.array([0.35, 0.6, 0.92, 0.5, 0.1]) / (1 - np.array([0.35, 0.6, 0.92, 0.5, 0.1]))).tolist(),
        [0.35, 0.35, 0.35, 0.35, 0.35],
    ),
}
REGION_WEIGHTS = [
    [0.30, 0.20, 0.20, 0.15, 0.15],
    [0.15, 0.30, 0.20, 0.20, 0.15],
    [0.20, 0.10, 0.15, 0.15, 0.40],
    [0.25, 0.20, 0.20, 0.15, 0.20],
    [0.15, 0.25, 0.30, 0.20, 0.10],
]
CHANNEL_PREF_WEIGHTS = [
    [0.60, 0.10, 0.15, 0.15],
    [0.20, 0.35, 0.35, 0.10],
    [0.05, 0.35, 0.05, 0.55],
    [0.55, 0.15, 0.10, 0.20],
    [0.35, 0.10, 0.45, 0.10],
]
# P(holds) for credit card, savings, personal loan, mortgage.
HOLDING_PROBS = [
    [0.50, 0.95, 0.08, 0.30],
    [0.97, 0.30, 0.55, 0.10],
    [0.75, 0.55, 0.20, 0.05],
    [0.55, 0.65, 0.15, 0.97],
    [0.40, 0.45, 0.20, 0.10],
]

# Monthly base rates per segment.
BASE_RATES = {
    "logins": [10.0, 11.0, 12.5, 10.0, 9.0],
    "sessions": [12.0, 13.0, 15.0, 12.0, 11.0],
    "page_views": [26.0, 28.0, 30.0, 28.0, 24.0],
    "card_spend": [800.0, 3000.0, 1500.0, 1800.0, 300.0],
    "savings_balance": [45000.0, 1500.0, 9000.0, 18000.0, 800.0],
    "loan_balance": [1500.0, 18000.0, 3000.0, 250000.0, 5000.0],
    "delinquency": [0.01, 0.06, 0.02, 0.015, 0.06],
}
# Category preference weights (card, loan, mortgage, savings, invest).
CATEGORY_AFFINITY = [
    [0.15, 0.05, 0.10, 0.45, 0.25],
    [0.45, 0.30, 0.05, 0.10, 0.10],
    [0.35, 0.10, 0.05, 0.15, 0.35],
    [0.10, 0.10, 0.50, 0.20, 0.10],
    [0.30, 0.20, 0.10, 0.30, 0.10],
]
AFFINITY_NOISE = 0.5
CUSTOMER_LEVEL_NOISE = 0.25
BALANCE_MONTH_NOISE = 0.05
