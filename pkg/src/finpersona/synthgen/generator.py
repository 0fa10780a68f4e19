"""Seeded synthetic customer generator.

Every customer owns an independent Philox substream keyed by
``(seed, customer_id)``; each generation stage uses its own counter block, so
adding customers or stages never perturbs earlier draws.
"""

import numpy as np
import pandas as pd
from scipy.special import expit

from ..exceptions import ConfigurationError, DataError
from ..rules import (
    CHANNELS,
    HEAD_SIZES,
    HEADS,
    HEAD_VOCABS,
    LEVELS,
    N_INTENTS,
    N_SEGMENTS,
    PAGE_CATEGORIES,
    PRODUCTS,
    REGIONS,
    TIMINGS,
    IntentState,
    rule_action,
)
from . import config as _cfg

STAGE_STATIC = 1
STAGE_TRAJECTORY = 2
STAGE_ACTIONS = 3
STAGE_ENGAGEMENT = 4
STAGE_SPLIT = 5

HOLDINGS = ("holds_credit_card", "holds_savings", "holds_personal_loan", "holds_mortgage")
STATIC_COLUMNS = (
    "customer_id",
    "age",
    "income",
    "credit_score",
    "risk_score",
    "tenure_months",
    "digital_engagement_index",
    "region",
    "channel_pref",
) + HOLDINGS
PAGE_VIEW_COLUMNS = tuple(f"page_views_{c}" for c in PAGE_CATEGORIES)
FEATURE_COLUMNS = (
    ("logins", "sessions")
    + PAGE_VIEW_COLUMNS
    + ("card_spend", "savings_balance", "loan_balance", "delinquency_flag")
)
ACTION_COLUMNS = HEADS
ENGAGEMENT_COLUMNS = ("sent", "opened", "clicked", "converted")
TEMPORAL_COLUMNS = ("customer_id", "month_index") + FEATURE_COLUMNS + ACTION_COLUMNS + ENGAGEMENT_COLUMNS
TRUTH_COLUMNS = ("customer_id", "month_index", "true_segment", "true_intent")


def customer_streams(seed, customer_ids, stage, n_uniform=0, n_normal=0):
    """Per-customer uniform and standard-normal blocks.

    Returns arrays of shape ``(n, n_uniform)`` and ``(n, n_normal)``.
    """
    ids = np.asarray(customer_ids, dtype=np.uint64)
    u = np.empty((len(ids), n_uniform))
    z = np.empty((len(ids), n_normal))
    key = np.zeros(2, dtype=np.uint64)
    counter = np.zeros(4, dtype=np.uint64)
    counter[3] = stage
    key[0] = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    for row, cid in enumerate(ids):
        key[1] = cid
        gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        if n_uniform:
            u[row] = gen.random(n_uniform)
        if n_normal:
            z[row] = gen.standard_normal(n_normal)
    return u, z


def _categorical(u, probs):
    """Inverse-CDF draw; ``probs`` is (n, m) or (m,)."""
    cdf = np.cumsum(np.atleast_2d(probs), axis=-1)
    cdf[..., -1] = 1.0
    return (u[..., None] >= cdf).sum(axis=-1).clip(max=cdf.shape[-1] - 1)


def generate_static(config):
    """Draw the customer-level table, including the validation-only segment."""
    n = config.n_customers
    ids = np.arange(1, n + 1, dtype=np.int64)
    u, z = customer_streams(config.seed, ids, STAGE_STATIC, n_uniform=7, n_normal=6)
    mix = np.asarray(config.segment_mixture)
    seg = _categorical(u[:, 0], mix).astype(np.int64)

    def draw(name, col):
        mean, sd = (np.asarray(v) for v in _cfg.STATIC_PROFILES[name])
        return mean[seg] + sd[seg] * z[:, col]

    age = np.clip(np.round(draw("age", 0)), 18, 85).astype(np.int64)
    income = np.round(np.exp(draw("log_income", 1)), 2)
    credit = np.clip(np.round(draw("credit_score", 2)), 300, 850).astype(np.int64)
    risk = np.round(expit(draw("risk_logit", 3)), 6)
    tenure = np.clip(np.round(draw("tenure_months", 4)), 0, None).astype(np.int64)
    dei = np.round(expit(draw("dei_logit", 5)), 6)
    region = _categorical(u[:, 1], np.asarray(_cfg.REGION_WEIGHTS)[seg])
    chan = _categorical(u[:, 2], np.asarray(_cfg.CHANNEL_PREF_WEIGHTS)[seg])
    hold = u[:, 3:7] < np.asarray(_cfg.HOLDING_PROBS)[seg]

    table = pd.DataFrame(
        {
            "customer_id": ids,
            "age": age,
            "income": income,
            "credit_score": credit,
            "risk_score": risk,
            "tenure_months": tenure,
            "digital_engagement_index": dei,
            "region": np.asarray(REGIONS, dtype=object)[region],
            "channel_pref": np.asarray(CHANNELS, dtype=object)[chan],
        }
    )
    for j, name in enumerate(HOLDINGS):
        table[name] = hold[:, j].astype(np.int64)
    table["true_segment"] = seg
    return table


def _round_count(x):
    return np.clip(np.round(x), 0, None).astype(np.int64)


def generate_trajectories(static, config):
    """Sample intent chains and behavioral emissions, one row per customer-month."""
    if len(static) == 0:
        raise DataError("static table is empty")
    seg = static["true_segment"].to_numpy(dtype=np.int64)
    if np.any((seg < 0) | (seg >= N_SEGMENTS)):
        bad = sorted(set(seg[(seg < 0) | (seg >= N_SEGMENTS)].tolist()))
        raise DataError(f"unknown segment id(s): {bad}")
    ids = static["customer_id"].to_numpy(dtype=np.int64)
    n, k = len(ids), config.k_months
    n_cat = len(PAGE_CATEGORIES)
    per_month = 3 + n_cat + 3
    u, z = customer_streams(
        config.seed, ids, STAGE_TRAJECTORY, n_uniform=4 * k, n_normal=n_cat + 3 + per_month * k
    )

    trans = np.asarray(config.transition_matrices)
    init = np.asarray(config.initial_distributions)
    intent = np.empty((n, k), dtype=np.int64)
    intent[:, 0] = _categorical(u[:, 0], init[seg])
    for t in range(1, k):
        intent[:, t] = _categorical(u[:, t], trans[seg, intent[:, t - 1]])

    mult = {key: np.asarray(v) for key, v in config.emission_multipliers.items()}
    base = {key: np.asarray(v)[seg][:, None] for key, v in _cfg.BASE_RATES.items()}

    aff = np.asarray(_cfg.CATEGORY_AFFINITY)[seg] * np.exp(_cfg.AFFINITY_NOISE * z[:, :n_cat])
    aff /= aff.sum(axis=1, keepdims=True)
    # each month concentrates browsing on a focus category that drifts
    focus = np.empty((n, k), dtype=np.int64)
    focus[:, 0] = _categorical(u[:, 2 * k], aff)
    for t in range(1, k):
        fresh = _categorical(u[:, 2 * k + t], aff)
        focus[:, t] = np.where(u[:, 3 * k + t] < config.focus_persistence, focus[:, t - 1], fresh)
    share = config.focus_share
    mix = (1.0 - share) * aff[:, None, :] + share * np.eye(n_cat)[focus]
    lvl = np.exp(_cfg.CUSTOMER_LEVEL_NOISE * z[:, n_cat : n_cat + 3])
    zm = z[:, n_cat + 3 :].reshape(n, k, per_month)

    act = config.activity_noise
    logins = base["logins"] * mult["logins"][intent] * np.exp(act * zm[:, :, 0])
    sessions = base["sessions"] * mult["sessions"][intent] * np.exp(act * zm[:, :, 1])
    views = (
        base["page_views"][:, :, None]
        * mult["page_views"][intent][:, :, None]
        * np.exp(act * zm[:, :, 2])[:, :, None]
        * mix
        * np.exp(config.category_noise * zm[:, :, 3 : 3 + n_cat])
    )
    off = 3 + n_cat
    spend = base["card_spend"] * lvl[:, [0]] * mult["card_spend"][intent] * np.exp(act * zm[:, :, off])
    bal_sd = _cfg.BALANCE_MONTH_NOISE
    savings = (
        base["savings_balance"]
        * lvl[:, [1]]
        * mult["savings_balance"][intent]
        * np.exp(bal_sd * zm[:, :, off + 1])
    )
    loan = base["loan_balance"] * lvl[:, [2]] * np.exp(bal_sd * zm[:, :, off + 2])
    p_delinq = np.clip(base["delinquency"] * mult["delinquency"][intent], 0.0, 1.0)
    delinq = u[:, k : 2 * k] < p_delinq

    months = pd.DataFrame(
        {
            "customer_id": np.repeat(ids, k),
            "month_index": np.tile(np.arange(1, k + 1), n),
            "logins": _round_count(logins).ravel(),
            "sessions": _round_count(sessions).ravel(),
        }
    )
    for j, col in enumerate(PAGE_VIEW_COLUMNS):
        months[col] = _round_count(views[:, :, j]).ravel()
    months["card_spend"] = np.round(spend, 2).ravel()
    months["savings_balance"] = np.round(savings, 2).ravel()
    months["loan_balance"] = np.round(loan, 2).ravel()
    months["delinquency_flag"] = delinq.astype(np.int64).ravel()
    months["true_intent"] = intent.ravel()
    return months


def dominant_category(months, window, lag=0):
    """Argmax of page views summed over a trailing window.

    For the row at month ``t`` the window covers months ``t-lag-window+1``
    through ``t-lag``, clipped to the customer's first month; when the
    whole window falls before the first month, the first month is used.
    Ties go to the lower category index.  Rows must be grouped by customer
    in month order.
    """
    views = months[list(PAGE_VIEW_COLUMNS)].to_numpy(dtype=np.float64)
    ids = months["customer_id"].to_numpy()
    csum = np.cumsum(views, axis=0)
    pos = np.arange(len(months))
    start = np.zeros(len(months), dtype=np.int64)
    if len(months):
        first = np.r_[True, ids[1:] != ids[:-1]]
        start = np.maximum.accumulate(np.where(first, pos, 0))
    hi = np.maximum(pos - lag, start)
    lo = np.maximum(hi - window + 1, start)
    prior = np.where((lo > 0)[:, None], csum[np.maximum(lo - 1, 0)], 0.0)
    return np.argmax(csum[hi] - prior, axis=1)


def rule_labels(months, segments, window, lag=0):
    """Rule-optimal class indices for every row of ``months``."""
    return rule_action(segments, months["true_intent"].to_numpy(), dominant_category(months, window, lag))


def _segments_for(months, static):
    seg_of = pd.Series(static["true_segment"].to_numpy(), index=static["customer_id"].to_numpy())
    return seg_of.reindex(months["customer_id"].to_numpy()).to_numpy(dtype=np.int64)


def assign_actions(months, static, config, label_noise=None):
    """Attach PersonalizationAction labels (rule table plus label noise)."""
    noise = config.label_noise if label_noise is None else label_noise
    months = months.copy()
    seg = _segments_for(months, static)
    optimal = rule_labels(months, seg, config.dominant_window, config.dominant_lag)
    k = config.k_months
    ids = months["customer_id"].to_numpy()[::k]
    u, _ = customer_streams(config.seed, ids, STAGE_ACTIONS, n_uniform=2 * len(HEADS) * k)
    u = u.reshape(len(ids) * k, len(HEADS), 2)
    for h, head in enumerate(HEADS):
        m = HEAD_SIZES[head]
        label = optimal[head].copy()
        flip = u[:, h, 0] < noise
        alt = (label + 1 + np.floor(u[:, h, 1] * (m - 1)).astype(np.int64)) % m
        label = np.where(flip, alt, label)
        months[head] = np.asarray(HEAD_VOCABS[head], dtype=object)[label]
    return months


def alignment_score(months, static, config):
    """Weighted sum of alignment indicators for every labeled row."""
    seg = _segments_for(months, static)
    optimal = rule_labels(months, seg, config.dominant_window, config.dominant_lag)
    intent = months["true_intent"].to_numpy()
    codes = {
        head: pd.Categorical(months[head], categories=HEAD_VOCABS[head]).codes for head in HEADS
    }
    indicators = np.stack(
        [
            codes["product"] == optimal["product"],
            codes["channel"] == optimal["channel"],
            codes["timing"] == optimal["timing"],
            np.isin(intent, [IntentState.HIGH_INTENT, IntentState.CONSIDERATION]),
            codes["level"] == optimal["level"],
        ],
        axis=1,
    ).astype(np.float64)
    return indicators @ np.asarray(config.alignment_weights, dtype=np.float64)


def simulate_engagement(months, static, config):
    """Sample the send/open/click/convert funnel from the alignment score."""
    months = months.copy()
    a = alignment_score(months, static, config)
    k = config.k_months
    ids = months["customer_id"].to_numpy()[::k]
    u, _ = customer_streams(config.seed, ids, STAGE_ENGAGEMENT, n_uniform=3 * k)
    u = u.reshape(len(ids) * k, 3)
    eng = config.engagement
    p_open = expit(eng["open"][0] + eng["open"][1] * a)
    p_click = expit(eng["click"][0] + eng["click"][1] * a)
    p_conv = expit(eng["convert"][0] + eng["convert"][1] * a)
    opened = u[:, 0] < p_open
    clicked = opened & (u[:, 1] < p_click)
    converted = clicked & (u[:, 2] < p_conv)
    months["sent"] = np.ones(len(months), dtype=np.int64)
    months["opened"] = opened.astype(np.int64)
    months["clicked"] = clicked.astype(np.int64)
    months["converted"] = converted.astype(np.int64)
    return months


def generate(config):
    """Run every generator stage; returns ``(static, months)`` with truth columns attached."""
    static = generate_static(config)
    if len(static) == 0:
        months = pd.DataFrame({c: pd.Series(dtype=object) for c in TEMPORAL_COLUMNS + ("true_intent",)})
        return static, months
    months = generate_trajectories(static, config)
    months = assign_actions(months, static, config)
    months = simulate_engagement(months, static, config)
    return static, months


def _largest_remainder(n, ratios):
    raw = np.asarray(ratios, dtype=float) * n
    sizes = np.floor(raw).astype(np.int64)
    short = n - sizes.sum()
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[:short]] += 1
    return sizes


def split_customers(static, ratios=(0.70, 0.15, 0.15), seed=0):
    """Customer-level train/val/test split.

    Returns
    -------
    dict
        ``train_ids``, ``val_ids`` and ``test_ids`` as sorted int lists.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigurationError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
    ids = np.sort(static["customer_id"].to_numpy(dtype=np.int64))
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64)
    counter = np.array([0, 0, 0, STAGE_SPLIT], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
    perm = ids[gen.permutation(len(ids))]
    n_train, n_val, _ = _largest_remainder(len(ids), ratios)
    return {
        "train_ids": sorted(perm[:n_train].tolist()),
        "val_ids": sorted(perm[n_train : n_train + n_val].tolist()),
        "test_ids": sorted(perm[n_train + n_val :].tolist()),
    }
