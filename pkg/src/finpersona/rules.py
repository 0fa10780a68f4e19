"""Closed vocabularies and the deterministic personalization rule table.

The rule table maps (segment, intent, dominant page-view category) to the
optimal action.  ``docs/RULES.md`` is rendered from these constants by
:func:`render_rule_table`.
"""

from enum import IntEnum

import numpy as np


class IntentState(IntEnum):
    BROWSING = 0
    CONSIDERATION = 1
    HIGH_INTENT = 2
    DORMANT = 3
    CHURN_RISK = 4


SEGMENTS = (
    "rate_sensitive_saver",
    "credit_revolver",
    "digital_first",
    "mortgage_focused",
    "dormant_low_engagement",
)
INTENTS = tuple(s.name for s in IntentState)
PRODUCTS = ("credit_card", "savings", "personal_loan", "mortgage", "investment", "cd")
CHANNELS = ("email", "push", "sms", "in_app")
TIMINGS = ("early_month", "mid_month", "late_month")
LEVELS = ("low", "medium", "high")
PAGE_CATEGORIES = ("card", "loan", "mortgage", "savings", "invest")
REGIONS = ("northeast", "southeast", "midwest", "southwest", "west")

HEADS = ("product", "channel", "timing", "level")
HEAD_VOCABS = {
    "product": PRODUCTS,
    "channel": CHANNELS,
    "timing": TIMINGS,
    "level": LEVELS,
}
HEAD_SIZES = {head: len(vocab) for head, vocab in HEAD_VOCABS.items()}

N_SEGMENTS = len(SEGMENTS)
N_INTENTS = len(IntentState)

_P = {name: i for i, name in enumerate(PRODUCTS)}
_C = {name: i for i, name in enumerate(CHANNELS)}
_T = {name: i for i, name in enumerate(TIMINGS)}
_L = {name: i for i, name in enumerate(LEVELS)}

# product[intent, category]; columns follow PAGE_CATEGORIES
PRODUCT_TABLE = np.array(
    [
        [_P["credit_card"], _P["personal_loan"], _P["mortgage"], _P["savings"], _P["investment"]],
        [_P["credit_card"], _P["personal_loan"], _P["mortgage"], _P["cd"], _P["investment"]],
        [_P["credit_card"], _P["personal_loan"], _P["mortgage"], _P["savings"], _P["investment"]],
        [_P["credit_card"], _P["personal_loan"], _P["savings"], _P["cd"], _P["investment"]],
        [_P["credit_card"], _P["personal_loan"], _P["mortgage"], _P["cd"], _P["savings"]],
    ]
)
# savers browsing savings pages are steered to CDs instead of plain savings
SAVER_SAVINGS_OVERRIDE = _P["cd"]

# timing[intent, category]
TIMING_TABLE = np.array(
    [
        [_T["late_month"], _T["mid_month"], _T["early_month"], _T["late_month"], _T["mid_month"]],
        [_T["early_month"], _T["mid_month"], _T["late_month"], _T["mid_month"], _T["early_month"]],
        [_T["early_month"], _T["late_month"], _T["mid_month"], _T["early_month"], _T["late_month"]],
        [_T["mid_month"], _T["late_month"], _T["early_month"], _T["late_month"], _T["mid_month"]],
        [_T["mid_month"], _T["early_month"], _T["late_month"], _T["mid_month"], _T["early_month"]],
    ]
)

# channel[segment, intent]; columns follow IntentState order
CHANNEL_TABLE = np.array(
    [
        [_C["email"], _C["email"], _C["push"], _C["email"], _C["sms"]],
        [_C["sms"], _C["push"], _C["push"], _C["sms"], _C["email"]],
        [_C["in_app"], _C["in_app"], _C["push"], _C["push"], _C["in_app"]],
        [_C["email"], _C["in_app"], _C["email"], _C["sms"], _C["email"]],
        [_C["sms"], _C["in_app"], _C["push"], _C["email"], _C["sms"]],
    ]
)

# level[segment, intent]
LEVEL_TABLE = np.array(
    [
        [_L["low"], _L["medium"], _L["high"], _L["low"], _L["medium"]],
        [_L["medium"], _L["medium"], _L["high"], _L["low"], _L["high"]],
        [_L["low"], _L["high"], _L["high"], _L["low"], _L["medium"]],
        [_L["medium"], _L["high"], _L["high"], _L["low"], _L["high"]],
        [_L["low"], _L["medium"], _L["medium"], _L["low"], _L["low"]],
    ]
)


def rule_action(segment, intent, category):
    """Vectorized rule lookup.

    Parameters
    ----------
    segment, intent, category : array-like of int
        Broadcastable integer codes.

    Returns
    -------
    dict of ndarray
        Optimal class index per head.
    """
    segment = np.asarray(segment, dtype=np.int64)
    intent = np.asarray(intent, dtype=np.int64)
    category = np.asarray(category, dtype=np.int64)
    product = PRODUCT_TABLE[intent, category]
    saver_override = (
        (segment == 0)
        & (category == PAGE_CATEGORIES.index("savings"))
        & (intent <= IntentState.HIGH_INTENT)
    )
    product = np.where(saver_override, SAVER_SAVINGS_OVERRIDE, product)
    return {
        "product": product,
        "channel": CHANNEL_TABLE[segment, intent],
        "timing": TIMING_TABLE[intent, category],
        "level": LEVEL_TABLE[segment, intent],
    }


def render_rule_table():
    """Markdown rendering of every rule table, used for the repo docs."""
    lines = ["# Personalization rule table", ""]
    lines.append(
        "Optimal action = f(segment, intent, dominant page-view category). "
        "The dominant category is the argmax of page views summed over a "
        "trailing window that stops before the labeled month (by default the "
        "three preceding months, clipped at month 1; month 1 uses itself). "
        "Ties go to the lower category index."
    )
    lines.append("")

    def table(title, rows, row_names, col_names, vocab):
        out = [f"## {title}", ""]
        out.append("| | " + " | ".join(col_names) + " |")
        out.append("|---" * (len(col_names) + 1) + "|")
        for name, row in zip(row_names, rows):
            out.append(f"| {name} | " + " | ".join(vocab[v] for v in row) + " |")
        out.append("")
        return out

    lines += table("Product (intent x category)", PRODUCT_TABLE, INTENTS, PAGE_CATEGORIES, PRODUCTS)
    lines.append(
        "Override: rate_sensitive_saver with savings-dominant views under "
        "BROWSING, CONSIDERATION or HIGH_INTENT gets `cd`."
    )
    lines.append("")
    lines += table("Timing (intent x category)", TIMING_TABLE, INTENTS, PAGE_CATEGORIES, TIMINGS)
    lines += table("Channel (segment x intent)", CHANNEL_TABLE, SEGMENTS, INTENTS, CHANNELS)
    lines += table("Level (segment x intent)", LEVEL_TABLE, SEGMENTS, INTENTS, LEVELS)
    return "\n".join(lines)
