"""Chunk store, cosine retrieval and query construction."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError
from ..rules import CHANNELS, LEVELS, PRODUCTS, TIMINGS, IntentState
from .embed import HashingEmbedder

# expansion terms appended to the query for each product
PRODUCT_SYNONYMS = {
    "credit_card": "credit card rewards purchases cashback card",
    "savings": "savings account deposit interest balance",
    "personal_loan": "personal loan borrowing fixed repayment",
    "mortgage": "mortgage home loan property rate refinance",
    "investment": "investment portfolio funds invest growth",
    "cd": "certificate of deposit cd term fixed rate",
}


@dataclass(frozen=True)
class RagQuery:
    product: str
    channel: str
    timing: str
    level: str
    intent: str
    segment: int

    def __post_init__(self):
        for name, vocab in (("product", PRODUCTS), ("channel", CHANNELS), ("timing", TIMINGS), ("level", LEVELS)):
            if getattr(self, name) not in vocab:
                raise DataError(f"{name} {getattr(self, name)!r} is not in {vocab}")
        if self.intent not in IntentState.__members__:
            raise DataError(f"unknown intent {self.intent!r}")
        if not 0 <= int(self.segment) < 5:
            raise DataError("segment must lie in 0..4")

    def template(self):
        return (
            f"product:{self.product} channel:{self.channel} timing:{self.timing} "
            f"level:{self.level} intent:{self.intent} segment:{self.segment}"
        )

    def text(self):
        return f"{self.template()} {PRODUCT_SYNONYMS[self.product]}"


def build_query(action, segment, intent):
    """``RagQuery`` from an action mapping (product, channel, timing, level)."""
    if not isinstance(intent, str):
        intent = IntentState(int(intent)).name
    q = RagQuery(action["product"], action["channel"], action["timing"], action["level"], intent, int(segment))
    return q, q.text()


class ChunkStore:
    """Embedded chunks with exhaustive cosine ranking."""

    def __init__(self, chunks, embedder=None):
        self.chunks = list(chunks)
        if not self.chunks:
            raise DataError("chunk store is empty")
        ids = [c.chunk_id for c in self.chunks]
        if len(set(ids)) != len(ids):
            raise DataError("chunk ids must be unique")
        self.embedder = embedder or HashingEmbedder().fit(c.text for c in self.chunks)
        self.matrix = self.embedder.embed_many([c.text for c in self.chunks])

    def __len__(self):
        return len(self.chunks)

    def scores(self, query_text):
        return self.matrix @ self.embedder.embed(query_text)

    def retrieve(self, query_text, k=4):
        """Top ``k`` ``(chunk, score)`` pairs, ties by chunk id.

        At least one compliance chunk is always returned: when none made
        the cut, the best-scoring one takes the last slot.
        """
        if k < 1:
            raise DataError("k must be >= 1")
        s = self.scores(query_text)
        ids = np.array([c.chunk_id for c in self.chunks])
        order = np.lexsort((ids, -s))
        top = list(order[:k])
        kinds = [self.chunks[i].doc_kind for i in top]
        if "compliance_constraint" not in kinds:
            comp = [i for i in order if self.chunks[i].doc_kind == "compliance_constraint"]
            if comp:
                top[-1] = comp[0]
        return [(self.chunks[i], float(s[i])) for i in top]


def retrieve(store, query_text, k=4):
    return store.retrieve(query_text, k)
