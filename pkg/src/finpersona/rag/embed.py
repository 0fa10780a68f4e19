"""Deterministic hashed TF-IDF text embedding."""

import hashlib
import math
import re
from collections import Counter

import numpy as np

from ..exceptions import DataError

DIM = 1024
_TOKEN = re.compile(r"[a-z0-9_]+")


def tokenize(text):
    return _TOKEN.findall(text.lower())


def _slot(token, dim):
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    return h % dim, 1.0 if (h >> 63) & 1 == 0 else -1.0


class HashingEmbedder:
    """Signed feature hashing of term frequencies with IDF weights.

    IDF comes from :meth:`fit` over the chunk texts; tokens never seen get
    the largest IDF.  Unfitted, every token weighs 1.
    """

    def __init__(self, dim=DIM):
        self.dim = dim
        self.idf_ = {}
        self.default_idf_ = 1.0

    def fit(self, texts):
        df = Counter()
        texts = list(texts)
        for t in texts:
            df.update(set(tokenize(t)))
        n = len(texts)
        self.idf_ = {tok: math.log((1 + n) / (1 + c)) + 1.0 for tok, c in df.items()}
        self.default_idf_ = math.log(1 + n) + 1.0
        return self

    def embed(self, text):
        tokens = tokenize(text) if isinstance(text, str) else []
        if not tokens:
            raise DataError("cannot embed empty text")
        v = np.zeros(self.dim)
        for tok, tf in sorted(Counter(tokens).items()):
            j, sign = _slot(tok, self.dim)
            v[j] += sign * tf * self.idf_.get(tok, self.default_idf_)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise DataError("embedding collapsed to zero")
        return v / norm

    def embed_many(self, texts):
        return np.stack([self.embed(t) for t in texts])


def embed(text, embedder=None):
    return (embedder or HashingEmbedder()).embed(text)
