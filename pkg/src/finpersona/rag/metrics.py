"""Generation quality metrics."""

from dataclasses import asdict, dataclass

from ..exceptions import DataError


@dataclass
class GenerationMetrics:
    n_requests: int
    response_rate: float
    json_validity: float
    citation_presence: float
    citation_correctness: float
    avg_message_length: float
    error_rate: float
    distinct_2: float

    def to_dict(self):
        return asdict(self)


def distinct_2(messages):
    """Distinct word bigrams over total bigrams, pooled across messages."""
    seen, total = set(), 0
    for m in messages:
        w = m.lower().split()
        pairs = list(zip(w, w[1:]))
        total += len(pairs)
        seen.update(pairs)
    return len(seen) / total if total else 0.0


def score_generation(outcomes):
    """Aggregate per-request outcomes.

    Each outcome is a dict with ``responded`` (bool) and ``message`` (a
    validated GeneratedMessage or None when parsing failed).  All rates use
    the number of requests as denominator.
    """
    n = len(outcomes)
    if n == 0:
        raise DataError("no requests to score")
    responded = sum(1 for o in outcomes if o["responded"])
    valid = [o["message"] for o in outcomes if o["message"] is not None]
    validity = len(valid) / n
    lengths = [m.word_count for m in valid]
    return GenerationMetrics(
        n_requests=n,
        response_rate=responded / n,
        json_validity=validity,
        citation_presence=sum(m.citations_present for m in valid) / n,
        citation_correctness=sum(m.citations_correct for m in valid) / n,
        avg_message_length=sum(lengths) / len(lengths) if lengths else 0.0,
        error_rate=1.0 - validity,
        distinct_2=distinct_2(m.message for m in valid),
    )
