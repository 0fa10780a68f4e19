"""End-to-end message generation over a batch of predictions."""

import json
from pathlib import Path

from ..exceptions import GenerationError, ParseError
from .generation import ClientConfig, generate_many
from .parsing import repair_and_parse, validate_citations
from .prompt import assemble_prompt
from .retrieval import build_query
from .metrics import score_generation

TABLE3_LABELS = {
    "response_rate": "Response Rate",
    "json_validity": "JSON Validity (post-repair)",
    "citation_presence": "Citation Presence",
    "citation_correctness": "Citation Correctness",
    "avg_message_length": "Average Message Length (words)",
    "error_rate": "Error Rate",
    "distinct_2": "Lexical Diversity (distinct-2)",
}


def run_generation(requests, store, config=None, k=4):
    """Retrieve, prompt, generate, repair and validate for every request.

    ``requests`` holds dicts with ``customer_id``, ``action``, ``segment`` and
    ``intent``.  Returns ``(outcomes, metrics)``; each outcome carries the
    request id, the retrieved chunk ids and the validated message (or None).
    """
    config = config or ClientConfig()
    prompts, retrieved = [], []
    for req in requests:
        query, text = build_query(req["action"], req["segment"], req["intent"])
        hits = store.retrieve(text, k)
        retrieved.append(hits)
        prompts.append(assemble_prompt(query, hits))
    raws = generate_many(prompts, config)
    outcomes = []
    for req, hits, raw in zip(requests, retrieved, raws):
        out = {"customer_id": int(req["customer_id"]), "retrieved": [c.chunk_id for c, _ in hits],
               "responded": not isinstance(raw, GenerationError), "message": None}
        if out["responded"]:
            try:
                msg = repair_and_parse(raw, req["action"])
                out["message"] = validate_citations(msg, hits)
            except ParseError:
                pass
        outcomes.append(out)
    return outcomes, score_generation(outcomes)


def shipped(outcomes):
    """Messages that parsed and cite only retrieved chunks."""
    return [o for o in outcomes if o["message"] is not None and o["message"].citations_correct]


def write_outputs(outcomes, metrics, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "messages.jsonl", "w", encoding="utf-8") as fh:
        for o in shipped(outcomes):
            rec = {"customer_id": o["customer_id"], **o["message"].to_record()}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    m = metrics.to_dict()
    table = [{"metric": TABLE3_LABELS[key], "value": m[key]} for key in TABLE3_LABELS]
    with open(out_dir / "rag_metrics.json", "w", encoding="utf-8") as fh:
        json.dump({"n_requests": m["n_requests"], "metrics": m, "table": table}, fh, indent=2)
    return out_dir / "messages.jsonl", out_dir / "rag_metrics.json"
