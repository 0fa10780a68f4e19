"""Prompt template."""

from ..exceptions import DataError

MAX_MESSAGE_WORDS = 60
INSTRUCTIONS = (
    "You write one short marketing message for a bank customer.\n"
    "Respond with a single JSON object with keys message, citations, product, channel.\n"
    "Cite only the chunk ids listed under CONTEXT, in the citations array.\n"
    f"Keep the message to at most {MAX_MESSAGE_WORDS} words.\n"
    "Make no claims that are not supported by the provided context."
)


def assemble_prompt(query, chunks):
    """Instruction block, prediction block, then ``[chunk_id] text`` lines."""
    if not chunks:
        raise DataError("a prompt needs at least one chunk")
    lines = [INSTRUCTIONS, "", "PREDICTION"]
    for field in ("product", "channel", "timing", "level", "intent", "segment"):
        lines.append(f"{field}: {getattr(query, field)}")
    lines += ["", "CONTEXT"]
    for c in chunks:
        c = c[0] if isinstance(c, tuple) else c
        lines.append(f"[{c.chunk_id}] {c.text}")
    return "\n".join(lines) + "\n"


def parse_prompt(prompt):
    """Recover the prediction fields and ``(chunk_id, text)`` pairs from a prompt."""
    fields, context = {}, []
    section = None
    for line in prompt.splitlines():
        if line in ("PREDICTION", "CONTEXT"):
            section = line
        elif section == "PREDICTION" and ": " in line:
            k, v = line.split(": ", 1)
            fields[k] = v
        elif section == "CONTEXT" and line.startswith("[") and "] " in line:
            cid, text = line[1:].split("] ", 1)
            context.append((cid, text))
    return fields, context
