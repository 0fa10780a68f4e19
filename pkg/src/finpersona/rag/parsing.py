"""JSON repair, parsing and citation checks for generated messages."""

import json
import re
from dataclasses import asdict, dataclass, field, replace

from ..exceptions import ParseError

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.S)
_TRAILING_COMMA = re.compile(r",\s*([}\]])")
_SMART = str.maketrans({"“": '"', "”": '"', "‘": "'", "’": "'"})


@dataclass
class GeneratedMessage:
    message: str
    citations: list
    product: str
    channel: str
    raw: str = ""
    valid_json: bool = True
    citations_present: bool = False
    citations_correct: bool = False
    word_count: int = field(default=0)

    def __post_init__(self):
        self.word_count = len(self.message.split())

    def payload(self):
        return {"message": self.message, "citations": list(self.citations), "product": self.product,
                "channel": self.channel}

    def to_json(self):
        return json.dumps(self.payload(), ensure_ascii=False)

    def to_record(self):
        return asdict(self)


def strip_fences(text):
    m = _FENCE.search(text)
    return m.group(1) if m else text


def first_object(text):
    """Substring spanning the first balanced ``{...}``; quotes are respected."""
    start = text.find("{")
    if start < 0:
        return text
    depth, in_str, esc = 0, False, False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return text[start:]


def repair(raw):
    """Fences, first object, trailing commas, smart quotes, in that order."""
    text = strip_fences(raw)
    text = first_object(text)
    text = _TRAILING_COMMA.sub(r"\1", text)
    return text.translate(_SMART)


def repair_and_parse(raw, prediction=None):
    """Parse a model reply into a :class:`GeneratedMessage`.

    Missing ``product`` / ``channel`` keys are taken from ``prediction``.
    Raises :class:`ParseError` when the repaired text still is not a valid
    reply object.
    """
    if not raw or not raw.strip():
        raise ParseError("empty model output")
    try:
        obj = json.loads(repair(raw))
    except json.JSONDecodeError as exc:
        raise ParseError(f"unparseable after repair: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError("reply is not a JSON object")
    msg = obj.get("message")
    cites = obj.get("citations")
    if not isinstance(msg, str) or not msg.strip():
        raise ParseError("'message' must be a non-empty string")
    if not isinstance(cites, list) or not all(isinstance(c, str) for c in cites):
        raise ParseError("'citations' must be an array of strings")
    prediction = prediction or {}
    product = obj.get("product", prediction.get("product", ""))
    channel = obj.get("channel", prediction.get("channel", ""))
    return GeneratedMessage(msg, cites, str(product), str(channel), raw=raw)


def validate_citations(msg, retrieved):
    """Set the citation flags against the retrieved chunk ids."""
    ids = {(c[0] if isinstance(c, tuple) else c).chunk_id for c in retrieved}
    present = len(msg.citations) > 0
    return replace(msg, citations_present=present, citations_correct=present and set(msg.citations) <= ids)
