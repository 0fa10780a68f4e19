"""Knowledge corpus ingestion and chunking."""

import re
from dataclasses import dataclass
from pathlib import Path

from ..exceptions import IngestionError

DOC_KINDS = ("product_description", "compliance_constraint", "messaging_guideline")
MAX_CHUNK_WORDS = 120
_HEADER = re.compile(r"^(id|kind):\s*(\S.*?)\s*$")


@dataclass(frozen=True)
class KnowledgeChunk:
    chunk_id: str
    doc_id: str
    text: str
    doc_kind: str


def _split_long(words, limit):
    return [" ".join(words[i : i + limit]) for i in range(0, len(words), limit)]


def chunk_text(text, limit=MAX_CHUNK_WORDS):
    """Greedily pack blank-line separated paragraphs into chunks of at most ``limit`` words.

    A paragraph that alone exceeds the limit is cut into ``limit``-word pieces.
    """
    chunks, current, n = [], [], 0
    for para in re.split(r"\n\s*\n", text.strip()):
        words = para.split()
        if not words:
            continue
        pieces = _split_long(words, limit) if len(words) > limit else [" ".join(words)]
        for piece in pieces:
            w = len(piece.split())
            if current and n + w > limit:
                chunks.append(" ".join(current))
                current, n = [], 0
            current.append(piece)
            n += w
    if current:
        chunks.append(" ".join(current))
    return chunks


def parse_document(path):
    """Read the ``id:`` / ``kind:`` header lines and the body of one document."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = {}
    i = 0
    while i < len(lines) and len(header) < 2:
        m = _HEADER.match(lines[i].strip())
        if not m:
            break
        header[m.group(1)] = m.group(2)
        i += 1
    if set(header) != {"id", "kind"}:
        raise IngestionError(f"{path}: missing 'id:' and 'kind:' header lines")
    if header["kind"] not in DOC_KINDS:
        raise IngestionError(f"{path}: unknown kind {header['kind']!r}")
    return header["id"], header["kind"], "\n".join(lines[i:])


def ingest_corpus(directory, pattern="*.txt"):
    """Chunk every document under ``directory`` (sorted by file name).

    Chunk ids are ``DOC-<doc_id>-<n>`` with ``n`` counting from 1 within
    each document.
    """
    files = sorted(Path(directory).glob(pattern))
    if not files:
        raise IngestionError(f"no documents found in {directory}")
    seen = {}
    chunks = []
    for path in files:
        doc_id, kind, body = parse_document(path)
        if doc_id in seen:
            raise IngestionError(f"duplicate document id {doc_id!r} in {seen[doc_id].name} and {path.name}")
        seen[doc_id] = path
        pieces = chunk_text(body)
        if not pieces:
            raise IngestionError(f"{path}: document body is empty")
        for n, text in enumerate(pieces, start=1):
            chunks.append(KnowledgeChunk(f"DOC-{doc_id}-{n}", doc_id, text, kind))
    return chunks


def demo_corpus_dir():
    return Path(__file__).parent / "demo_corpus"
