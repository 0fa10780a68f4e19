"""Retrieval-grounded message generation."""

from .corpus import DOC_KINDS, MAX_CHUNK_WORDS, KnowledgeChunk, chunk_text, demo_corpus_dir, ingest_corpus
from .embed import DIM, HashingEmbedder, embed, tokenize
from .generation import CALL_TO_ACTION, ClientConfig, generate, generate_many, http_generate, offline_generate
from .metrics import GenerationMetrics, distinct_2, score_generation
from .parsing import GeneratedMessage, repair, repair_and_parse, validate_citations
from .prompt import INSTRUCTIONS, MAX_MESSAGE_WORDS, assemble_prompt, parse_prompt
from .retrieval import PRODUCT_SYNONYMS, ChunkStore, RagQuery, build_query, retrieve
from .runner import TABLE3_LABELS, run_generation, shipped, write_outputs

__all__ = [
    "CALL_TO_ACTION",
    "DIM",
    "DOC_KINDS",
    "INSTRUCTIONS",
    "MAX_CHUNK_WORDS",
    "MAX_MESSAGE_WORDS",
    "PRODUCT_SYNONYMS",
    "TABLE3_LABELS",
    "ChunkStore",
    "ClientConfig",
    "GeneratedMessage",
    "GenerationMetrics",
    "HashingEmbedder",
    "KnowledgeChunk",
    "RagQuery",
    "assemble_prompt",
    "build_query",
    "chunk_text",
    "demo_corpus_dir",
    "distinct_2",
    "embed",
    "generate",
    "generate_many",
    "http_generate",
    "ingest_corpus",
    "offline_generate",
    "parse_prompt",
    "repair",
    "repair_and_parse",
    "retrieve",
    "run_generation",
    "score_generation",
    "shipped",
    "tokenize",
    "validate_citations",
    "write_outputs",
]
