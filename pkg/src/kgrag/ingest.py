"""Turn raw documents into tagged chunks.

Chunking packs whole sentences greedily up to a token target with a trailing
sentence overlap. Tagging is either LLM-driven (strict JSON output against
the shipped tagging prompt) or rule-based against a gazetteer for offline
runs.
"""
from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .config import Settings
from .corpus import TAG_CATEGORIES, Chunk, Document, TagSet, normalize_tag, save_jsonl
from .errors import DataError, TaggingError
from .provider import ChatRequest

logger = logging.getLogger(__name__)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_YEAR_TOKEN = re.compile(r"(?<!\d)\d{4}(?!\d)")

# Cap on how much document text is sent to the LLM for document-level tags.
DOC_TAG_TEXT_CAP = 8000

_REPAIR_SUFFIX = (
    "\n\nYour previous reply was not valid JSON. Respond again with ONLY the "
    "requested JSON and nothing else."
)


def load_prompt(name: str) -> str:
    return resources.files("kgrag.prompts").joinpath(name).read_text(encoding="utf-8")


def split_sentences(text: str) -> list[str]:
    """Sentence spans on ./!/? + whitespace boundaries; punctuation kept."""
    return [s for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _token_count(text: str) -> int:
    return len(text.split())


def chunk_document(doc: Document, target_tokens: int, overlap_tokens: int) -> list[Chunk]:
    """Greedy sentence packing with a trailing-sentence overlap.

    Consecutive chunks repeat the largest sentence suffix whose token total
    fits in ``overlap_tokens``. A single sentence longer than the target
    becomes its own (oversized) chunk rather than being split mid-sentence.
    """
    if target_tokens < 64:
        raise DataError("target_tokens must be >= 64")
    if not 0 <= overlap_tokens < target_tokens:
        raise DataError("overlap_tokens must satisfy 0 <= overlap < target")
    sentences = split_sentences(doc.text)
    if not sentences:
        raise DataError(f"document {doc.doc_id}: no sentences to chunk")

    counts = [_token_count(s) for s in sentences]
    spans: list[list[int]] = []
    current: list[int] = []
    current_tokens = 0
    for idx, tokens in enumerate(counts):
        if current and current_tokens + tokens > target_tokens:
            spans.append(current)
            tail = _overlap_suffix(current, counts, overlap_tokens)
            while tail and sum(counts[i] for i in tail) + tokens > target_tokens:
                tail = tail[1:]
            current = list(tail)
            current_tokens = sum(counts[i] for i in current)
        current.append(idx)
        current_tokens += tokens
    if current:
        spans.append(current)

    chunks = []
    for seq_no, span in enumerate(spans):
        text = " ".join(sentences[i] for i in span)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{seq_no}",
                doc_id=doc.doc_id,
                seq_no=seq_no,
                text=text,
                approx_tokens=_token_count(text),
            )
        )
    return chunks


def _overlap_suffix(span: list[int], counts: list[int], overlap_tokens: int) -> list[int]:
    tail: list[int] = []
    total = 0
    for idx in reversed(span):
        if total + counts[idx] > overlap_tokens:
            break
        tail.insert(0, idx)
        total += counts[idx]
    return tail


def tag_text(text: str, provider, *, model: str = "mock") -> TagSet:
    """LLM tagging with strict JSON output and one repair retry."""
    if not text.strip():
        raise DataError("cannot tag empty text")
    template = load_prompt("tagging.txt")
    prompt = template.replace("{text}", text)
    raw = provider.chat(ChatRequest.simple(model, prompt))
    payload = _parse_json_object(raw)
    if payload is None:
        raw = provider.chat(ChatRequest.simple(model, prompt + _REPAIR_SUFFIX))
        payload = _parse_json_object(raw)
        if payload is None:
            raise TaggingError("tagging output unparseable after repair retry", raw=raw)
    known = {k: v for k, v in payload.items() if _is_tag_list(v)}
    for category in set(payload) - set(known):
        logger.warning("tagging: dropping malformed category payload %r", category)
    for category in set(known) - set(TAG_CATEGORIES):
        logger.warning("tagging: dropping unknown category %r", category)
    return TagSet.from_raw(known, drop_unknown=True)


def _is_tag_list(value) -> bool:
    return isinstance(value, list) and all(isinstance(v, str) for v in value)


def _parse_json_object(raw: str) -> dict | None:
    try:
        payload = json.loads(raw.strip())
    except json.JSONDecodeError:
        return None
    return payload if isinstance(payload, dict) else None


def load_gazetteer(path: str | Path) -> dict[str, list[str]]:
    """Load and normalize a {category: [terms]} gazetteer file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"gazetteer file not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise DataError(f"{path}: gazetteer must be a JSON object")
    return normalize_gazetteer(raw)


def normalize_gazetteer(raw: Mapping[str, Sequence[str]]) -> dict[str, list[str]]:
    gaz: dict[str, list[str]] = {}
    for category, terms in raw.items():
        if category not in TAG_CATEGORIES:
            raise DataError(f"gazetteer: unknown category {category!r}")
        seen = []
        for term in terms:
            norm = normalize_tag(term)
            if norm not in seen:
                seen.append(norm)
        gaz[category] = seen
    return gaz


def fallback_tag(text: str, gazetteer: Mapping[str, Sequence[str]]) -> TagSet:
    """Deterministic rule-based tagger.

    A gazetteer term matches when it appears as a case-insensitive,
    word-bounded substring. Every 4-digit year token lands in "dates".
    """
    lowered = text.lower()
    found: dict[str, list[str]] = {}
    for category, terms in gazetteer.items():
        hits = [term for term in terms if _word_bounded(term, lowered)]
        if hits:
            found[category] = hits
    years = sorted(set(_YEAR_TOKEN.findall(lowered)))
    if years:
        found.setdefault("dates", [])
        found["dates"] = list(found["dates"]) + years
    return TagSet.from_raw(found)


def _word_bounded(needle: str, haystack: str) -> bool:
    pattern = r"(?<![a-z0-9])" + re.escape(needle) + r"(?![a-z0-9])"
    return re.search(pattern, haystack) is not None


@dataclass
class IngestResult:
    chunks: list[Chunk] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)


def ingest_corpus(
    docs: Sequence[Document],
    settings: Settings,
    provider,
    *,
    gazetteer: Mapping[str, Sequence[str]] | None = None,
    out_path: str | Path | None = None,
) -> IngestResult:
    """Chunk and tag every document; failures are collected per document.

    Document-level tags (company, fiscal year, and whatever the tagger finds
    on the document text) are unioned into each child chunk so company/year
    filters hit chunks that never restate them.
    """
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate doc_id in corpus")

    result = IngestResult()

    def _one(doc: Document) -> list[Chunk]:
        seed = TagSet.from_raw(
            {"organizations": [doc.company], "dates": [str(doc.fiscal_year)]}
        )
        doc_tags = seed.merge(_tag(doc.text[:DOC_TAG_TEXT_CAP]))
        chunks = chunk_document(doc, settings.target_tokens, settings.overlap_tokens)
        return [
            Chunk(
                chunk_id=c.chunk_id,
                doc_id=c.doc_id,
                seq_no=c.seq_no,
                text=c.text,
                approx_tokens=c.approx_tokens,
                tags=_tag(c.text).merge(doc_tags),
            )
            for c in chunks
        ]

    def _tag(text: str) -> TagSet:
        if gazetteer is not None:
            return fallback_tag(text, gazetteer)
        return tag_text(text, provider, model=settings.model_for("tagging"))

    with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
        futures = {pool.submit(_one, doc): doc for doc in docs}
        for future, doc in futures.items():
            try:
                result.chunks.extend(future.result())
            except Exception as exc:
                logger.error("ingest failed for %s: %s", doc.doc_id, exc)
                result.failures.append((doc.doc_id, str(exc)))

    result.chunks.sort(key=lambda c: (c.doc_id, c.seq_no))
    if result.failures:
        logger.warning(
            "ingest finished with %d failed document(s): %s",
            len(result.failures),
            ", ".join(doc_id for doc_id, _ in result.failures),
        )
    if out_path is not None:
        save_jsonl(result.chunks, out_path)
    return result
