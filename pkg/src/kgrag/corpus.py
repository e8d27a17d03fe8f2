"""Domain records, tag normalization, and JSONL persistence shared by every stage.

All record types are frozen dataclasses: construct once, share freely across
threads. Collections persist as UTF-8 JSON Lines with a ``schema: "v1"``
field on every object.
"""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError, EmptyTagError

SCHEMA_VERSION = "v1"

TAG_CATEGORIES = (
    "organizations",
    "dates",
    "industries",
    "sectors",
    "domains",
    "products",
    "partnerships",
    "dividends",
    "named_entities",
)

METHODS = ("RAG", "RAG_SEM", "KG_RAG")

_WS_RE = re.compile(r"\s+")
# Edge characters removed from tag boundaries. Deliberately excludes $, %, &
# so value-like entities ("$1.7b", "25%decrease", "r&d") survive intact.
_EDGE_CHARS = " \t\r\n.,;:!?'\"()[]{}<>`"


def normalize_tag(raw: str) -> str:
    """Canonical form for tags, graph nodes, and triple fields.

    Lowercase, Unicode NFC, inner whitespace collapsed to single spaces,
    and leading/trailing punctuation stripped. Idempotent.

    Raises EmptyTagError when nothing survives; callers drop the tag.
    """
    s = unicodedata.normalize("NFC", raw).lower()
    s = _WS_RE.sub(" ", s)
    s = s.strip(_EDGE_CHARS)
    if not s:
        raise EmptyTagError(f"tag normalized to empty string: {raw!r}")
    return s


def _normalize_or_none(raw: str) -> str | None:
    try:
        return normalize_tag(raw)
    except EmptyTagError:
        return None


@dataclass(frozen=True)
class TagSet:
    """Normalized tags keyed by category; lists sorted and duplicate-free.

    ``items`` holds (category, tags) pairs sorted by category, with empty
    categories omitted, so equality and hashing are canonical.
    """

    items: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @classmethod
    def empty(cls) -> "TagSet":
        return cls(())

    @classmethod
    def from_raw(
        cls,
        raw: Mapping[str, Iterable[str]],
        *,
        drop_unknown: bool = False,
    ) -> "TagSet":
        """Validate categories, normalize tags, drop empties.

        Unknown categories raise DataError unless ``drop_unknown`` is set,
        in which case they are silently skipped (callers log the warning).
        """
        cleaned: dict[str, set[str]] = {}
        for category, tags in raw.items():
            if category not in TAG_CATEGORIES:
                if drop_unknown:
                    continue
                raise DataError(f"unknown tag category: {category!r}")
            bucket = cleaned.setdefault(category, set())
            for tag in tags:
                norm = _normalize_or_none(str(tag))
                if norm is not None:
                    bucket.add(norm)
        items = tuple(
            (category, tuple(sorted(cleaned[category])))
            for category in TAG_CATEGORIES
            if cleaned.get(category)
        )
        return cls(items)

    def get(self, category: str) -> tuple[str, ...]:
        for cat, tags in self.items:
            if cat == category:
                return tags
        return ()

    def as_dict(self) -> dict[str, list[str]]:
        return {cat: list(tags) for cat, tags in self.items}

    def merge(self, other: "TagSet") -> "TagSet":
        """Per-category union. Commutative, associative, idempotent."""
        merged: dict[str, set[str]] = {}
        for cat, tags in self.items + other.items:
            merged.setdefault(cat, set()).update(tags)
        items = tuple(
            (category, tuple(sorted(merged[category])))
            for category in TAG_CATEGORIES
            if merged.get(category)
        )
        return TagSet(items)

    def pairs(self) -> tuple[tuple[str, str], ...]:
        """All (category, tag) pairs, sorted."""
        return tuple((cat, tag) for cat, tags in self.items for tag in tags)

    def overlap(self, other: "TagSet") -> int:
        """Number of (category, tag) pairs shared with ``other``."""
        return len(set(self.pairs()) & set(other.pairs()))

    def __bool__(self) -> bool:
        return bool(self.items)

    def to_json(self) -> dict:
        return {cat: list(tags) for cat, tags in self.items}

    @classmethod
    def from_json(cls, payload: Mapping[str, Iterable[str]]) -> "TagSet":
        return cls.from_raw(payload)


@dataclass(frozen=True)
class Document:
    """One plain-text filing: a single (company, fiscal year) unit."""

    doc_id: str
    company: str
    fiscal_year: int
    title: str
    text: str

    def __post_init__(self):
        if not self.doc_id:
            raise DataError("document with empty doc_id")
        if not self.text.strip():
            raise DataError(f"document {self.doc_id}: empty text")
        if not 1900 <= self.fiscal_year <= 2100:
            raise DataError(
                f"document {self.doc_id}: fiscal_year {self.fiscal_year} outside [1900, 2100]"
            )

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "doc_id": self.doc_id,
            "company": self.company,
            "fiscal_year": self.fiscal_year,
            "title": self.title,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "Document":
        return cls(
            doc_id=payload["doc_id"],
            company=payload["company"],
            fiscal_year=int(payload["fiscal_year"]),
            title=payload.get("title", ""),
            text=payload["text"],
        )


@dataclass(frozen=True)
class Chunk:
    """A contiguous span of a document with provenance and tags."""

    chunk_id: str
    doc_id: str
    seq_no: int
    text: str
    approx_tokens: int
    tags: TagSet = TagSet.empty()

    def __post_init__(self):
        if not self.chunk_id:
            raise DataError("chunk with empty chunk_id")
        if not self.text.strip():
            raise DataError(f"chunk {self.chunk_id}: empty text")
        if self.seq_no < 0:
            raise DataError(f"chunk {self.chunk_id}: negative seq_no")
        if self.approx_tokens <= 0:
            raise DataError(f"chunk {self.chunk_id}: approx_tokens must be positive")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "seq_no": self.seq_no,
            "text": self.text,
            "approx_tokens": self.approx_tokens,
            "tags": self.tags.to_json(),
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "Chunk":
        return cls(
            chunk_id=payload["chunk_id"],
            doc_id=payload["doc_id"],
            seq_no=int(payload["seq_no"]),
            text=payload["text"],
            approx_tokens=int(payload["approx_tokens"]),
            tags=TagSet.from_json(payload.get("tags", {})),
        )


@dataclass(frozen=True)
class Triple:
    """A (subject, predicate, object) fact with provenance to its chunk."""

    triple_id: str
    subject: str
    predicate: str
    object: str
    doc_id: str
    chunk_id: str

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            if not getattr(self, name):
                raise DataError(f"triple {self.triple_id}: empty {name}")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "triple_id": self.triple_id,
            "subject": self.subject,
            "predicate": self.predicate,
            "object": self.object,
            "doc_id": self.doc_id,
            "chunk_id": self.chunk_id,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "Triple":
        return cls(
            triple_id=payload["triple_id"],
            subject=payload["subject"],
            predicate=payload["predicate"],
            object=payload["object"],
            doc_id=payload.get("doc_id", ""),
            chunk_id=payload.get("chunk_id", ""),
        )


@dataclass(frozen=True)
class QARecord:
    """A question plus its reference answer."""

    question_id: str
    question: str
    reference_answer: str = ""

    def __post_init__(self):
        if not self.question_id:
            raise DataError("question with empty question_id")
        if not self.question.strip():
            raise DataError(f"question {self.question_id}: empty question")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "question_id": self.question_id,
            "question": self.question,
            "reference_answer": self.reference_answer,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "QARecord":
        return cls(
            question_id=payload["question_id"],
            question=payload["question"],
            reference_answer=payload.get("reference_answer", ""),
        )


@dataclass(frozen=True)
class AnswerRecord:
    """One synthesized answer with the exact context that produced it."""

    question_id: str
    method: str
    answer_text: str
    context_chunk_ids: tuple[str, ...] = ()
    context_triple_ids: tuple[str, ...] = ()
    prompt_chars: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DataError(
                f"answer for {self.question_id}: method {self.method!r} "
                f"not one of {METHODS}"
            )
        if self.context_triple_ids and self.method != "KG_RAG":
            raise DataError(
                f"answer for {self.question_id}: only KG_RAG may carry triples"
            )

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "question_id": self.question_id,
            "method": self.method,
            "answer_text": self.answer_text,
            "context_chunk_ids": list(self.context_chunk_ids),
            "context_triple_ids": list(self.context_triple_ids),
            "prompt_chars": self.prompt_chars,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "AnswerRecord":
        return cls(
            question_id=payload["question_id"],
            method=payload["method"],
            answer_text=payload["answer_text"],
            context_chunk_ids=tuple(payload.get("context_chunk_ids", ())),
            context_triple_ids=tuple(payload.get("context_triple_ids", ())),
            prompt_chars=int(payload.get("prompt_chars", 0)),
        )


def save_jsonl(records: Sequence, path: str | Path) -> int:
    """Write records as one JSON object per line; returns the count written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False))
            fh.write("\n")
    return len(records)


def load_jsonl(path: str | Path, record_type) -> list:
    """Load records of ``record_type`` from a JSONL file.

    Malformed lines (including blank lines) raise DataError naming the line
    number; invariant violations surface from the record constructors naming
    the offending record id.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                raise DataError(f"{path}:{lineno}: blank line in JSONL file")
            try:
                payload = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(payload, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            schema = payload.get("schema")
            if schema != SCHEMA_VERSION:
                raise DataError(
                    f"{path}:{lineno}: unsupported schema {schema!r} "
                    f"(expected {SCHEMA_VERSION!r})"
                )
            records.append(record_type.from_json(payload))
    return records
