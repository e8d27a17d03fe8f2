"""Embedded vector index: exact top-k cosine retrieval with tag filtering.

The index is brute-force on purpose. At filing-corpus scale (thousands of
chunks) an exact scan is fast, trivially correct, and easy to test against
an oracle; approximate search is an extension, not a need.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import SCHEMA_VERSION, Chunk, TagSet
from .errors import DataError
from .provider import EmbeddingVector

logger = logging.getLogger(__name__)

_UNIT_TOL = 1e-6
_EMBED_BATCH = 128


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    vector: EmbeddingVector
    tags: TagSet


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    score: float
    tag_overlap: int = 0


@dataclass
class TaggedResult:
    """search_tagged output: hits plus whether the filter fell back."""

    hits: list[RetrievalHit]
    fallback: bool = False
    mode: str = "filter"


class VectorIndex:
    """Immutable after construction; concurrent searches are safe."""

    def __init__(self, entries: Sequence[IndexEntry]):
        if not entries:
            raise DataError("vector index cannot be empty")
        dims = {e.vector.dimension for e in entries}
        if len(dims) > 1:
            raise DataError(f"mixed embedding dimensions in index: {sorted(dims)}")
        ids = [e.chunk_id for e in entries]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate chunk_id in index")
        for e in entries:
            if abs(e.vector.norm() - 1.0) > _UNIT_TOL:
                raise DataError(f"index entry {e.chunk_id} is not unit-normalized")
        self._entries = sorted(entries, key=lambda e: e.chunk_id)
        self._ids = [e.chunk_id for e in self._entries]
        self._matrix = np.array([e.vector.values for e in self._entries], dtype=np.float64)
        self._tags = [e.tags for e in self._entries]

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def dimension(self) -> int:
        return int(self._matrix.shape[1])

    def entries(self) -> list[IndexEntry]:
        return list(self._entries)

    @classmethod
    def build(cls, chunks: Sequence[Chunk], provider) -> "VectorIndex":
        """Embed every chunk, unit-normalize, and index it with its tags."""
        if not chunks:
            raise DataError("cannot build an index from zero chunks")
        vectors: list[EmbeddingVector] = []
        texts = [c.text for c in chunks]
        for start in range(0, len(texts), _EMBED_BATCH):
            vectors.extend(provider.embed(texts[start : start + _EMBED_BATCH]))
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise DataError(f"provider returned mixed dimensions: {sorted(dims)}")
        entries = [
            IndexEntry(chunk_id=c.chunk_id, vector=v.unit(), tags=c.tags)
            for c, v in zip(chunks, vectors)
        ]
        logger.info("indexed %d chunks at dimension %d", len(entries), vectors[0].dimension)
        return cls(entries)

    def save(self, path: str | Path) -> int:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for e in self._entries:
                fh.write(
                    json.dumps(
                        {
                            "schema": SCHEMA_VERSION,
                            "chunk_id": e.chunk_id,
                            "vector": list(e.vector.values),
                            "tags": e.tags.to_json(),
                        },
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
        return len(self._entries)

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        path = Path(path)
        if not path.exists():
            raise DataError(f"input file not found: {path}")
        entries = []
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    raise DataError(f"{path}:{lineno}: blank line in index file")
                try:
                    payload = json.loads(stripped)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
                entries.append(
                    IndexEntry(
                        chunk_id=payload["chunk_id"],
                        vector=EmbeddingVector(tuple(float(v) for v in payload["vector"])),
                        tags=TagSet.from_json(payload.get("tags", {})),
                    )
                )
        return cls(entries)

    def search(self, query: EmbeddingVector, k: int) -> list[RetrievalHit]:
        """Exact cosine top-k: min(k, index size) hits, score desc, id asc."""
        scores = self._scores(query, k)
        ranked = sorted(
            zip(self._ids, scores), key=lambda pair: (-pair[1], pair[0])
        )[: min(k, len(self._ids))]
        return [RetrievalHit(chunk_id=cid, score=s) for cid, s in ranked]

    def search_tagged(
        self,
        query: EmbeddingVector,
        question_tags: TagSet,
        k: int,
        mode: str = "filter",
    ) -> TaggedResult:
        """Tag-aware retrieval.

        filter: restrict to entries sharing at least one (category, tag)
        pair with the question when any exist, else fall back to plain
        search and flag it. boost: rank all entries by overlap first.
        """
        if mode not in ("filter", "boost"):
            raise DataError(f"unknown retrieval mode: {mode!r}")
        scores = self._scores(query, k)
        overlaps = [question_tags.overlap(tags) for tags in self._tags]
        rows = list(zip(self._ids, scores, overlaps))
        limit = min(k, len(rows))

        if mode == "boost":
            ranked = sorted(rows, key=lambda r: (-r[2], -r[1], r[0]))[:limit]
            return TaggedResult(
                hits=[RetrievalHit(c, s, o) for c, s, o in ranked], mode="boost"
            )

        matching = [r for r in rows if r[2] >= 1]
        if not matching:
            hits = [
                RetrievalHit(c, s, o)
                for c, s, o in sorted(rows, key=lambda r: (-r[1], r[0]))[:limit]
            ]
            return TaggedResult(hits=hits, fallback=True)
        ranked = sorted(matching, key=lambda r: (-r[1], r[0]))[: min(k, len(matching))]
        return TaggedResult(hits=[RetrievalHit(c, s, o) for c, s, o in ranked])

    def _scores(self, query: EmbeddingVector, k: int) -> np.ndarray:
        if k < 1:
            raise DataError("k must be >= 1")
        if query.dimension != self.dimension:
            raise DataError(
                f"query dimension {query.dimension} != index dimension {self.dimension}"
            )
        q = np.array(query.unit().values, dtype=np.float64)
        return np.clip(self._matrix @ q, -1.0, 1.0)
