"""Triple extraction, adjacency-indexed triple store, and neighborhood expansion.

Nodes are normalized strings rather than typed entities: extracted objects
mix entities with values ("$1.7b", "25%decrease") and a uniform string node
represents both. The embedded store is the graph database; no external
service is involved.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Chunk, TagSet, Triple, normalize_tag
from .errors import DataError, EmptyTagError, ExtractionError
from .ingest import load_prompt
from .provider import ChatRequest

logger = logging.getLogger(__name__)

_REPAIR_SUFFIX = (
    "\n\nYour previous reply was not valid JSON. Respond again with ONLY the "
    "requested JSON array and nothing else."
)

# Minimum lengths for the fuzzy node-match rules, keeping very short strings
# from matching everything.
_PREFIX_MIN = 3
_SQUASH_MIN = 6

_ALNUM = re.compile(r"[^a-z0-9]+")


def _squash(text: str) -> str:
    """Drop every non-alphanumeric character: "zenimax media" -> "zenimaxmedia"."""
    return _ALNUM.sub("", text.lower())


def _word_bounded(needle: str, haystack: str) -> bool:
    pattern = r"(?<![a-z0-9])" + re.escape(needle) + r"(?![a-z0-9])"
    return re.search(pattern, haystack) is not None


def triple_id_for(subject: str, predicate: str, obj: str, chunk_id: str) -> str:
    digest = hashlib.blake2b(
        f"{subject}|{predicate}|{obj}|{chunk_id}".encode("utf-8"), digest_size=6
    )
    return "t" + digest.hexdigest()


def extract_triples(chunk: Chunk, provider, *, model: str = "mock") -> list[Triple]:
    """Prompt-driven extraction with strict JSON output and one repair retry.

    Fields are normalized; triples that lose a field to normalization are
    dropped; duplicates within the chunk collapse to one triple.
    """
    if not chunk.text.strip():
        raise DataError(f"chunk {chunk.chunk_id}: empty text")
    template = load_prompt("extraction.txt")
    prompt = template.replace("{text}", chunk.text)
    raw = provider.chat(ChatRequest.simple(model, prompt))
    rows = _parse_json_array(raw)
    if rows is None:
        raw = provider.chat(ChatRequest.simple(model, prompt + _REPAIR_SUFFIX))
        rows = _parse_json_array(raw)
        if rows is None:
            raise ExtractionError(
                f"extraction output for {chunk.chunk_id} unparseable after repair retry",
                raw=raw,
            )
    triples = []
    seen: set[tuple[str, str, str]] = set()
    for row in rows:
        if not isinstance(row, dict):
            logger.warning("extraction: skipping non-object row in %s", chunk.chunk_id)
            continue
        try:
            spo = tuple(
                normalize_tag(str(row.get(field, "")))
                for field in ("subject", "predicate", "object")
            )
        except EmptyTagError:
            logger.warning("extraction: dropping triple with empty field in %s", chunk.chunk_id)
            continue
        if spo in seen:
            continue
        seen.add(spo)
        subject, predicate, obj = spo
        triples.append(
            Triple(
                triple_id=triple_id_for(subject, predicate, obj, chunk.chunk_id),
                subject=subject,
                predicate=predicate,
                object=obj,
                doc_id=chunk.doc_id,
                chunk_id=chunk.chunk_id,
            )
        )
    return triples


def _parse_json_array(raw: str) -> list | None:
    try:
        payload = json.loads(raw.strip())
    except json.JSONDecodeError:
        return None
    return payload if isinstance(payload, list) else None


def extract_corpus(
    chunks: Sequence[Chunk], provider, *, model: str = "mock"
) -> tuple[list[Triple], list[tuple[str, str]]]:
    """extract_triples over a corpus, tolerating per-chunk failures."""
    triples: list[Triple] = []
    failures: list[tuple[str, str]] = []
    for chunk in chunks:
        try:
            triples.extend(extract_triples(chunk, provider, model=model))
        except ExtractionError as exc:
            logger.error("extraction failed for %s: %s", chunk.chunk_id, exc)
            failures.append((chunk.chunk_id, str(exc)))
    triples.sort(key=lambda t: (t.chunk_id, t.triple_id))
    return triples, failures


class GraphStore:
    """Triples plus an adjacency map node -> incident triple ids.

    Immutable after build; every triple is indexed under both its subject
    and its object.
    """

    def __init__(self, triples: Iterable[Triple]):
        self.triples: dict[str, Triple] = {}
        adjacency: dict[str, set[str]] = {}
        for t in triples:
            if t.triple_id in self.triples:
                raise DataError(f"duplicate triple_id {t.triple_id}")
            self.triples[t.triple_id] = t
            adjacency.setdefault(t.subject, set()).add(t.triple_id)
            adjacency.setdefault(t.object, set()).add(t.triple_id)
        self.adjacency: dict[str, tuple[str, ...]] = {
            node: tuple(sorted(ids)) for node, ids in sorted(adjacency.items())
        }
        self.nodes: tuple[str, ...] = tuple(self.adjacency)

    def __len__(self) -> int:
        return len(self.triples)

    def incident(self, node: str) -> tuple[str, ...]:
        return self.adjacency.get(node, ())

    def neighbors(self, node: str) -> set[str]:
        out = set()
        for tid in self.incident(node):
            t = self.triples[tid]
            out.add(t.object if t.subject == node else t.subject)
        out.discard(node)
        return out

    def check_invariants(self) -> None:
        for node, ids in self.adjacency.items():
            for tid in ids:
                t = self.triples.get(tid)
                if t is None:
                    raise DataError(f"adjacency references unknown triple {tid}")
                if node not in (t.subject, t.object):
                    raise DataError(f"triple {tid} indexed under non-incident node {node}")
        for tid, t in self.triples.items():
            if tid not in self.adjacency.get(t.subject, ()):
                raise DataError(f"triple {tid} missing from subject adjacency")
            if tid not in self.adjacency.get(t.object, ()):
                raise DataError(f"triple {tid} missing from object adjacency")


def build_graph(triples: Iterable[Triple]) -> GraphStore:
    return GraphStore(triples)


def match_nodes(store: GraphStore, question_text: str, question_tags: TagSet) -> set[str]:
    """Nodes the question talks about.

    A node matches when a question tag equals it, sits inside it at word
    boundaries, or is an alphanumeric-squashed prefix of it (bridging spaced
    tags like "zenimax media" to concatenated nodes like "zenimaxmedia"), or
    when the node itself appears in the question text (word-bounded, or
    squash-contained for longer nodes).
    """
    try:
        question = normalize_tag(question_text)
    except EmptyTagError:
        return set()
    squashed_question = _squash(question)
    tags = [tag for _, tag in question_tags.pairs()]
    matched = set()
    for node in store.nodes:
        squashed_node = _squash(node)
        for tag in tags:
            if tag == node or _word_bounded(tag, node):
                matched.add(node)
                break
            st = _squash(tag)
            if len(st) >= _PREFIX_MIN and squashed_node.startswith(st):
                matched.add(node)
                break
        else:
            if _word_bounded(node, question):
                matched.add(node)
            elif len(squashed_node) >= _SQUASH_MIN and squashed_node in squashed_question:
                matched.add(node)
    return matched


def expand_neighborhood(store: GraphStore, seeds: Iterable[str], hops: int = 1) -> list[Triple]:
    """Triples incident to any node within ``hops`` edge-steps of a seed.

    Breadth-first from all seeds at once; output ordered by (hop distance
    ascending, triple_id ascending) where a triple's distance is the nearer
    of its endpoints. hops=0 keeps only triples touching a seed.
    """
    if hops < 0:
        raise DataError("hops must be >= 0")
    distance: dict[str, int] = {}
    queue: deque[str] = deque()
    for seed in sorted(set(seeds)):
        if seed in store.adjacency:
            distance[seed] = 0
            queue.append(seed)
    while queue:
        node = queue.popleft()
        if distance[node] >= hops:
            continue
        for neighbor in sorted(store.neighbors(node)):
            if neighbor not in distance:
                distance[neighbor] = distance[node] + 1
                queue.append(neighbor)

    ranked: list[tuple[int, str]] = []
    for tid, t in store.triples.items():
        ds = distance.get(t.subject)
        do = distance.get(t.object)
        candidates = [d for d in (ds, do) if d is not None and d <= hops]
        if candidates:
            ranked.append((min(candidates), tid))
    ranked.sort()
    return [store.triples[tid] for _, tid in ranked]


@dataclass(frozen=True)
class RenderedTriples:
    text: str
    included_ids: tuple[str, ...]
    dropped: int


def render_triples(triples: Sequence[Triple], budget_chars: int) -> RenderedTriples:
    """One ``subject | predicate | object (source: doc_id)`` line per triple.

    Truncates at the last whole line that fits the character budget and
    reports how many triples were dropped.
    """
    if budget_chars <= 0:
        raise DataError("budget_chars must be positive")
    lines = []
    included = []
    used = 0
    for t in triples:
        line = f"{t.subject} | {t.predicate} | {t.object} (source: {t.doc_id})"
        cost = len(line) + (1 if lines else 0)
        if used + cost > budget_chars:
            break
        lines.append(line)
        included.append(t.triple_id)
        used += cost
    return RenderedTriples(
        text="\n".join(lines),
        included_ids=tuple(included),
        dropped=len(triples) - len(included),
    )


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(store: GraphStore, path: str | Path) -> None:
    """Write the store as a DOT digraph, one labeled edge per triple."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["digraph G {"]
    for node in store.nodes:
        lines.append(f"  {_dot_quote(node)};")
    for tid in sorted(store.triples):
        t = store.triples[tid]
        lines.append(
            f"  {_dot_quote(t.subject)} -> {_dot_quote(t.object)} "
            f"[label={_dot_quote(t.predicate)}];"
        )
    lines.append("}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
