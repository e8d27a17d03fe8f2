"""The three answer pipelines: plain retrieval, tag-filtered retrieval, and
tag-filtered retrieval plus knowledge-graph context.

All three share one synthesis template and one budget-enforcing prompt
builder. Under budget pressure the lowest-ranked chunks are dropped first
and the triple block is truncated last: triples are dense facts and cheap
per unit of context.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .config import Settings
from .corpus import AnswerRecord, Chunk, QARecord, TagSet
from .errors import BudgetError, DataError, ProviderError, TemplateError, TaggingError
from .ingest import fallback_tag, load_prompt, tag_text
from .kgraph import GraphStore, expand_neighborhood, match_nodes, render_triples
from .provider import ChatRequest, strip_directives
from .vindex import RetrievalHit, VectorIndex

logger = logging.getLogger(__name__)

TAG_BLOCK_HEADER = "Question tags:"
TRIPLE_BLOCK_HEADER = "Knowledge-graph facts:"


@dataclass
class ContextBundle:
    """Everything the synthesis prompt is assembled from."""

    hits: list[RetrievalHit]
    chunk_texts: dict[str, str]
    question_tags: TagSet = TagSet.empty()
    triples: list = field(default_factory=list)
    triples_attempted: bool = False
    retrieval_fallback: bool = False
    char_budget_used: int = 0


@dataclass(frozen=True)
class PromptBuild:
    text: str
    chunk_ids: tuple[str, ...]
    triple_ids: tuple[str, ...]
    dropped_chunks: int
    dropped_triples: int


def build_prompt(
    question_text: str,
    bundle: ContextBundle,
    template: str,
    *,
    budget_chars: int,
    triple_budget_chars: int,
) -> PromptBuild:
    """Deterministic template substitution under a hard character budget.

    Placeholders: {question} and {chunks} are required; {tags} and {triples}
    render to empty strings when there is nothing to show, so degenerate
    pipelines produce byte-identical prompts.
    """
    for placeholder in ("{question}", "{chunks}"):
        if placeholder not in template:
            raise TemplateError(f"synthesis template missing {placeholder}")

    rendered = render_triples(bundle.triples, triple_budget_chars)
    triple_lines = rendered.text.splitlines()
    triple_ids = list(rendered.included_ids)
    dropped_triples = rendered.dropped
    hits = list(bundle.hits)
    dropped_chunks = 0

    def _render(current_hits: list[RetrievalHit], lines: list[str]) -> str:
        chunk_block = "\n\n".join(
            f"[{h.chunk_id}] {strip_directives(bundle.chunk_texts[h.chunk_id])}"
            for h in current_hits
        )
        tag_block = ""
        if bundle.question_tags:
            cats = "\n".join(
                f"  {cat}: {', '.join(tags)}"
                for cat, tags in bundle.question_tags.items
            )
            tag_block = f"{TAG_BLOCK_HEADER}\n{cats}\n\n"
        triple_block = ""
        if bundle.triples_attempted:
            body = "\n".join(lines)
            triple_block = f"{TRIPLE_BLOCK_HEADER}\n{body}\n\n" if body else f"{TRIPLE_BLOCK_HEADER}\n\n"
        return (
            template.replace("{tags}", tag_block)
            .replace("{triples}", triple_block)
            .replace("{chunks}", chunk_block)
            .replace("{question}", question_text)
        )

    prompt = _render(hits, triple_lines)
    while len(prompt) > budget_chars and hits:
        hits.pop()
        dropped_chunks += 1
        prompt = _render(hits, triple_lines)
    while len(prompt) > budget_chars and triple_lines:
        triple_lines.pop()
        triple_ids.pop()
        dropped_triples += 1
        prompt = _render(hits, triple_lines)
    if len(prompt) > budget_chars:
        raise BudgetError(
            f"prompt irreducible below budget: {len(prompt)} > {budget_chars} chars"
        )
    if dropped_chunks or dropped_triples:
        logger.debug(
            "budget pressure: dropped %d chunk(s), %d triple line(s)",
            dropped_chunks,
            dropped_triples,
        )
    return PromptBuild(
        text=prompt,
        chunk_ids=tuple(h.chunk_id for h in hits),
        triple_ids=tuple(triple_ids),
        dropped_chunks=dropped_chunks,
        dropped_triples=dropped_triples,
    )


def tag_question(
    question_text: str,
    provider,
    settings: Settings,
    gazetteer: Mapping[str, Sequence[str]] | None = None,
) -> TagSet:
    """Question tagging, falling back to empty tags on tagging failure."""
    if gazetteer is not None:
        return fallback_tag(question_text, gazetteer)
    try:
        return tag_text(question_text, provider, model=settings.model_for("tagging"))
    except TaggingError as exc:
        logger.warning("question tagging failed, retrieval proceeds untagged: %s", exc)
        return TagSet.empty()


def _resolve_texts(hits: Sequence[RetrievalHit], chunks: Mapping[str, Chunk]) -> dict[str, str]:
    texts = {}
    for h in hits:
        chunk = chunks.get(h.chunk_id)
        if chunk is None:
            raise DataError(f"retrieved chunk {h.chunk_id} not found in corpus")
        texts[h.chunk_id] = chunk.text
    return texts


class _AttachQuestionId:
    """Re-raise provider errors naming the question they interrupted."""

    def __init__(self, question_id: str):
        self.question_id = question_id

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, ProviderError):
            raise type(exc)(
                f"question {self.question_id}: {exc}", status=exc.status, raw=exc.raw
            ) from exc
        return False


def _synthesize(
    question: QARecord,
    bundle: ContextBundle,
    provider,
    settings: Settings,
    method: str,
) -> AnswerRecord:
    template = load_prompt("synthesis.txt")
    build = build_prompt(
        question.question,
        bundle,
        template,
        budget_chars=settings.prompt_budget_chars,
        triple_budget_chars=settings.triple_budget_chars,
    )
    bundle.char_budget_used = len(build.text)
    answer = provider.chat(
        ChatRequest.simple(settings.model_for("chat"), build.text)
    )
    return AnswerRecord(
        question_id=question.question_id,
        method=method,
        answer_text=answer,
        context_chunk_ids=build.chunk_ids,
        context_triple_ids=build.triple_ids if method == "KG_RAG" else (),
        prompt_chars=len(build.text),
    )


def answer_rag(
    question: QARecord,
    index: VectorIndex,
    chunks: Mapping[str, Chunk],
    provider,
    settings: Settings,
) -> AnswerRecord:
    """Plain retrieval: embed the question, take top-k chunks, synthesize."""
    with _AttachQuestionId(question.question_id):
        query = provider.embed([question.question])[0]
        hits = index.search(query, settings.k)
        bundle = ContextBundle(hits=hits, chunk_texts=_resolve_texts(hits, chunks))
        return _synthesize(question, bundle, provider, settings, "RAG")


def answer_rag_sem(
    question: QARecord,
    index: VectorIndex,
    chunks: Mapping[str, Chunk],
    provider,
    settings: Settings,
    *,
    gazetteer: Mapping[str, Sequence[str]] | None = None,
) -> AnswerRecord:
    """Tag the question with the document-tagging prompt, then tag-filter
    retrieval and surface the tags to the synthesizer."""
    with _AttachQuestionId(question.question_id):
        tags = tag_question(question.question, provider, settings, gazetteer)
        query = provider.embed([question.question])[0]
        result = index.search_tagged(query, tags, settings.k, mode=settings.retrieval_mode)
        if result.fallback:
            logger.info(
                "question %s: no tagged entries matched, retrieval fell back",
                question.question_id,
            )
        bundle = ContextBundle(
            hits=result.hits,
            chunk_texts=_resolve_texts(result.hits, chunks),
            question_tags=tags,
            retrieval_fallback=result.fallback,
        )
        return _synthesize(question, bundle, provider, settings, "RAG_SEM")


def answer_kg_rag(
    question: QARecord,
    index: VectorIndex,
    chunks: Mapping[str, Chunk],
    graph: GraphStore,
    provider,
    settings: Settings,
    *,
    gazetteer: Mapping[str, Sequence[str]] | None = None,
) -> AnswerRecord:
    """RAG_SEM plus knowledge-graph context: matched nodes are expanded one
    neighborhood hop and rendered as compact fact lines."""
    with _AttachQuestionId(question.question_id):
        tags = tag_question(question.question, provider, settings, gazetteer)
        query = provider.embed([question.question])[0]
        result = index.search_tagged(query, tags, settings.k, mode=settings.retrieval_mode)
        seeds = match_nodes(graph, question.question, tags)
        triples = expand_neighborhood(graph, seeds, settings.hops) if seeds else []
        if not seeds:
            logger.info(
                "question %s: no graph nodes matched, proceeding with zero triples",
                question.question_id,
            )
        bundle = ContextBundle(
            hits=result.hits,
            chunk_texts=_resolve_texts(result.hits, chunks),
            question_tags=tags,
            triples=triples,
            triples_attempted=bool(seeds),
            retrieval_fallback=result.fallback,
        )
        return _synthesize(question, bundle, provider, settings, "KG_RAG")


def run_batch(
    questions: Sequence[QARecord],
    method: str,
    index: VectorIndex,
    chunks: Mapping[str, Chunk],
    graph: GraphStore | None,
    provider,
    settings: Settings,
    *,
    gazetteer: Mapping[str, Sequence[str]] | None = None,
) -> list[AnswerRecord]:
    """Answer independent questions concurrently; output ordered by id."""
    def _one(q: QARecord) -> AnswerRecord:
        if method == "RAG":
            return answer_rag(q, index, chunks, provider, settings)
        if method == "RAG_SEM":
            return answer_rag_sem(q, index, chunks, provider, settings, gazetteer=gazetteer)
        if method == "KG_RAG":
            if graph is None:
                raise DataError("KG_RAG requires a triple store")
            return answer_kg_rag(
                q, index, chunks, graph, provider, settings, gazetteer=gazetteer
            )
        raise DataError(f"unknown method: {method!r}")

    with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
        answers = list(pool.map(_one, questions))
    return sorted(answers, key=lambda a: a.question_id)
