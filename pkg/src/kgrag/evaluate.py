"""Nine-metric evaluation harness.

Surface metrics (rouge1, rouge2, rougeL) run on Porter-stemmed tokens so
inflection differences do not count as misses. The embedding metric rescales
cosine from [-1, 1] to [0, 1]. The four segmented judge metrics and the
overall score come from an LLM given the question, reference, candidate,
retrieved context, and the metric definition; judge failures degrade to
missing values that are counted, never imputed.

The rouge scores here are F1 (harmonic mean of clipped-overlap precision and
recall). Recall-only variants exist in the wild and change absolute numbers;
F1 is symmetric and the common default.
"""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .config import Settings
from .corpus import SCHEMA_VERSION, AnswerRecord, Chunk, QARecord, Triple
from .errors import DataError
from .ingest import load_prompt
from .kgraph import render_triples
from .provider import ChatRequest, strip_directives

logger = logging.getLogger(__name__)

METRICS = (
    "relevance",
    "correctness",
    "faithfulness",
    "similarity",
    "llm_score",
    "embeddings",
    "rouge1",
    "rouge2",
    "rougeL",
)

JUDGE_METRICS = ("faithfulness", "correctness", "relevance", "similarity")

_JUDGE_TEMPLATES = {
    "faithfulness": "judge_faithfulness.txt",
    "correctness": "judge_correctness.txt",
    "relevance": "judge_relevance.txt",
    "similarity": "judge_similarity.txt",
    "overall": "judge_overall.txt",
}

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_REPAIR_SUFFIX = (
    '\n\nYour previous reply was not valid JSON. Respond again with ONLY '
    '{"score": <number>, "rationale": "<text>"}.'
)


def tokenize_stem(text: str):
    """Lowercase, split on non-alphanumerics, Porter-stem each token."""
    from . import stemmer

    return [stemmer.stem(tok) for tok in _TOKEN_RE.findall(text.lower())]


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n_prf(candidate: str, reference: str, n: int) -> tuple[float, float, float]:
    cand = _ngrams(tokenize_stem(candidate), n)
    ref = _ngrams(tokenize_stem(reference), n)
    total_cand = sum(cand.values())
    total_ref = sum(ref.values())
    if total_cand == 0 or total_ref == 0:
        return 0.0, 0.0, 0.0
    overlap = sum((cand & ref).values())
    precision = overlap / total_cand
    recall = overlap / total_ref
    return precision, recall, _f1(precision, recall)


def rouge_n(candidate: str, reference: str, n: int) -> float:
    """Clipped n-gram overlap F1 on stemmed tokens; n is 1 or 2."""
    if n not in (1, 2):
        raise DataError("rouge_n supports n in {1, 2}")
    return rouge_n_prf(candidate, reference, n)[2]


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Exact longest common subsequence length, O(len(a) * len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        row = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
        prev = row
    return prev[len(b)]


def rouge_l_prf(candidate: str, reference: str) -> tuple[float, float, float]:
    cand = tokenize_stem(candidate)
    ref = tokenize_stem(reference)
    if not cand or not ref:
        return 0.0, 0.0, 0.0
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return precision, recall, _f1(precision, recall)


def rouge_l(candidate: str, reference: str) -> float:
    """LCS-based F1 on stemmed token sequences."""
    return rouge_l_prf(candidate, reference)[2]


def embedding_similarity(candidate: str, reference: str, provider) -> float:
    """Cosine of the two embeddings rescaled from [-1, 1] to [0, 1]."""
    return _embedding_scores(candidate, reference, provider)[0]


def _embedding_scores(candidate: str, reference: str, provider) -> tuple[float, float]:
    vectors = provider.embed([candidate, reference])
    cosine = vectors[0].cosine(vectors[1])
    return (cosine + 1.0) / 2.0, cosine


@dataclass(frozen=True)
class JudgeOutcome:
    score: float | None
    raw: str
    clamped: bool = False
    error: str | None = None


def _run_judge(
    template_name: str,
    question: str,
    reference: str,
    candidate: str,
    context_text: str,
    provider,
    model: str,
) -> JudgeOutcome:
    template = load_prompt(template_name)
    prompt = (
        template.replace("{context}", context_text or "(no retrieved context)")
        .replace("{question}", question)
        .replace("{reference}", reference)
        .replace("{candidate}", candidate)
    )
    raw = provider.chat(ChatRequest.simple(model, prompt))
    score = _parse_score(raw)
    if score is None:
        raw = provider.chat(ChatRequest.simple(model, prompt + _REPAIR_SUFFIX))
        score = _parse_score(raw)
        if score is None:
            return JudgeOutcome(score=None, raw=raw, error="unparseable judge output")
    clamped = not 0.0 <= score <= 1.0
    if clamped:
        logger.warning("judge score %.3f outside [0, 1], clamping", score)
        score = max(0.0, min(1.0, score))
    return JudgeOutcome(score=score, raw=raw, clamped=clamped)


def _parse_score(raw: str) -> float | None:
    try:
        payload = json.loads(raw.strip())
    except json.JSONDecodeError:
        return None
    if not isinstance(payload, dict) or "score" not in payload:
        return None
    value = payload["score"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    return float(value)


def judge_metric(
    metric: str,
    question: str,
    reference: str,
    candidate: str,
    context_text: str,
    provider,
    *,
    model: str = "mock",
) -> JudgeOutcome:
    """One judge call for one segmented metric, definition carried in-prompt."""
    if metric not in JUDGE_METRICS:
        raise DataError(f"unknown judge metric: {metric!r}")
    return _run_judge(
        _JUDGE_TEMPLATES[metric], question, reference, candidate, context_text,
        provider, model,
    )


def llm_overall_score(
    question: str,
    reference: str,
    candidate: str,
    provider,
    *,
    context_text: str = "",
    model: str = "mock",
) -> JudgeOutcome:
    """Single overall quality score from the judge."""
    return _run_judge(
        _JUDGE_TEMPLATES["overall"], question, reference, candidate, context_text,
        provider, model,
    )


@dataclass(frozen=True)
class EvalRecord:
    """Per-question, per-method scores across all nine metrics.

    Judge metrics that failed twice are None and listed in ``missing``;
    aggregation skips them and reports coverage instead of imputing.
    """

    question_id: str
    method: str
    scores: dict
    judge_raw: dict = field(default_factory=dict)
    missing: tuple[str, ...] = ()
    raw_cosine: float | None = None

    def __post_init__(self):
        if set(self.scores) != set(METRICS):
            raise DataError(
                f"eval record {self.question_id}/{self.method}: "
                f"scores must carry exactly the nine metrics"
            )
        for name, value in self.scores.items():
            if value is None:
                continue
            if not 0.0 <= value <= 1.0:
                raise DataError(
                    f"eval record {self.question_id}/{self.method}: "
                    f"{name}={value} outside [0, 1]"
                )

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "question_id": self.question_id,
            "method": self.method,
            "scores": dict(self.scores),
            "judge_raw": dict(self.judge_raw),
            "missing": list(self.missing),
            "raw_cosine": self.raw_cosine,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "EvalRecord":
        return cls(
            question_id=payload["question_id"],
            method=payload["method"],
            scores=dict(payload["scores"]),
            judge_raw=dict(payload.get("judge_raw", {})),
            missing=tuple(payload.get("missing", ())),
            raw_cosine=payload.get("raw_cosine"),
        )


def rebuild_context_text(
    answer: AnswerRecord,
    chunks: Mapping[str, Chunk] | None,
    triples: Mapping[str, Triple] | None,
) -> str:
    """The retrieved context of the answer under test, as judges see it."""
    parts = []
    if chunks:
        for cid in answer.context_chunk_ids:
            chunk = chunks.get(cid)
            if chunk is not None:
                parts.append(strip_directives(chunk.text))
    if triples and answer.context_triple_ids:
        resolved = [triples[tid] for tid in answer.context_triple_ids if tid in triples]
        if resolved:
            parts.append(render_triples(resolved, 10**9).text)
    return "\n\n".join(p for p in parts if p)


def evaluate_answer(
    answer: AnswerRecord,
    question: QARecord,
    provider,
    *,
    context_text: str = "",
    judge_model: str = "mock",
) -> EvalRecord:
    """All nine metrics for one answer."""
    if not question.reference_answer.strip():
        raise DataError(f"question {question.question_id}: empty reference answer")
    scores: dict[str, float | None] = {}
    judge_raw: dict[str, str] = {}
    missing: list[str] = []

    scores["rouge1"] = rouge_n(answer.answer_text, question.reference_answer, 1)
    scores["rouge2"] = rouge_n(answer.answer_text, question.reference_answer, 2)
    scores["rougeL"] = rouge_l(answer.answer_text, question.reference_answer)
    score, cosine = _embedding_scores(
        answer.answer_text, question.reference_answer, provider
    )
    scores["embeddings"] = score

    for metric in JUDGE_METRICS:
        outcome = judge_metric(
            metric,
            question.question,
            question.reference_answer,
            answer.answer_text,
            context_text,
            provider,
            model=judge_model,
        )
        judge_raw[metric] = outcome.raw
        scores[metric] = outcome.score
        if outcome.score is None:
            missing.append(metric)
            logger.warning(
                "judge metric %s missing for %s/%s: %s",
                metric, answer.question_id, answer.method, outcome.error,
            )
    overall = llm_overall_score(
        question.question,
        question.reference_answer,
        answer.answer_text,
        provider,
        context_text=context_text,
        model=judge_model,
    )
    judge_raw["llm_score"] = overall.raw
    scores["llm_score"] = overall.score
    if overall.score is None:
        missing.append("llm_score")

    return EvalRecord(
        question_id=answer.question_id,
        method=answer.method,
        scores=scores,
        judge_raw=judge_raw,
        missing=tuple(missing),
        raw_cosine=cosine,
    )


def evaluate_run(
    answers: Sequence[AnswerRecord],
    questions: Sequence[QARecord],
    provider,
    *,
    chunks: Mapping[str, Chunk] | None = None,
    triples: Mapping[str, Triple] | None = None,
    settings: Settings | None = None,
) -> list[EvalRecord]:
    """Evaluate every answer; records ordered by (question_id, method)."""
    by_id = {q.question_id: q for q in questions}
    judge_model = settings.model_for("judge") if settings else "mock"
    records = []
    for answer in answers:
        question = by_id.get(answer.question_id)
        if question is None:
            raise DataError(f"answer references unknown question {answer.question_id}")
        context_text = rebuild_context_text(answer, chunks, triples)
        records.append(
            evaluate_answer(
                answer,
                question,
                provider,
                context_text=context_text,
                judge_model=judge_model,
            )
        )
    records.sort(key=lambda r: (r.question_id, r.method))
    return records
