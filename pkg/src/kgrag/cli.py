"""Single executable for the whole pipeline.

Subcommands: ingest, index, extract-kg, export-dot, ask, batch, eval,
compare, demo. Exit codes: 0 success, 1 usage error, 2 data error,
3 provider error. `--offline` forces the deterministic mock provider
everywhere.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import demo_corpus, report as report_mod
from .config import Settings, load_config, make_provider
from .corpus import (
    AnswerRecord,
    Chunk,
    Document,
    QARecord,
    Triple,
    load_jsonl,
    save_jsonl,
)
from .errors import DataError, KgragError, ProviderError, UsageError
from .evaluate import EvalRecord, evaluate_run
from .ingest import ingest_corpus, load_gazetteer
from .kgraph import build_graph, export_dot, extract_corpus
from .pipeline import answer_kg_rag, answer_rag, answer_rag_sem, run_batch
from .vindex import VectorIndex

_METHOD_NAMES = {"rag": "RAG", "rag_sem": "RAG_SEM", "kg_rag": "KG_RAG"}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1."""

    def error(self, message):
        raise UsageError(message)


def _add_globals(parser, *, suppress: bool) -> None:
    # Globals live on the root parser and on every subparser so they work in
    # either position; SUPPRESS keeps subparser defaults from clobbering
    # values parsed before the subcommand.
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", help="path to kgrag.json", **kw)
    parser.add_argument(
        "--workdir", help="directory for artifacts", **(kw or {"default": "."})
    )
    parser.add_argument(
        "--offline", action="store_true", help="use the mock provider", **kw
    )
    parser.add_argument(
        "--json-errors", action="store_true", help="machine-readable errors", **kw
    )
    parser.add_argument("--verbose", action="store_true", **kw)


def _build_parser() -> _Parser:
    parser = _Parser(prog="kgrag", description=__doc__)
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command")

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("ingest", help="chunk and tag documents")
    p.add_argument("--docs", help="documents.jsonl")
    p.add_argument("--out", help="chunks.jsonl")
    p.add_argument("--offline-gazetteer", help="gazetteer.json for rule-based tagging")

    p = add_parser("index", help="embed chunks into the vector index")
    p.add_argument("--chunks", help="chunks.jsonl")
    p.add_argument("--out", help="index.jsonl")

    p = add_parser("extract-kg", help="extract knowledge-graph triples")
    p.add_argument("--chunks", help="chunks.jsonl")
    p.add_argument("--out", help="triples.jsonl")

    p = add_parser("export-dot", help="write the triple store as DOT")
    p.add_argument("--triples", help="triples.jsonl")
    p.add_argument("--out", help="graph.dot")

    for name in ("ask", "batch"):
        p = add_parser(name, help=f"{name} questions against the corpus")
        p.add_argument("--method", required=True, choices=sorted(_METHOD_NAMES))
        p.add_argument("--index", help="index.jsonl")
        p.add_argument("--chunks", help="chunks.jsonl")
        p.add_argument("--triples", help="triples.jsonl (kg_rag)")
        p.add_argument("--offline-gazetteer", help="gazetteer.json for question tagging")
        p.add_argument("--k", type=int, help="chunks retrieved per question")
        p.add_argument("--retrieval-mode", choices=("filter", "boost"))
        p.add_argument("--hops", type=int, help="neighborhood hops (kg_rag)")
        if name == "ask":
            p.add_argument("--question", help="one question text")
            p.add_argument("--repl", action="store_true", help="interactive loop")
        else:
            p.add_argument("--questions", help="questions.jsonl")
            p.add_argument("--out", help="answers.jsonl")

    p = add_parser("eval", help="score answers on the nine metrics")
    p.add_argument("--answers", help="answers.jsonl")
    p.add_argument("--questions", help="questions.jsonl")
    p.add_argument("--chunks", help="chunks.jsonl for judge context")
    p.add_argument("--triples", help="triples.jsonl for judge context")
    p.add_argument("--out", help="eval.jsonl")

    p = add_parser("compare", help="merge eval files into the report")
    p.add_argument("--evals", nargs="+", required=True, help="eval.jsonl files")
    p.add_argument("--out", help="report.json")
    p.add_argument("--no-figures", action="store_true")

    p = add_parser("demo", help="full offline pipeline on the synthetic corpus")
    p.add_argument("--no-figures", action="store_true")

    return parser


def _default(args, attr: str, filename: str) -> Path:
    value = getattr(args, attr, None)
    return Path(value) if value else Path(args.workdir) / filename


def _settings(args) -> Settings:
    settings = load_config(args.config)
    if args.offline:
        settings = replace(settings, offline=True)
    for attr, key in (("k", "k"), ("retrieval_mode", "retrieval_mode"), ("hops", "hops")):
        value = getattr(args, attr, None)
        if value is not None:
            settings = replace(settings, **{key: value})
    gaz = getattr(args, "offline_gazetteer", None)
    if gaz:
        settings = replace(settings, gazetteer=gaz)
    return settings.validate()


def _load_gazetteer(settings: Settings):
    return load_gazetteer(settings.gazetteer) if settings.gazetteer else None


def cmd_ingest(args) -> int:
    settings = _settings(args)
    provider = make_provider(settings)
    docs = load_jsonl(_default(args, "docs", "documents.jsonl"), Document)
    out = _default(args, "out", "chunks.jsonl")
    result = ingest_corpus(
        docs, settings, provider, gazetteer=_load_gazetteer(settings), out_path=out
    )
    print(f"ingested {len(docs)} document(s) -> {len(result.chunks)} chunk(s) at {out}")
    if result.failures:
        for doc_id, message in result.failures:
            print(f"  failed: {doc_id}: {message}", file=sys.stderr)
        return 2 if not result.chunks else 0
    return 0


def cmd_index(args) -> int:
    settings = _settings(args)
    provider = make_provider(settings)
    chunks = load_jsonl(_default(args, "chunks", "chunks.jsonl"), Chunk)
    index = VectorIndex.build(chunks, provider)
    out = _default(args, "out", "index.jsonl")
    index.save(out)
    print(f"indexed {len(index)} chunk(s) at dimension {index.dimension} -> {out}")
    return 0


def cmd_extract_kg(args) -> int:
    settings = _settings(args)
    provider = make_provider(settings)
    chunks = load_jsonl(_default(args, "chunks", "chunks.jsonl"), Chunk)
    triples, failures = extract_corpus(
        chunks, provider, model=settings.model_for("extraction")
    )
    out = _default(args, "out", "triples.jsonl")
    save_jsonl(triples, out)
    print(f"extracted {len(triples)} triple(s) from {len(chunks)} chunk(s) -> {out}")
    if failures:
        for chunk_id, message in failures:
            print(f"  failed: {chunk_id}: {message}", file=sys.stderr)
        if not triples:
            raise ProviderError("extraction failed for every chunk")
    return 0


def cmd_export_dot(args) -> int:
    triples = load_jsonl(_default(args, "triples", "triples.jsonl"), Triple)
    store = build_graph(triples)
    out = _default(args, "out", "graph.dot")
    export_dot(store, out)
    print(f"wrote {len(store)} edge(s), {len(store.nodes)} node(s) -> {out}")
    return 0


def _load_pipeline_inputs(args, settings: Settings):
    index = VectorIndex.load(_default(args, "index", "index.jsonl"))
    chunks = {
        c.chunk_id: c
        for c in load_jsonl(_default(args, "chunks", "chunks.jsonl"), Chunk)
    }
    graph = None
    if _METHOD_NAMES[args.method] == "KG_RAG":
        triples = load_jsonl(_default(args, "triples", "triples.jsonl"), Triple)
        graph = build_graph(triples)
    return index, chunks, graph


def _answer_one(question: QARecord, method: str, index, chunks, graph, provider, settings, gazetteer):
    if method == "RAG":
        return answer_rag(question, index, chunks, provider, settings)
    if method == "RAG_SEM":
        return answer_rag_sem(
            question, index, chunks, provider, settings, gazetteer=gazetteer
        )
    return answer_kg_rag(
        question, index, chunks, graph, provider, settings, gazetteer=gazetteer
    )


def cmd_ask(args) -> int:
    settings = _settings(args)
    provider = make_provider(settings)
    method = _METHOD_NAMES[args.method]
    index, chunks, graph = _load_pipeline_inputs(args, settings)
    gazetteer = _load_gazetteer(settings)

    def _run(text: str, qid: str) -> None:
        question = QARecord(question_id=qid, question=text)
        answer = _answer_one(
            question, method, index, chunks, graph, provider, settings, gazetteer
        )
        print(answer.answer_text)
        print(f"[context: {', '.join(answer.context_chunk_ids) or 'none'}]")
        if answer.context_triple_ids:
            print(f"[facts: {', '.join(answer.context_triple_ids)}]")

    if args.repl:
        print("enter questions, blank line or Ctrl-D to exit", file=sys.stderr)
        n = 0
        for line in sys.stdin:
            text = line.strip()
            if not text:
                break
            n += 1
            _run(text, f"repl-{n:03d}")
        return 0
    if not args.question:
        raise UsageError("ask requires --question or --repl")
    _run(args.question, "adhoc-001")
    return 0


def cmd_batch(args) -> int:
    settings = _settings(args)
    provider = make_provider(settings)
    method = _METHOD_NAMES[args.method]
    questions = load_jsonl(_default(args, "questions", "questions.jsonl"), QARecord)
    index, chunks, graph = _load_pipeline_inputs(args, settings)
    answers = run_batch(
        questions, method, index, chunks, graph, provider, settings,
        gazetteer=_load_gazetteer(settings),
    )
    out = _default(args, "out", "answers.jsonl")
    save_jsonl(answers, out)
    print(f"answered {len(answers)} question(s) with {method} -> {out}")
    return 0


def cmd_eval(args) -> int:
    settings = _settings(args)
    provider = make_provider(settings)
    answers = load_jsonl(_default(args, "answers", "answers.jsonl"), AnswerRecord)
    questions = load_jsonl(_default(args, "questions", "questions.jsonl"), QARecord)
    chunks_path = _default(args, "chunks", "chunks.jsonl")
    triples_path = _default(args, "triples", "triples.jsonl")
    chunks = (
        {c.chunk_id: c for c in load_jsonl(chunks_path, Chunk)}
        if chunks_path.exists()
        else None
    )
    triples = (
        {t.triple_id: t for t in load_jsonl(triples_path, Triple)}
        if triples_path.exists()
        else None
    )
    records = evaluate_run(
        answers, questions, provider, chunks=chunks, triples=triples, settings=settings
    )
    out = _default(args, "out", "eval.jsonl")
    save_jsonl(records, out)
    rep = report_mod.build_report(records, settings)
    report_mod.write_report_bundle(
        rep, out.with_name(out.stem + "_report.json"), with_figures=False
    )
    print(report_mod.format_report_text(rep))
    print(f"evaluated {len(records)} answer(s) -> {out}")
    return 0


def cmd_compare(args) -> int:
    settings = _settings(args)
    records: list[EvalRecord] = []
    for path in args.evals:
        records.extend(load_jsonl(path, EvalRecord))
    if not records:
        raise DataError("no eval records to compare")
    rep = report_mod.build_report(records, settings)
    out = _default(args, "out", "report.json")
    report_mod.write_report_bundle(rep, out, with_figures=not args.no_figures)
    print(report_mod.format_report_text(rep))
    print(f"report -> {out}")
    return 0


def cmd_demo(args) -> int:
    """ingest -> index -> extract-kg -> batch x3 -> eval x3 -> compare."""
    settings = _settings(args)
    provider = make_provider(settings)
    workdir = Path(args.workdir)
    paths = demo_corpus.write_demo_corpus(workdir)
    gazetteer = load_gazetteer(paths["gazetteer"])
    settings = replace(settings, gazetteer=str(paths["gazetteer"]))

    docs = load_jsonl(paths["documents"], Document)
    questions = load_jsonl(paths["questions"], QARecord)
    result = ingest_corpus(
        docs, settings, provider, gazetteer=gazetteer,
        out_path=workdir / "chunks.jsonl",
    )
    if result.failures:
        raise DataError(f"demo ingest failed for {len(result.failures)} document(s)")
    chunks = {c.chunk_id: c for c in result.chunks}
    index = VectorIndex.build(result.chunks, provider)
    index.save(workdir / "index.jsonl")
    triples, failures = extract_corpus(
        result.chunks, provider, model=settings.model_for("extraction")
    )
    if failures:
        raise DataError(f"demo extraction failed for {len(failures)} chunk(s)")
    save_jsonl(triples, workdir / "triples.jsonl")
    graph = build_graph(triples)
    export_dot(graph, workdir / "graph.dot")

    eval_paths = []
    for method in ("RAG", "RAG_SEM", "KG_RAG"):
        answers = run_batch(
            questions, method, index, chunks,
            graph if method == "KG_RAG" else None,
            provider, settings, gazetteer=gazetteer,
        )
        slug = method.lower()
        save_jsonl(answers, workdir / f"answers_{slug}.jsonl")
        records = evaluate_run(
            answers, questions, provider,
            chunks=chunks, triples={t.triple_id: t for t in triples},
            settings=settings,
        )
        eval_path = workdir / f"eval_{slug}.jsonl"
        save_jsonl(records, eval_path)
        eval_paths.append(eval_path)

    all_records = []
    for path in eval_paths:
        all_records.extend(load_jsonl(path, EvalRecord))
    rep = report_mod.build_report(all_records, settings)
    report_mod.write_report_bundle(
        rep, workdir / "report.json", with_figures=not args.no_figures
    )
    print(report_mod.format_report_text(rep))
    print(
        f"demo complete: {len(docs)} documents, {len(chunks)} chunks, "
        f"{len(triples)} triples, report at {workdir / 'report.json'}"
    )
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "extract-kg": cmd_extract_kg,
    "export-dot": cmd_export_dot,
    "ask": cmd_ask,
    "batch": cmd_batch,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "demo": cmd_demo,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required (see --help)")
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return _COMMANDS[args.command](args)
    except KgragError as exc:
        _report_error(exc, argv)
        return exc.exit_code


def _report_error(exc: KgragError, argv) -> None:
    if argv is None:
        argv = sys.argv[1:]
    json_errors = "--json-errors" in argv
    if json_errors:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(payload), file=sys.stderr)
    else:
        print(f"kgrag: error: {exc}", file=sys.stderr)


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
