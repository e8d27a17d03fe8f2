import argparse
import json
import subprocess
import sys

import pytest

from kgrag import cli
from kgrag.config import load_config
from kgrag.corpus import save_jsonl
from kgrag.errors import ConfigError

from conftest import make_chunk


def run_cli(*argv):
    return cli.run(list(argv))


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run_cli("frobnicate") == 1
        assert "error" in capsys.readouterr().err

    def test_no_subcommand_is_usage_error(self):
        assert run_cli() == 1

    def test_missing_input_file_names_path(self, tmp_path, capsys):
        code = run_cli(
            "index", "--workdir", str(tmp_path), "--offline",
            "--chunks", str(tmp_path / "absent.jsonl"),
        )
        assert code == 2
        assert "absent.jsonl" in capsys.readouterr().err

    def test_json_errors_shape(self, tmp_path, capsys):
        code = run_cli(
            "index", "--workdir", str(tmp_path), "--offline", "--json-errors"
        )
        assert code == 2
        payload = json.loads(capsys.readouterr().err.strip())
        assert payload["error"]["type"] == "DataError"
        assert "chunks.jsonl" in payload["error"]["message"]

    def test_ask_requires_question_or_repl(self, tmp_path, capsys):
        chunks = [make_chunk("d#0", "alpha beta gamma")]
        save_jsonl(chunks, tmp_path / "chunks.jsonl")
        assert run_cli("index", "--workdir", str(tmp_path), "--offline") == 0
        code = run_cli(
            "ask", "--workdir", str(tmp_path), "--offline", "--method", "rag"
        )
        assert code == 1


class TestConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "kgrag.json"
        path.write_text("{}")
        settings = load_config(path)
        assert settings.k == 8
        assert settings.target_tokens == 512
        assert settings.overlap_tokens == 64
        assert settings.hops == 1
        assert settings.prompt_budget_chars == 24000
        assert settings.triple_budget_chars == 6000
        assert settings.retrieval_mode == "filter"
        assert settings.concurrency == 4

    def test_unknown_key_lists_valid_keys(self, tmp_path):
        path = tmp_path / "kgrag.json"
        path.write_text('{"kk": 3}')
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "kk" in str(err.value)
        assert "retrieval_mode" in str(err.value)

    def test_env_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "kgrag.json"
        path.write_text('{"base_url": "https://file.example/v1"}')
        monkeypatch.setenv("KGRAG_BASE_URL", "https://env.example/v1")
        monkeypatch.setenv("KGRAG_API_KEY", "k-env")
        settings = load_config(path)
        assert settings.base_url == "https://env.example/v1"
        assert settings.api_key == "k-env"

    def test_flag_overrides_file(self, tmp_path):
        path = tmp_path / "kgrag.json"
        path.write_text('{"k": 3}')
        args = argparse.Namespace(
            config=str(path), offline=True, k=5,
            retrieval_mode=None, hops=None, offline_gazetteer=None,
        )
        settings = cli._settings(args)
        assert settings.k == 5

    def test_file_value_used_without_flag(self, tmp_path):
        path = tmp_path / "kgrag.json"
        path.write_text('{"k": 3}')
        args = argparse.Namespace(
            config=str(path), offline=True, k=None,
            retrieval_mode=None, hops=None, offline_gazetteer=None,
        )
        assert cli._settings(args).k == 3

    def test_invalid_values_rejected(self, tmp_path):
        path = tmp_path / "kgrag.json"
        path.write_text('{"retrieval_mode": "psychic"}')
        with pytest.raises(ConfigError, match="retrieval_mode"):
            load_config(path)

    def test_model_roles_validated(self, tmp_path):
        path = tmp_path / "kgrag.json"
        path.write_text('{"models": {"oracle": "x"}}')
        with pytest.raises(ConfigError, match="model role"):
            load_config(path)


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    workdir = tmp_path_factory.mktemp("demo")
    code = cli.run(
        ["demo", "--offline", "--workdir", str(workdir), "--no-figures"]
    )
    assert code == 0
    return workdir


class TestDemo:
    def test_report_shape_three_methods_nine_metrics(self, demo_dir):
        report = json.loads((demo_dir / "report.json").read_text())
        assert sorted(report["methods"]) == ["KG_RAG", "RAG", "RAG_SEM"]
        for method in report["methods"].values():
            assert sorted(method["metrics"]) == sorted(report["metric_names"])
            assert len(method["metrics"]) == 9
            for cell in method["metrics"].values():
                assert cell["missing"] == 0
                assert 0.0 <= cell["mean"] <= 1.0

    def test_artifacts_exist(self, demo_dir):
        for name in (
            "documents.jsonl", "questions.jsonl", "gazetteer.json",
            "chunks.jsonl", "index.jsonl", "triples.jsonl", "graph.dot",
            "answers_rag.jsonl", "answers_rag_sem.jsonl", "answers_kg_rag.jsonl",
            "eval_rag.jsonl", "eval_rag_sem.jsonl", "eval_kg_rag.jsonl",
            "report.json", "report.txt", "report_metrics.csv",
        ):
            assert (demo_dir / name).exists(), name

    def test_report_text_and_csv_cover_all_metrics(self, demo_dir):
        text = (demo_dir / "report.txt").read_text()
        csv_text = (demo_dir / "report_metrics.csv").read_text()
        for metric in ("relevance", "rouge1", "rougeL", "embeddings", "llm_score"):
            assert metric in text
            assert metric in csv_text
        assert "RAG_SEM" in text

    def test_subcommands_compose_on_demo_artifacts(self, demo_dir, tmp_path, capsys):
        code = run_cli(
            "export-dot", "--workdir", str(demo_dir), "--offline",
            "--out", str(tmp_path / "again.dot"),
        )
        assert code == 0
        assert (tmp_path / "again.dot").read_text().startswith("digraph G {")

        code = run_cli(
            "ask", "--workdir", str(demo_dir), "--offline",
            "--method", "kg_rag",
            "--offline-gazetteer", str(demo_dir / "gazetteer.json"),
            "--question", "Did Microsoft acquire ZeniMax Media?",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Synthesized finding" in out
        assert "[facts:" in out

    def test_repl_loop(self, demo_dir, capsys, monkeypatch):
        import io

        monkeypatch.setattr(
            "sys.stdin", io.StringIO("What was Apple revenue in fiscal 2022?\n\n")
        )
        code = run_cli(
            "ask", "--workdir", str(demo_dir), "--offline",
            "--method", "rag", "--repl",
        )
        assert code == 0
        assert "Synthesized finding" in capsys.readouterr().out

    def test_eval_writes_report_sidecar(self, demo_dir, tmp_path):
        out = tmp_path / "scored.jsonl"
        code = run_cli(
            "eval", "--workdir", str(demo_dir), "--offline",
            "--answers", str(demo_dir / "answers_rag.jsonl"),
            "--out", str(out),
        )
        assert code == 0
        report = json.loads((tmp_path / "scored_report.json").read_text())
        assert list(report["methods"]) == ["RAG"]
        assert (tmp_path / "scored_report.txt").exists()
        assert (tmp_path / "scored_report_metrics.csv").exists()

    def test_compare_merges_eval_files(self, demo_dir, tmp_path):
        code = run_cli(
            "compare", "--workdir", str(demo_dir), "--offline", "--no-figures",
            "--evals",
            str(demo_dir / "eval_rag.jsonl"),
            str(demo_dir / "eval_rag_sem.jsonl"),
            "--out", str(tmp_path / "two.json"),
        )
        assert code == 0
        report = json.loads((tmp_path / "two.json").read_text())
        assert sorted(report["methods"]) == ["RAG", "RAG_SEM"]

    def test_every_chunk_has_tags(self, demo_dir):
        for line in (demo_dir / "chunks.jsonl").read_text().splitlines():
            chunk = json.loads(line)
            assert chunk["tags"].get("organizations"), chunk["chunk_id"]


class TestModuleEntryPoint:
    def test_python_dash_m_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "kgrag", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "demo" in proc.stdout

    def test_python_dash_m_usage_error_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "kgrag", "nonsense"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
