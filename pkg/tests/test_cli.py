import json

import pytest

from discrete_ir.cli import run_command

from conftest import BACKPACKS_CSV, BACKPACK_LEXICON


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "backpacks.csv").write_text(BACKPACKS_CSV, encoding="utf-8")
    lexicon_doc = {phrase: list(pair) for phrase, pair in BACKPACK_LEXICON.items()}
    (tmp_path / "lexicon.json").write_text(json.dumps(lexicon_doc), encoding="utf-8")
    (tmp_path / "dir.toml").write_text(
        f"""
workspace = "{tmp_path / 'workspace'}"

[provider]
id = "mock"
lexicon = "{tmp_path / 'lexicon.json'}"

[cap_policy]
min_row_support = 0.0

[ingest]
primary_key = "product_id"
""",
        encoding="utf-8",
    )
    return tmp_path


def _pipeline(workdir):
    config = str(workdir / "dir.toml")
    assert run_command([
        "--config", config, "ingest",
        "--input", str(workdir / "backpacks.csv"), "--table", "backpacks",
    ]) == 0
    assert run_command(["--config", config, "discretize", "--table", "backpacks"]) == 0
    assert run_command(["--config", config, "enumerate", "--table", "backpacks"]) == 0
    assert run_command(["--config", config, "generate", "--table", "backpacks"]) == 0
    return config


def test_full_pipeline_stages_produce_artifacts(workdir):
    _pipeline(workdir)
    workspace = workdir / "workspace"
    assert (workspace / "tables" / "backpacks.table.json").exists()
    assert (workspace / "extractions" / "backpacks.extractions.json").exists()
    assert (workspace / "catalogs" / "backpacks.catalog.json").exists()
    assert (workspace / "stores" / "backpacks.sqlite").exists()
    assert (workspace / "schemas" / "backpacks.schema.json").exists()


def test_query_prints_sql_status_and_rows(workdir, capsys):
    config = _pipeline(workdir)
    capsys.readouterr()
    code = run_command([
        "--config", config, "query", "--table", "backpacks",
        "Do you have a non-black 15-liter backpack under $400?",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "SELECT * FROM backpacks__joined" in out
    assert "status: valid" in out
    assert "p3" in out
    assert "1 row(s)" in out


def test_query_routes_without_explicit_table(workdir, capsys):
    config = _pipeline(workdir)
    capsys.readouterr()
    code = run_command(["--config", config, "query", "I need a navy backpack"])
    out = capsys.readouterr().out
    assert code == 0
    assert "table: backpacks" in out


def test_missing_config_is_user_error(capsys):
    code = run_command(["--config", "missing.toml", "query", "anything"])
    err = capsys.readouterr().err
    assert code == 1
    assert "missing.toml" in err


def test_unknown_subcommand_exits_one():
    assert run_command(["frobnicate"]) == 1


def test_rejected_query_exits_one(workdir, capsys):
    config = _pipeline(workdir)
    capsys.readouterr()
    code = run_command([
        "--config", config, "query", "--table", "backpacks",
        "backpack with color 'chartreuse'",
    ])
    out = capsys.readouterr().out
    assert code == 1
    assert "status: rejected" in out
    assert "non_enum_value" in out


def test_chat_scripted_session(workdir, capsys):
    config = _pipeline(workdir)
    script = workdir / "script.txt"
    script.write_text("I need a backpack\nunder $400, not black\n", encoding="utf-8")
    capsys.readouterr()
    code = run_command([
        "--config", config, "chat", "--session", "demo", "--script", str(script),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "Found 3 matching item(s)" in out
    assert "price lt 400" in out
    assert (workdir / "workspace" / "sessions" / "demo.jsonl").exists()


def test_eval_prints_metrics_table(tmp_path, capsys):
    out_file = tmp_path / "report.json"
    code = run_command([
        "eval", "--systems", "dir,like", "--rows", "30", "--count", "6",
        "--seed", "7", "--out", str(out_file),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "dir" in out and "like" in out
    report = json.loads(out_file.read_text())
    assert {r["system"] for r in report} == {"dir", "like"}
    assert report[0]["macro_recall"] == 1.0


def test_eval_reads_suite_file(tmp_path, capsys):
    suite_path = tmp_path / "suite.jsonl"
    intent = {
        "description": "Do you have a non-black 15 liter backpack?",
        "constraints": [["color", "neq", "black"], ["product_size", "eq", "15 liter"]],
        "kind": "direct",
        "domain_id": "backpacks",
    }
    suite_path.write_text(json.dumps(intent) + "\n", encoding="utf-8")
    code = run_command([
        "eval", "--systems", "dir", "--rows", "25", "--suite", str(suite_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "1.000" in out


def test_repeated_runs_are_bit_identical(workdir, capsys):
    config = _pipeline(workdir)
    args = [
        "--config", config, "query", "--table", "backpacks",
        "Do you have a non-black 15-liter backpack under $400?",
    ]
    capsys.readouterr()
    assert run_command(args) == 0
    first = capsys.readouterr().out
    assert run_command(args) == 0
    second = capsys.readouterr().out
    assert first == second
