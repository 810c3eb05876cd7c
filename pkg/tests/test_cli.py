"""CLI: verbs, overrides, and exit codes (0 ok, 2 config, 3 stage)."""

import os

import pytest

from mobtrial.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, build_parser, main


def write_config(tmp_path, out_dir, extra=""):
    path = tmp_path / "config.toml"
    path.write_text(
        f"""
[pipeline]
master_seed = 5
output_dir = "{out_dir}"

[synthetic]
n = 60
missing_rate = 0.05

[impute]
n_trees = 8
max_iterations = 2

[preselect]
enabled = false

[mob]
mc_replicates = 99

[validate]
enabled = false
{extra}
""",
        encoding="utf-8",
    )
    return str(path)


def test_generate_success(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "out")
    assert main(["generate", "--config", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    assert "data.csv" in out
    assert "2 artifacts in" in out
    assert os.path.exists(tmp_path / "out" / "manifest.json")


def test_seed_and_out_overrides(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "ignored")
    assert main(["generate", "--config", cfg, "--seed", "42", "--out", str(tmp_path / "a")]) == EXIT_OK
    first = capsys.readouterr().out.splitlines()[0].split()[0]
    assert main(["generate", "--config", cfg, "--seed", "42", "--out", str(tmp_path / "b")]) == EXIT_OK
    second = capsys.readouterr().out.splitlines()[0].split()[0]
    assert first == second
    assert main(["generate", "--config", cfg, "--seed", "43", "--out", str(tmp_path / "c")]) == EXIT_OK
    third = capsys.readouterr().out.splitlines()[0].split()[0]
    assert first != third
    assert os.path.exists(tmp_path / "a" / "data.csv")


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.toml")]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_toml_parse_error(tmp_path, capsys):
    path = tmp_path / "broken.toml"
    path.write_text("[pipeline\nmaster_seed = 5\n", encoding="utf-8")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    assert "cannot parse" in capsys.readouterr().err


def test_unknown_key_exits_config(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "out", extra="\n[mob2]\nx = 1\n")
    assert main(["generate", "--config", cfg]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_semantic_config_error_exits_config(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[synthetic]\nn = 10\n", encoding="utf-8")
    assert main(["generate", "--config", str(path)]) == EXIT_CONFIG
    assert "n must be" in capsys.readouterr().err


def test_stage_failure_exits_stage(tmp_path, capsys):
    path = tmp_path / "csv.toml"
    path.write_text(
        f'[input]\nkind = "csv"\npath = "{tmp_path / "nope.csv"}"\n', encoding="utf-8"
    )
    assert main(["impute", "--config", str(path)]) == EXIT_STAGE
    assert "ingest" in capsys.readouterr().err


def test_impute_verb_end_to_end(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "out")
    assert main(["impute", "--config", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    assert "data_imputed.csv" in out
    assert "impute_convergence.csv" in out


def test_parser_requires_verb_and_config():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["bogus"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run"])  # --config is required
    args = build_parser().parse_args(["serve", "--port", "9000"])
    assert args.port == 9000 and args.host == "127.0.0.1"
