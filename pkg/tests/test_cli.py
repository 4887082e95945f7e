import json
import subprocess
import sys

import pytest

from sbpd.cli import main
from sbpd.experiment import read_trace


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for word in ("experiment", "solve", "reference", "check"):
        assert word in out


def test_experiment_subcommand_runs(tmp_path):
    code = main(["experiment", "simplex-tv", "--n", "8", "--m", "9",
                 "--seed", "2", "--iterations", "120",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "trace.csv").exists()
    assert (tmp_path / "meta.json").exists()


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({
        "experiment": "simplex-tv", "n": 8, "m": 9, "seed": 2,
        "iterations": 500, "output_dir": str(tmp_path / "out"),
    }))
    assert main(["solve", "--config", str(config), "--iterations", "80"]) == 0
    records = read_trace(tmp_path / "out" / "trace.csv")
    assert records[-1].k == 80


def test_stochastic_flags_emit_run_traces(tmp_path):
    code = main(["experiment", "simplex-tv", "--n", "8", "--m", "10",
                 "--seed", "3", "--iterations", "100", "--batch", "4",
                 "--oracle", "paper-partial", "--repeats", "2",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "run_000.csv").exists()
    assert (tmp_path / "run_001.csv").exists()
    assert (tmp_path / "mean_trace.csv").exists()


def test_batch_flag_parsing(tmp_path):
    code = main(["experiment", "simplex-tv", "--n", "8", "--m", "9",
                 "--iterations", "60", "--batch", "full",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "simplex-tv", "--batch", "sometimes"])
    assert exc.value.code == 2


def test_unknown_oracle_mode_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "simplex-tv", "--oracle", "psychic"])
    assert exc.value.code == 2


def test_check_fast_passes(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert "estimate-inequality" in out


def test_reference_subcommand(tmp_path, capsys):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({
        "experiment": "simplex-tv", "n": 8, "m": 9, "seed": 4,
        "output_dir": str(tmp_path / "cache"),
    }))
    assert main(["reference", "--config", str(config)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"config_hash", "iterations", "ref_tol"}
    assert doc["iterations"] == 25_000  # default budget for 20000 iterations
    assert list((tmp_path / "cache").glob("reference_*.json"))


def test_missing_config_reports_json_error(capsys):
    assert main(["solve", "--config", "/nonexistent/c.json"]) == 2
    err = capsys.readouterr().err
    doc = json.loads(err)
    assert "error" in doc and "message" in doc


def test_bad_config_key_reports_json_error(tmp_path, capsys):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"experiment": "simplex-tv", "turbo": True}))
    assert main(["solve", "--config", str(config)]) == 2
    doc = json.loads(capsys.readouterr().err)
    assert "turbo" in doc["message"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sbpd.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "experiment" in proc.stdout
