import csv
import json
from pathlib import Path

import pytest

from dsmflow import cli

GOLDEN = Path(__file__).parent / "golden"


def run(argv, out):
    return cli.main([*argv, "--out-dir", str(out)]) if argv[0] != "list" else cli.main(argv)


def load(path):
    return json.loads(Path(path).read_text())


@pytest.mark.parametrize("argv,code", [
    (["solve", "--problem", "linear-spd-2"], cli.EXIT_OK),
    (["solve", "--problem", "exp-no-solution"], cli.EXIT_DIVERGED),
    (["solve", "--problem", "linear-spd-2", "--t-max", "2"], cli.EXIT_NOT_CONVERGED),
    (["solve", "--problem", "rank-deficient-psd", "--solver", "regularized"], cli.EXIT_OK),
])
def test_exit_codes(tmp_path, argv, code):
    assert run(argv, tmp_path) == code


@pytest.mark.parametrize("argv", [
    ["solve", "--problem", "nonexistent"],
    ["solve", "--problem", "linear-spd-2", "--bogus"],
    ["solve", "--problem", "rank-deficient-psd", "--solver", "regularized", "--b", "1.5"],
    ["solve", "--problem", "linear-spd-2", "--rtol", "-1"],
    ["solve", "--problem", "linear-spd-2", "--u0", "1,2,3"],
])
def test_config_errors(tmp_path, argv):
    try:
        code = run(argv, tmp_path)
    except SystemExit as exc:
        code = exc.code
    assert code == cli.EXIT_CONFIG


def test_trace_header_golden(tmp_path):
    run(["solve", "--problem", "linear-spd-2", "--run-id", "r"], tmp_path)
    with open(tmp_path / "r" / "trace.csv") as fh:
        header = fh.readline()
    assert header == (GOLDEN / "trace_header.csv").read_text()


def test_newton_trace_leaves_schedule_columns_blank(tmp_path):
    run(["solve", "--problem", "linear-spd-2", "--run-id", "r"], tmp_path)
    with open(tmp_path / "r" / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["a"] == "" and r["ratio_v_over_a"] == "" for r in rows)
    assert float(rows[0]["t"]) == 0.0


def test_regularized_trace_has_schedule(tmp_path):
    run(["solve", "--problem", "rank-deficient-psd", "--solver", "regularized",
         "--run-id", "r", "--t-max", "20"], tmp_path)
    with open(tmp_path / "r" / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        t, a = float(r["t"]), float(r["a"])
        assert a == pytest.approx((1 + t) ** -0.5, rel=1e-14)


def test_report_json_keys(tmp_path):
    run(["diagnose", "--problem", "rank-deficient-psd", "--solver", "regularized",
         "--run-id", "r"], tmp_path)
    doc = load(tmp_path / "r" / "report.json")
    assert list(doc)[:2] == ["schema", "timestamp"]
    for key in ("run_id", "problem", "solver", "config", "schedule", "stop_reason",
                "final_u", "counters", "diagnostics", "exit_code"):
        assert key in doc
    assert doc["schedule"] == {"family": "PowerLaw", "a0": 1.0, "b": 0.5}
    assert doc["diagnostics_passed"] is True


def test_report_is_deterministic(tmp_path):
    for d in ("a", "b"):
        run(["diagnose", "--problem", "linear-spd-2", "--run-id", "r"], tmp_path / d)
    docs = [load(tmp_path / d / "r" / "report.json") for d in ("a", "b")]
    for doc in docs:
        doc.pop("timestamp")
    assert docs[0] == docs[1]
    traces = [(tmp_path / d / "r" / "trace.csv").read_bytes() for d in ("a", "b")]
    assert traces[0] == traces[1]


def test_divergence_note_reported(tmp_path, capsys):
    run(["solve", "--problem", "exp-no-solution", "--run-id", "r"], tmp_path)
    doc = load(tmp_path / "r" / "report.json")
    assert doc["stop_reason"] == "Diverged"
    assert any("decayed monotonically" in n for n in doc["notes"])
    assert "decayed monotonically" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["diagnose", "--problem", "linear-spd-2"],
    ["diagnose", "--problem", "rank-deficient-psd", "--solver", "regularized"],
])
def test_corrupted_trace_fails_diagnose(tmp_path, argv):
    assert run(argv, tmp_path / "clean") == cli.EXIT_OK
    assert run([*argv, "--inject-corrupt-trace"], tmp_path / "bad") == cli.EXIT_NOT_CONVERGED


def test_diagnose_all(tmp_path, capsys):
    assert run(["diagnose", "--all"], tmp_path) == cli.EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out and all(line.startswith("PASS") for line in out)


def test_list_json(capsys):
    assert cli.main(["list", "--json"]) == cli.EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert {d["name"] for d in doc} >= {"linear-spd-2", "cubic-monotone-pde"}


def test_list_regime_filter(capsys):
    cli.main(["list", "--json", "--regime", "NoSolution"])
    assert [d["name"] for d in json.loads(capsys.readouterr().out)] == ["exp-no-solution"]


def test_compare_csv(tmp_path):
    assert run(["compare", "--problem", "exp-no-solution", "--run-id", "c"],
               tmp_path) == cli.EXIT_OK
    with open(tmp_path / "c" / "compare.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(cli.COMPARE_COLUMNS)
    assert {r["method"] for r in rows} == {"newton-flow", "regularized-flow", "discrete-newton"}
    doc = load(tmp_path / "c" / "report.json")
    assert all(m["stop_reason"] == "Diverged" for m in doc["methods"].values())


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["solve", "--problem", "linear-spd-2", "--run-id", "r"]) == cli.EXIT_OK
    assert (tmp_path / "env" / "r" / "trace.csv").exists()


def test_u0_sweep(tmp_path):
    code = run(["solve", "--problem", "linear-spd-2", "--u0-sweep", "3", "--seed", "7",
                "--run-id", "s"], tmp_path)
    assert code == cli.EXIT_OK
    assert sorted(p.name for p in (tmp_path / "s").iterdir()) == [
        "sweep-000", "sweep-001", "sweep-002"]


@pytest.mark.parametrize("spec,expected", [
    ("zero", [0.0, 0.0]), ("ones", [1.0, 1.0]), ("ones*3", [3.0, 3.0]),
    ("2*ones", [2.0, 2.0]), ("1.5,-2", [1.5, -2.0]),
])
def test_parse_u0(spec, expected):
    assert list(cli.parse_u0(spec, 2)) == expected
