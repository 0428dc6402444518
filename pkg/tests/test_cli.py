"""Command-line interface: outputs, exit codes, determinism, artifacts."""

import json

import pytest

from carnot.cli import main
from carnot.report import write_csv


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# overlay


def test_overlay_prints_tree(capsys):
    code, out, _ = run_cli(capsys, "overlay", "--nodes", "23",
                           "--committee-size", "4", "--seed", "2a")
    assert code == 0
    doc = json.loads(out)
    assert doc["k"] == 5
    assert sorted(x for c in doc["committees"] for x in c) == list(range(23))


def test_overlay_deterministic(capsys):
    args = ("overlay", "--nodes", "23", "--committee-size", "4", "--seed", "7")
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second


def test_overlay_rejects_oversized_committee(capsys):
    code, _, err = run_cli(capsys, "overlay", "--nodes", "3",
                           "--committee-size", "4")
    assert code == 2
    assert "error:" in err


# ---------------------------------------------------------------------------
# size


def test_size_solves(capsys):
    code, out, _ = run_cli(capsys, "size", "--nodes", "10000",
                           "--failure-budget", "1e-4")
    assert code == 0
    doc = json.loads(out)
    assert doc["k"] % 2 == 1 and doc["prob"] <= 1e-4
    assert doc["n"] <= doc["n_upper_bound"]


def test_size_refuses_sample_at_least_adversary(capsys):
    code, _, err = run_cli(capsys, "size", "--nodes", "100",
                           "--failure-budget", "1e-3",
                           "--adversary-fraction", "0.2",
                           "--sample-fraction", "0.25")
    assert code == 2
    assert "error:" in err


# ---------------------------------------------------------------------------
# analyze


def test_analyze_writes_csv_and_figure(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "analyze", "committee-tail",
                           "--out", str(tmp_path))
    assert code == 0
    doc = json.loads(out)
    assert doc["checks"]["ok"]
    csv_path = tmp_path / "committee-tail.csv"
    png_path = tmp_path / "committee-tail.png"
    assert csv_path.exists() and png_path.exists()
    header = csv_path.read_text().splitlines()[0]
    assert header == "n_mu,exact,bound,hoeffding"
    assert png_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_analyze_no_plot_skips_figure(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "analyze", "sizing",
                           "--out", str(tmp_path), "--no-plot")
    assert code == 0
    assert (tmp_path / "sizing.csv").exists()
    assert not (tmp_path / "sizing.png").exists()


def test_analyze_csv_deterministic(tmp_path, capsys):
    run_cli(capsys, "analyze", "sizing", "--out", str(tmp_path / "a"),
            "--no-plot")
    run_cli(capsys, "analyze", "sizing", "--out", str(tmp_path / "b"),
            "--no-plot")
    assert (tmp_path / "a" / "sizing.csv").read_bytes() == (
        tmp_path / "b" / "sizing.csv"
    ).read_bytes()


def test_analyze_unknown_preset_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["analyze", "not-a-preset"])


# ---------------------------------------------------------------------------
# simulate


def test_simulate_happy(tmp_path, capsys):
    trace_file = tmp_path / "trace.jsonl"
    code, out, _ = run_cli(capsys, "simulate", "--nodes", "10",
                           "--committee-size", "3", "--views", "10",
                           "--out", str(trace_file))
    assert code == 0
    doc = json.loads(out)
    assert doc["ok"] and doc["commits_total"] > 0
    assert trace_file.exists()


def test_simulate_replay_round_trip(tmp_path, capsys):
    trace_file = tmp_path / "trace.jsonl"
    run_cli(capsys, "simulate", "--nodes", "10", "--committee-size", "3",
            "--adversaries", "2", "--behavior", "silent", "--views", "10",
            "--out", str(trace_file))
    code, out, _ = run_cli(capsys, "simulate", "--replay", str(trace_file))
    assert code == 0
    assert json.loads(out) == {"identical": True, "diffs": []}


def test_simulate_scenario_file(tmp_path, capsys):
    from carnot.sim import Scenario

    doc = Scenario(n_nodes=10, committee_size=3, adversary_count=2,
                   behavior="withhold-votes", views_to_run=8,
                   master_seed=5).to_dict()
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run_cli(capsys, "simulate", "--scenario", str(path))
    assert code == 0
    assert json.loads(out)["ok"]


def test_simulate_bad_scenario_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run_cli(capsys, "simulate", "--scenario", str(path))
    assert code == 2 and "error:" in err


def test_simulate_missing_file(capsys):
    code, _, err = run_cli(capsys, "simulate", "--replay", "/no/such/file")
    assert code == 2 and "error:" in err


def test_simulate_invalid_params(capsys):
    code, _, err = run_cli(capsys, "simulate", "--nodes", "3",
                           "--committee-size", "4")
    assert code == 2 and "error:" in err


# ---------------------------------------------------------------------------
# report helpers


def test_write_csv_requires_rows(tmp_path):
    from carnot.errors import InvalidInputError

    with pytest.raises(InvalidInputError):
        write_csv([], tmp_path / "empty.csv")


def test_write_csv_layout(tmp_path):
    path = write_csv([{"a": 1, "b": 2}, {"a": 3, "b": 4}], tmp_path / "t.csv")
    assert path.read_bytes() == b"a,b\r\n1,2\r\n3,4\r\n"
