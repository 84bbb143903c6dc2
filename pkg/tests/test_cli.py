import csv
import json

import pytest

from pushforward.harness import AGGREGATE_COLUMNS, AGGREGATE_CSV, HORIZON_CSV, METADATA_JSON, RAW_CSV
from pushforward.main.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main


SMALL_RUN = ["--env.n", "4", "--run.seeds", "0,1", "--run.total_steps", "200", "--run.window", "50", "--jobs", "1"]


def _write_aggregate(path, steps, agent="psrl_pi"):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=AGGREGATE_COLUMNS)
        w.writeheader()
        for step in steps:
            w.writerow(dict(suite="t", env="riverswim-n4", agent=agent, step=step, mean=0.5, stderr=0.1, num_seeds=2))
    return str(path)


@pytest.mark.entry
def test_usage():
    assert main([]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK
    assert main(["train"]) == EXIT_USAGE


@pytest.mark.entry
def test_run_writes_its_artifacts(tmp_path):
    assert main(["run", "--out", str(tmp_path), *SMALL_RUN]) == EXIT_OK
    for name in (RAW_CSV, AGGREGATE_CSV, METADATA_JSON):
        assert (tmp_path / name).exists()


@pytest.mark.entry
def test_run_exits_1_when_training_diverges(tmp_path):
    args = ["run", "--out", str(tmp_path), *SMALL_RUN, "--agent.name", "iqql", "--agent.lr", ".inf"]
    assert main(args) == EXIT_FAILED
    assert (tmp_path / RAW_CSV).exists()


@pytest.mark.entry
def test_repeated_runs_write_identical_raw_csvs(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    for out in (first, second):
        assert main(["run", "--out", str(out), *SMALL_RUN, "--agent.name", "iqql"]) == EXIT_OK
    assert (first / RAW_CSV).read_bytes() == (second / RAW_CSV).read_bytes()
    assert (first / AGGREGATE_CSV).read_bytes() == (second / AGGREGATE_CSV).read_bytes()


@pytest.mark.entry
def test_run_rejects_unknown_keys(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--env.nn", "4"]) == EXIT_USAGE
    assert main(["run", "--out", str(tmp_path), "--run.window", "0"]) == EXIT_USAGE
    assert not (tmp_path / RAW_CSV).exists()


@pytest.mark.entry
def test_sweep_writes_the_horizon_table(tmp_path):
    args = ["sweep", "--out", str(tmp_path), "--agents", "always_left,random", "--run.horizons", "3,4", *SMALL_RUN]
    assert main(args) == EXIT_OK
    with open(tmp_path / HORIZON_CSV) as f:
        rows = list(csv.DictReader(f))
    expected = [("3", "always_left"), ("3", "random"), ("4", "always_left"), ("4", "random")]
    assert [(r["n"], r["agent"]) for r in rows] == expected


@pytest.mark.entry
def test_verify(tmp_path):
    assert main(["verify", "--suite", "lemma2", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "verify_report.json").exists()
    assert main(["verify", "--suite", "lemma2", "--lemma2_instances", "4", "--jobs", "4", "--out", "null"]) == EXIT_OK

    args = ["verify", "--suite", "fixed_point", "--slack_scale", "0", "--fixed_point_instances", "1", "--out", "null"]
    assert main(args) == EXIT_FAILED


@pytest.mark.entry
@pytest.mark.slow
def test_verify_reports_match_across_job_counts(tmp_path):
    small = ["--lemma1_instances", "2", "--lemma2_instances", "3", "--fixed_point_instances", "1"]
    small += ["--num_atoms", "500"]
    reports = []
    for jobs in ("1", "2"):
        out = tmp_path / f"jobs{jobs}"
        main(["verify", *small, "--jobs", jobs, "--out", str(out)])
        reports.append(json.loads((out / "verify_report.json").read_text()))
    assert reports[0]["crashed"] == reports[1]["crashed"] == []
    assert reports[0]["suites"] == reports[1]["suites"]


@pytest.mark.entry
def test_plot(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", "--inputs", str(empty), "--output", str(tmp_path / "e.svg")]) == EXIT_USAGE

    single = _write_aggregate(tmp_path / "a.csv", [50, 100, 150])
    first, second = tmp_path / "first.svg", tmp_path / "second.svg"
    assert main(["plot", "--inputs", single, "--output", str(first)]) == EXIT_OK
    assert main(["plot", "--inputs", single, "--output", str(second)]) == EXIT_OK
    assert first.read_bytes().startswith(b"<?xml")
    assert first.read_bytes() == second.read_bytes()

    other = _write_aggregate(tmp_path / "b.csv", [50, 100], agent="iqql")
    assert main(["plot", "--inputs", f"{single},{other}", "--output", str(tmp_path / "m.svg")]) == EXIT_USAGE

    latent = tmp_path / "latent.svg"
    assert main(["plot", "--latent_map", "4", "--output", str(latent)]) == EXIT_OK
    assert latent.exists()
