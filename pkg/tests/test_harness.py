import csv
import dataclasses
import json
import math
from collections import defaultdict
from pathlib import Path

import jax
import numpy as np
import pytest
from test_utils import deterministic_chain, tiny_experiment

import pushforward.harness as harness
from pushforward.agents import ScriptedAgent
from pushforward.harness import (
    AGGREGATE_COLUMNS,
    RAW_COLUMNS,
    MetricSeries,
    RunConfig,
    SweepConfig,
    aggregate,
    checkpoint_mask,
    horizon_sweep,
    rollout,
    run_single,
    run_sweep,
    window_frequencies,
    write_horizon_csv,
    write_metadata,
    write_sweep_artifacts,
)


def _series(frequencies, seed=0, agent="psrl_pi", window=2):
    return MetricSeries("test", "riverswim-n4", agent, seed, window, np.asarray(frequencies, dtype=float))


def test_window_frequencies():
    visited = np.array([0, 1, 1, 0, 1, 1, 1, 0])
    np.testing.assert_allclose(window_frequencies(visited, 4), [0.5, 0.75, 0.75, 0.75, 0.75])
    np.testing.assert_allclose(window_frequencies(visited, 1), visited)
    with pytest.raises(ValueError):
        window_frequencies(visited, 9)


def test_run_config_validation():
    assert RunConfig(total_steps=1000, warmup_fraction=0.1).warmup_steps == 100
    with pytest.raises(ValueError):
        RunConfig(total_steps=50, window=100)
    with pytest.raises(ValueError):
        RunConfig(warmup_fraction=1.0)
    with pytest.raises(ValueError):
        RunConfig(seeds=[])
    with pytest.raises(ValueError):
        RunConfig(seeds=[1, 1])
    with pytest.raises(ValueError):
        RunConfig(gamma=1.0)


def test_always_left_never_sees_the_end(tmp_path):
    series = run_single(tiny_experiment(str(tmp_path), agent="always_left"), seed=0)
    assert series.frequencies.shape == (300 - 50 + 1,)
    np.testing.assert_array_equal(series.frequencies, 0.0)
    np.testing.assert_array_equal(series.steps, np.arange(50, 301))


def test_always_right_on_a_deterministic_chain():
    n, window, total_steps = 6, 20, 60
    env = deterministic_chain(n)
    agent = ScriptedAgent.constant(n, 2, env.right_action)
    visited, losses = rollout(env, agent, jax.random.PRNGKey(0), total_steps, warmup_steps=0)
    # the state before step t is min(t, n - 1): the end is reached by step n - 1
    np.testing.assert_array_equal(np.flatnonzero(visited)[0], n - 1)
    frequencies = window_frequencies(np.asarray(visited), window)
    assert frequencies[0] == pytest.approx((window - n + 1) / window)
    np.testing.assert_allclose(frequencies[n:], 1.0)
    np.testing.assert_array_equal(losses, 0.0)


def test_run_single_is_deterministic(tmp_path):
    config = tiny_experiment(str(tmp_path), agent="iqql", total_steps=200)
    a = run_single(config, seed=3)
    b = run_single(config, seed=3)
    np.testing.assert_array_equal(a.frequencies, b.frequencies)
    assert not a.diverged
    assert np.all((a.frequencies >= 0) & (a.frequencies <= 1))


def test_latent_riverswim_counts_the_latent_end(tmp_path):
    config = tiny_experiment(str(tmp_path), agent="random", env="latent_riverswim", n=3, total_steps=400)
    series = run_single(config, seed=0)
    assert series.env == "latent_riverswim-n3"
    assert np.all((series.frequencies >= 0) & (series.frequencies <= 1))


def test_aggregate_arithmetic():
    agg = aggregate([_series([0.2, 0.2], seed=0), _series([0.4, 0.4], seed=1)])
    np.testing.assert_allclose(agg.mean, [0.3, 0.3])
    np.testing.assert_allclose(agg.stderr, [0.1, 0.1])
    assert agg.num_seeds == 2

    single = aggregate([_series([0.1, 0.7])])
    np.testing.assert_array_equal(single.mean, [0.1, 0.7])
    np.testing.assert_array_equal(single.stderr, [0.0, 0.0])

    constant = aggregate([_series([0.5, 0.5], seed=s) for s in range(5)])
    np.testing.assert_allclose(constant.stderr, 0.0, atol=1e-15)

    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([_series([0.1]), _series([0.1, 0.2], seed=1)])


def test_seed_isolation(tmp_path):
    forward = run_sweep(tiny_experiment(str(tmp_path), seeds=(0, 1, 2)))
    backward = run_sweep(tiny_experiment(str(tmp_path), seeds=(2, 1, 0)))
    assert [s.seed for s in forward.series] == [0, 1, 2]
    assert [s.seed for s in backward.series] == [2, 1, 0]
    for s in forward.series:
        (twin,) = [b for b in backward.series if b.seed == s.seed]
        np.testing.assert_array_equal(s.frequencies, twin.frequencies)


def test_checkpoint_mask():
    steps = np.arange(50, 131)
    kept = steps[checkpoint_mask(steps, 50, 130)]
    np.testing.assert_array_equal(kept, [50, 100, 130])


def _read_csv(path: Path):
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        return reader.fieldnames, list(reader)


def test_artifacts_recompute_from_the_raw_csv(tmp_path):
    config = tiny_experiment(str(tmp_path), seeds=(0, 1, 2), total_steps=310, checkpoint_every=25)
    result = run_sweep(config)
    raw_path, aggregate_path = write_sweep_artifacts(str(tmp_path), result, config.run)

    raw_columns, raw_rows = _read_csv(raw_path)
    agg_columns, agg_rows = _read_csv(aggregate_path)
    assert tuple(raw_columns) == RAW_COLUMNS
    assert tuple(agg_columns) == AGGREGATE_COLUMNS
    assert int(agg_rows[-1]["step"]) == 310
    assert [int(r["step"]) for r in agg_rows[:3]] == [50, 75, 100]

    by_step = defaultdict(list)
    for row in raw_rows:
        by_step[int(row["step"])].append(float(row["window_visit_freq"]))
    assert len(by_step) == len(agg_rows)
    for row in agg_rows:
        values = by_step[int(row["step"])]
        assert int(row["num_seeds"]) == len(values) == 3
        mean = sum(values) / len(values)
        stderr = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1)) / math.sqrt(len(values))
        assert float(row["mean"]) == pytest.approx(mean, abs=1e-12)
        assert float(row["stderr"]) == pytest.approx(stderr, abs=1e-12)


def test_metadata_sidecar(tmp_path):
    config = tiny_experiment(str(tmp_path))
    path = tmp_path / "metadata.json"
    write_metadata(path, config, 1.5, "run")
    payload = json.loads(path.read_text())
    assert payload["run"]["gamma"] == config.run.gamma
    assert payload["agent"]["name"] == "psrl_pi"
    assert payload["metadata"]["command"] == "run"
    assert payload["metadata"]["duration_seconds"] == 1.5
    assert isinstance(payload["metadata"]["version"], str)


def test_horizon_sweep_of_scripted_agents(tmp_path):
    base = tiny_experiment(str(tmp_path), seeds=(0,), total_steps=200)
    config = SweepConfig(
        env=base.env,
        agent=base.agent,
        run=dataclasses.replace(base.run, horizons=[3, 5]),
        output=base.output,
        jobs=1,
        agents=["always_left", "random"],
    )
    result, table = horizon_sweep(config)
    assert result.ok
    expected = [(3, "always_left"), (3, "random"), (5, "always_left"), (5, "random")]
    assert [(row.n, row.agent) for row in table] == expected
    assert all(row.mean == 0.0 for row in table if row.agent == "always_left")
    assert {row.env for row in table} == {"riverswim-n3", "riverswim-n5"}

    path = tmp_path / "horizon_table.csv"
    write_horizon_csv(path, table)
    _, rows = _read_csv(path)
    assert len(rows) == 4 and rows[0]["n"] == "3"


@pytest.mark.slow
def test_psrl_beats_uniform_random(tmp_path):
    finals = {}
    for agent in ("psrl_pi", "random"):
        config = tiny_experiment(str(tmp_path), agent=agent, seeds=range(10), total_steps=5000, window=100, n=4)
        result = run_sweep(config, jobs=1)
        assert result.ok
        finals[agent] = float(result.aggregates[0].mean[-1])
    assert finals["psrl_pi"] > 0
    assert finals["psrl_pi"] > finals["random"]


def _diverging(config):
    return dataclasses.replace(config, agent=dataclasses.replace(config.agent, lr=math.inf))


def test_diverged_run_is_cut_before_the_first_bad_window(tmp_path):
    config = _diverging(tiny_experiment(str(tmp_path), agent="iqql", total_steps=300, window=20))
    series = run_single(config, seed=0)
    assert series.diverged
    # the first update (on the last warm-up step) sees finite weights; every later loss is NaN
    first_bad = config.run.warmup_steps
    assert len(series.frequencies) == first_bad - config.run.window + 1
    np.testing.assert_array_equal(series.steps, np.arange(20, first_bad + 1))


def test_diverged_seeds_are_left_out_of_the_aggregate(tmp_path, monkeypatch):
    config = tiny_experiment(str(tmp_path), agent="iqql", seeds=(0, 1, 2), total_steps=300, window=20)
    run_single_as_configured = harness.run_single

    def run_single_diverging_seed_one(config, seed):
        return run_single_as_configured(_diverging(config) if seed == 1 else config, seed)

    monkeypatch.setattr(harness, "run_single", run_single_diverging_seed_one)
    result = run_sweep(config)
    assert not result.ok
    assert result.failed_seeds == [("riverswim-n4", "iqql", 1)]

    (agg,) = result.aggregates
    healthy = [s for s in result.series if not s.diverged]
    assert agg.num_seeds == 2 and [s.seed for s in healthy] == [0, 2]
    np.testing.assert_allclose(agg.mean, np.mean([s.frequencies for s in healthy], axis=0))
