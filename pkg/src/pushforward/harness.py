"""
Multi-seed experiment runner: one compiled `lax.scan` per seed over the interaction budget, trailing-window
visitation frequencies of the most desired state, seed aggregates and their CSV/JSON artifacts.
"""
import csv
import dataclasses
import functools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import draccus
import equinox as eqx
import jax
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, Bool, Float, PRNGKeyArray

import pushforward.logging as pf_logging
from pushforward.agents import AgentConfig
from pushforward.agents.base import Agent
from pushforward.distributed import RayConfig, SeedOutcome, map_seeds
from pushforward.envs import EnvConfig
from pushforward.envs.mdp import TabularEnv, Transition
from pushforward.utils.jax_utils import jnp_to_python


logger = logging.getLogger(__name__)

RAW_COLUMNS = ("suite", "env", "agent", "seed", "step", "window_visit_freq")
AGGREGATE_COLUMNS = ("suite", "env", "agent", "step", "mean", "stderr", "num_seeds")
HORIZON_COLUMNS = ("suite", "env", "agent", "n", "mean", "stderr", "num_seeds")

RAW_CSV = "raw.csv"
AGGREGATE_CSV = "aggregate.csv"
HORIZON_CSV = "horizon_table.csv"
METADATA_JSON = "metadata.json"


@dataclass(frozen=True)
class RunConfig:
    total_steps: int = 5000
    warmup_fraction: float = 0.1  # the first fraction of the interactions are uniformly random
    gamma: float = 0.95
    seeds: List[int] = field(default_factory=lambda: list(range(50)))
    window: int = 100  # trailing window of the visitation metric
    suite: str = "default"  # tag of the experiment in the CSV rows
    checkpoint_every: int = 50  # CSV rows are written every this many steps, plus the final step
    horizons: List[int] = field(default_factory=lambda: [4, 6, 8, 10, 12])  # chain lengths of the horizon sweep

    def __post_init__(self):
        if self.window < 1 or self.total_steps < self.window:
            raise ValueError(f"need 1 <= window <= total_steps, got window={self.window}, steps={self.total_steps}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if len(self.seeds) == 0:
            raise ValueError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be distinct, got {self.seeds}")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be positive, got {self.checkpoint_every}")

    @property
    def warmup_steps(self) -> int:
        return int(self.warmup_fraction * self.total_steps)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/default"
    log_file: Optional[str] = None
    wandb: pf_logging.WandbConfig = field(default_factory=pf_logging.WandbConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    jobs: Optional[int] = None  # parallel seeds; None uses every logical core
    ray: RayConfig = field(default_factory=RayConfig)


@dataclass(frozen=True)
class SweepConfig(ExperimentConfig):
    """A horizon sweep: every agent in `agents` (sharing the `agent` hyperparameters) at every `run.horizons` n."""

    agents: List[str] = field(default_factory=lambda: ["psrl_pi", "iqql", "daif"])


def env_label(env: EnvConfig) -> str:
    return f"{env.name}-n{env.n}"


@dataclass(frozen=True)
class MetricSeries:
    """
    Visitation frequency of the most desired state over the trailing window. `frequencies[i]` covers the window
    ending after interaction `window + i`, so `steps` runs from `window` to `total_steps`. A diverged run is cut
    before the first window that overlaps a non-finite training loss.
    """

    suite: str
    env: str
    agent: str
    seed: int
    window: int
    frequencies: np.ndarray
    diverged: bool = False

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.window, self.window + len(self.frequencies))


@dataclass(frozen=True)
class Aggregate:
    """Mean and standard error (sample std / √seeds) across seeds at every step."""

    suite: str
    env: str
    agent: str
    steps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    num_seeds: int


@dataclass(frozen=True)
class SweepResult:
    series: List[MetricSeries]
    aggregates: List[Aggregate]
    failed_seeds: List[Tuple[str, str, int]]  # (env, agent, seed)

    @property
    def ok(self) -> bool:
        return not self.failed_seeds


@dataclass(frozen=True)
class HorizonRow:
    suite: str
    env: str
    agent: str
    n: int
    mean: float
    stderr: float
    num_seeds: int


def window_frequencies(visited: np.ndarray, window: int) -> np.ndarray:
    """Fraction of the `window` consecutive entries of `visited` that are set, for every full window."""
    visited = np.asarray(visited, dtype=np.int64)
    if window < 1 or window > len(visited):
        raise ValueError(f"window must lie in [1, {len(visited)}], got {window}")
    counts = np.concatenate([[0], np.cumsum(visited)])
    return (counts[window:] - counts[:-window]) / window


def rollout(
    env: TabularEnv, agent: Agent, key: PRNGKeyArray, total_steps: int, warmup_steps: int
) -> Tuple[Bool[Array, "step"], Float[Array, "step"]]:
    """
    Runs the interaction loop: act (uniformly random during warm-up), step the environment, store the transition and
    train. Returns whether the state occupied before each step is the most desired one and the per-step training loss.
    Training starts with the last warm-up step so that the first greedy action already has a trained policy.
    """

    def scan_fn(carry, t):
        agent, state = carry
        k_act, k_env, k_train = jax.random.split(jax.random.fold_in(key, t), 3)
        action = agent.act(state, t, warmup_steps, k_act)
        next_state, reward = env.step(state, action, k_env)
        next_state = next_state.astype(jnp.int32)
        agent = agent.observe(Transition(state, action, reward, next_state))
        agent, loss = jax.lax.cond(
            t >= warmup_steps - 1,
            lambda a: a.train(t, k_train),
            lambda a: (a, jnp.zeros((), dtype=jnp.result_type(float))),
            agent,
        )
        return (agent, next_state), (env.is_target(state), loss)

    init = (agent, jnp.asarray(env.initial_state, dtype=jnp.int32))
    _, (visited, losses) = jax.lax.scan(scan_fn, init, jnp.arange(total_steps))
    return visited, losses


@eqx.filter_jit
def _simulate(
    key: PRNGKeyArray, env_config: EnvConfig, agent_config: AgentConfig, total_steps: int, warmup_steps: int, gamma
):
    # the configs are hashable, so a sweep compiles once per (env, agent, run) and not once per seed
    k_agent, k_run = jax.random.split(key)
    env = env_config.build()
    agent = agent_config.build(env, gamma, total_steps, key=k_agent)
    return rollout(env, agent, k_run, total_steps, warmup_steps)


def run_single(config: ExperimentConfig, seed: int) -> MetricSeries:
    """One repetition. Deterministic given (config, seed)."""
    run = config.run
    visited, losses = _simulate(
        jax.random.PRNGKey(seed), config.env, config.agent, run.total_steps, run.warmup_steps, run.gamma
    )
    visited, losses = np.asarray(visited), np.asarray(losses)
    frequencies = window_frequencies(visited, run.window)

    diverged = not np.all(np.isfinite(losses))
    if diverged:
        first_bad = int(np.argmin(np.isfinite(losses)))
        logger.warning(f"{config.agent.name} diverged at step {first_bad} (seed {seed}); truncating its series")
        frequencies = frequencies[: max(0, first_bad - run.window + 1)]

    return MetricSeries(
        run.suite, env_label(config.env), config.agent.name, seed, run.window, frequencies, diverged=diverged
    )


def aggregate(series: Sequence[MetricSeries]) -> Aggregate:
    if not series:
        raise ValueError("cannot aggregate zero series")
    first = series[0]
    lengths = {len(s.frequencies) for s in series}
    if len(lengths) != 1:
        raise ValueError(f"series of {first.env}/{first.agent} have different lengths: {sorted(lengths)}")

    values = np.stack([s.frequencies for s in series])
    num_seeds = values.shape[0]
    mean = values.mean(axis=0)
    if num_seeds > 1:
        stderr = values.std(axis=0, ddof=1) / math.sqrt(num_seeds)
    else:
        stderr = np.zeros_like(mean)
    return Aggregate(first.suite, first.env, first.agent, first.steps, mean, stderr, num_seeds)


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """
    Runs every seed of `config.run.seeds` and aggregates the completed ones. Failed seeds (exceptions or diverged
    training) are reported in the result and left out of the aggregate.
    """
    run_fn = functools.partial(run_single, config)
    outcomes: List[SeedOutcome[MetricSeries]] = map_seeds(
        run_fn, config.run.seeds, jobs, config.ray, desc=f"{env_label(config.env)}/{config.agent.name}"
    )

    series = [o.result for o in outcomes if not o.failed]
    completed = [s for s in series if not s.diverged]
    failed = [(env_label(config.env), config.agent.name, o.seed) for o in outcomes if o.failed]
    failed += [(s.env, s.agent, s.seed) for s in series if s.diverged]

    aggregates = []
    if completed:
        if failed:
            failed_ids = sorted(f[2] for f in failed)
            logger.warning(f"aggregating {len(completed)} of {len(outcomes)} seeds; failed: {failed_ids}")
        aggregates.append(aggregate(completed))
    else:
        logger.error(f"every seed of {env_label(config.env)}/{config.agent.name} failed")

    return SweepResult(series, aggregates, failed)


def horizon_sweep(config: SweepConfig, jobs: int = 1) -> Tuple[SweepResult, List[HorizonRow]]:
    """
    Runs every agent at every horizon n. The table holds the final-window frequency aggregate of each
    (n, agent), i.e. the last point of its learning curve.
    """
    series: List[MetricSeries] = []
    aggregates: List[Aggregate] = []
    failed: List[Tuple[str, str, int]] = []
    rows: List[HorizonRow] = []

    for n in config.run.horizons:
        for name in config.agents:
            experiment = ExperimentConfig(
                env=dataclasses.replace(config.env, n=n),
                agent=dataclasses.replace(config.agent, name=name),
                run=config.run,
                output=config.output,
                jobs=config.jobs,
                ray=config.ray,
            )
            logger.info(f"horizon sweep: {name} at n={n}")
            result = run_sweep(experiment, jobs)
            series += result.series
            aggregates += result.aggregates
            failed += result.failed_seeds
            for agg in result.aggregates:
                rows.append(
                    HorizonRow(
                        agg.suite, agg.env, agg.agent, n, float(agg.mean[-1]), float(agg.stderr[-1]), agg.num_seeds
                    )
                )

    return SweepResult(series, aggregates, failed), rows


def checkpoint_mask(steps: np.ndarray, checkpoint_every: int, total_steps: int) -> np.ndarray:
    return (steps % checkpoint_every == 0) | (steps == total_steps)


def _write_csv(path: Path, fieldnames: Sequence[str], rows: List[Dict]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def write_raw_csv(path: Path, series: Sequence[MetricSeries], run: RunConfig):
    rows = []
    for s in series:
        steps = s.steps
        keep = checkpoint_mask(steps, run.checkpoint_every, run.total_steps)
        for step, freq in zip(steps[keep], s.frequencies[keep]):
            rows.append(
                dict(
                    suite=s.suite,
                    env=s.env,
                    agent=s.agent,
                    seed=s.seed,
                    step=int(step),
                    window_visit_freq=jnp_to_python(freq),
                )
            )
    _write_csv(path, RAW_COLUMNS, rows)


def write_aggregate_csv(path: Path, aggregates: Sequence[Aggregate], run: RunConfig):
    rows = []
    for agg in aggregates:
        keep = checkpoint_mask(agg.steps, run.checkpoint_every, run.total_steps)
        for step, mean, stderr in zip(agg.steps[keep], agg.mean[keep], agg.stderr[keep]):
            rows.append(
                dict(
                    suite=agg.suite,
                    env=agg.env,
                    agent=agg.agent,
                    step=int(step),
                    mean=float(mean),
                    stderr=float(stderr),
                    num_seeds=agg.num_seeds,
                )
            )
    _write_csv(path, AGGREGATE_COLUMNS, rows)


def write_horizon_csv(path: Path, rows: Sequence[HorizonRow]):
    _write_csv(path, HORIZON_COLUMNS, [dataclasses.asdict(r) for r in rows])


def write_metadata(path: Path, config: ExperimentConfig, duration_seconds: float, command: str):
    """
    The resolved config plus a `metadata` entry. The file loads as a config again (the `metadata` key is ignored).
    """
    payload = draccus.encode(config)
    payload["metadata"] = {
        "command": command,
        "version": pf_logging.describe_version(),
        "duration_seconds": duration_seconds,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def write_sweep_artifacts(out_dir: str, result: SweepResult, run: RunConfig) -> List[Path]:
    out = Path(out_dir)
    paths = [out / RAW_CSV, out / AGGREGATE_CSV]
    write_raw_csv(paths[0], result.series, run)
    write_aggregate_csv(paths[1], result.aggregates, run)
    return paths


def log_aggregates_to_wandb(aggregates: Sequence[Aggregate], run: RunConfig):
    import wandb

    if not pf_logging.is_wandb_available():
        return
    by_step: Dict[int, Dict[str, float]] = {}
    for agg in aggregates:
        keep = checkpoint_mask(agg.steps, run.checkpoint_every, run.total_steps)
        for step, mean, stderr in zip(agg.steps[keep], agg.mean[keep], agg.stderr[keep]):
            metrics = by_step.setdefault(int(step), {})
            metrics[f"{agg.env}/{agg.agent}/mean"] = jnp_to_python(mean)
            metrics[f"{agg.env}/{agg.agent}/stderr"] = jnp_to_python(stderr)
    for step in sorted(by_step):
        wandb.log(by_step[step], step=step)
    for agg in aggregates:
        wandb.run.summary[f"{agg.env}/{agg.agent}/final_window_freq"] = float(agg.mean[-1])
