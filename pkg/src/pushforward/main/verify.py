import functools
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import jax

import pushforward
from pushforward.distributed import map_seeds
from pushforward.logging import capture_time, describe_version, init_logger
from pushforward.theory.certificates import (
    EXACT_TOLERANCE,
    Certificate,
    fixed_point_suite,
    lemma1_suite,
    lemma2_suite,
    summarize,
    theorem1_suite,
)


logger = logging.getLogger(__name__)

SUITES = ("lemma1", "lemma2", "theorem1", "fixed_point")
REPORT_JSON = "verify_report.json"


@dataclass(frozen=True)
class VerifyConfig:
    suite: str = "all"  # "all" or one of SUITES
    seed: int = 0
    slack_scale: float = 1.0  # multiplies the Monte-Carlo slack; 0 demands exact inequalities
    tolerance: float = EXACT_TOLERANCE  # absolute tolerance of the exact (lemma2) checks
    p: float = 1.0
    gamma: float = 0.9
    num_atoms: int = 4000
    lemma1_instances: int = 100
    lemma2_instances: int = 50
    fixed_point_instances: int = 5
    out: Optional[str] = "runs/verify"  # directory of the JSON report; None skips writing it
    log_file: Optional[str] = None
    jobs: int = 1  # suites run as parallel ray tasks when > 1

    def __post_init__(self):
        if self.suite != "all" and self.suite not in SUITES:
            raise ValueError(f"suite must be 'all' or one of {SUITES}, got {self.suite!r}")
        if self.slack_scale < 0 or self.tolerance < 0:
            raise ValueError("slack_scale and tolerance must be nonnegative")
        if self.jobs < 1:
            raise ValueError(f"jobs must be positive, got {self.jobs}")

    @property
    def selected(self) -> List[str]:
        return list(SUITES) if self.suite == "all" else [self.suite]


def _run_suite(config: VerifyConfig, index: int) -> Tuple[List[Certificate], float]:
    name = SUITES[index]
    # every suite gets its own stream so that selecting one suite reproduces its part of "all"
    key = jax.random.fold_in(jax.random.PRNGKey(config.seed), index)
    runners: Dict[str, Callable[[jax.Array], List[Certificate]]] = {
        "lemma1": lambda k: lemma1_suite(
            k,
            config.lemma1_instances,
            gamma=config.gamma,
            p=config.p,
            num_atoms=config.num_atoms,
            slack_scale=config.slack_scale,
        ),
        "lemma2": lambda k: lemma2_suite(k, config.lemma2_instances, p=config.p, tolerance=config.tolerance),
        "theorem1": lambda k: theorem1_suite(
            k, config.gamma, config.p, num_atoms=config.num_atoms, slack_scale=config.slack_scale
        ),
        "fixed_point": lambda k: fixed_point_suite(
            k, config.fixed_point_instances, gamma=config.gamma, slack_scale=config.slack_scale
        ),
    }

    with capture_time() as elapsed:
        certificates = runners[name](key)
    return certificates, elapsed()


def run_suites(config: VerifyConfig) -> Tuple[Dict[str, List[Certificate]], List[str]]:
    """Runs the selected suites, `config.jobs` at a time. Returns the certificates and the names of crashed suites."""
    indices = [SUITES.index(name) for name in config.selected]
    outcomes = map_seeds(functools.partial(_run_suite, config), indices, config.jobs, desc="suites")

    results: Dict[str, List[Certificate]] = {}
    crashed: List[str] = []
    for outcome in outcomes:
        name = SUITES[outcome.seed]
        if outcome.failed:
            logger.error(f"{name} crashed:\n{outcome.error}")
            crashed.append(name)
            continue
        results[name], seconds = outcome.result
        passed, failed = summarize(results[name])
        logger.info(f"{name}: {passed} passed, {failed} failed in {seconds:.1f}s")
    return results, crashed


def main(config: VerifyConfig) -> int:
    init_logger(config.log_file)
    with capture_time() as duration:
        results, crashed = run_suites(config)

    failed = [c for certs in results.values() for c in certs if not c.passed]
    report = {
        "seed": config.seed,
        "slack_scale": config.slack_scale,
        "tolerance": config.tolerance,
        "version": describe_version(),
        "duration_seconds": duration(),
        "passed": not failed and not crashed,
        "crashed": crashed,
        "suites": {name: [c.to_json() for c in certs] for name, certs in results.items()},
        "failures": [dict(suite=c.name, instance=c.instance, margin=c.margin) for c in failed],
    }
    if config.out is not None:
        path = Path(config.out) / REPORT_JSON
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2, sort_keys=True))
        logger.info(f"wrote {path}")

    if failed or crashed:
        logger.error(f"{len(failed)} certificates failed, {len(crashed)} suites crashed")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(pushforward.config.main(main)())
