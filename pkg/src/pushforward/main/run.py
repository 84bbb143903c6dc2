import logging
import sys
from pathlib import Path

import draccus
import wandb

import pushforward
from pushforward.distributed import resolve_jobs
from pushforward.harness import (
    METADATA_JSON,
    ExperimentConfig,
    log_aggregates_to_wandb,
    run_sweep,
    write_metadata,
    write_sweep_artifacts,
)
from pushforward.logging import capture_time, init_logger


logger = logging.getLogger(__name__)

ALIASES = {"out": "output.dir", "suite": "run.suite"}


def main(config: ExperimentConfig) -> int:
    init_logger(config.output.log_file)
    jobs = resolve_jobs(config.jobs)
    logger.info(f"running {config.agent.name} on {config.env.name} (n={config.env.n}), {len(config.run.seeds)} seeds")

    if config.output.wandb.enabled:
        config.output.wandb.init(draccus.encode(config), command="run")

    with capture_time() as duration:
        result = run_sweep(config, jobs)
        paths = write_sweep_artifacts(config.output.dir, result, config.run)

    metadata_path = Path(config.output.dir) / METADATA_JSON
    write_metadata(metadata_path, config, duration(), "run")
    for path in [*paths, metadata_path]:
        logger.info(f"wrote {path}")

    if config.output.wandb.enabled:
        log_aggregates_to_wandb(result.aggregates, config.run)
        wandb.finish()

    if not result.ok:
        logger.error(f"{len(result.failed_seeds)} seeds failed: {result.failed_seeds}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(pushforward.config.main(main, aliases=ALIASES)())
