import logging
import sys
from pathlib import Path

import draccus
import wandb

import pushforward
from pushforward.distributed import resolve_jobs
from pushforward.harness import (
    HORIZON_CSV,
    METADATA_JSON,
    SweepConfig,
    horizon_sweep,
    log_aggregates_to_wandb,
    write_horizon_csv,
    write_metadata,
    write_sweep_artifacts,
)
from pushforward.logging import capture_time, init_logger


logger = logging.getLogger(__name__)

ALIASES = {"out": "output.dir", "suite": "run.suite"}


def main(config: SweepConfig) -> int:
    init_logger(config.output.log_file)
    jobs = resolve_jobs(config.jobs)
    logger.info(f"horizon sweep over n={config.run.horizons} for {config.agents} on {config.env.name}")

    if config.output.wandb.enabled:
        config.output.wandb.init(draccus.encode(config), command="sweep")

    with capture_time() as duration:
        result, table = horizon_sweep(config, jobs)
        paths = write_sweep_artifacts(config.output.dir, result, config.run)
        paths.append(Path(config.output.dir) / HORIZON_CSV)
        write_horizon_csv(paths[-1], table)

    metadata_path = Path(config.output.dir) / METADATA_JSON
    write_metadata(metadata_path, config, duration(), "sweep")
    for path in [*paths, metadata_path]:
        logger.info(f"wrote {path}")

    for row in table:
        logger.info(f"n={row.n:3d} {row.agent:>12s}: {row.mean:.3f} ± {row.stderr:.3f} ({row.num_seeds} seeds)")

    if config.output.wandb.enabled:
        log_aggregates_to_wandb(result.aggregates, config.run)
        wandb.finish()

    if not result.ok:
        logger.error(f"{len(result.failed_seeds)} seeds failed: {result.failed_seeds}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(pushforward.config.main(main, aliases=ALIASES)())
