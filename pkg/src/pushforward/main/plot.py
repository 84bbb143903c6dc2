import logging
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import pushforward
from pushforward.envs.latent_riverswim import LatentRiverSwimSpec
from pushforward.logging import init_logger
from pushforward.visualization import plot_latent_map, plot_learning_curves


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlotConfig:
    inputs: List[str] = field(default_factory=list)  # aggregate CSVs sharing one step grid
    output: str = "curves.svg"
    title: str = ""
    latent_map: Optional[int] = None  # render Latent RiverSwim's encoder map at this n instead of curves
    mix_alpha: float = 0.5


def main(config: PlotConfig) -> int:
    init_logger(None)
    if config.latent_map is not None:
        plot_latent_map(LatentRiverSwimSpec(config.latent_map, mix_alpha=config.mix_alpha), config.output)
        logger.info(f"wrote the latent map for n={config.latent_map} to {config.output}")
        return 0

    if not config.inputs:
        raise ValueError("plot needs at least one aggregate CSV in inputs")
    num_curves = plot_learning_curves(config.inputs, config.output, config.title)
    logger.info(f"wrote {num_curves} curves to {config.output}")
    return 0


if __name__ == "__main__":
    sys.exit(pushforward.config.main(main)())
