from dataclasses import dataclass

from pushforward.envs.latent_riverswim import (
    LATENT_ACTIONS,
    LatentRiverSwim,
    LatentRiverSwimSpec,
    latent_action,
    latent_decode,
    latent_encode,
    latent_preimage,
)
from pushforward.envs.mdp import TabularEnv, TabularMDP, Transition
from pushforward.envs.riverswim import RIVERSWIM_ACTIONS, RiverSwim, RiverSwimSpec, riverswim_reward
from pushforward.envs.riverswim import riverswim_transition_row


ENV_NAMES = ("riverswim", "latent_riverswim")


@dataclass(frozen=True)
class EnvConfig:
    name: str = "riverswim"
    n: int = 6
    p_forward: float = 0.3
    p_backward: float = 0.1
    mix_alpha: float = 0.5  # only used by latent_riverswim

    def __post_init__(self):
        if self.name not in ENV_NAMES:
            raise ValueError(f"env.name must be one of {ENV_NAMES}, got {self.name!r}")

    def build(self) -> TabularEnv:
        if self.name == "riverswim":
            return RiverSwim(RiverSwimSpec(self.n, self.p_forward, self.p_backward))
        return LatentRiverSwim(LatentRiverSwimSpec(self.n, self.p_forward, self.p_backward, self.mix_alpha))
