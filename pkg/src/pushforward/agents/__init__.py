from dataclasses import dataclass
from typing import Optional

from jaxtyping import PRNGKeyArray

from pushforward.agents.base import Agent, GreedyPolicy, agent_act
from pushforward.agents.psrl import (
    DirichletPosterior,
    PsrlAgent,
    policy_evaluation_exact,
    policy_iteration,
    psrl_sample_mdp,
    psrl_update_posterior,
)
from pushforward.agents.quantile import (
    QuantileAgent,
    QuantileCritic,
    daif_train_step,
    greedy_policy_from_critic,
    iqql_train_step,
    quantile_curve,
)
from pushforward.agents.replay import ReplayBuffer
from pushforward.agents.scripted import ScriptedAgent, UniformRandomAgent
from pushforward.envs.mdp import TabularEnv
from pushforward.models.mlp import DAIF_HEAD_OFFSET
from pushforward.trainer import OptimizerConfig


AGENT_NAMES = ("psrl_pi", "iqql", "daif", "random", "always_left", "always_right")


@dataclass(frozen=True)
class AgentConfig:
    name: str = "psrl_pi"

    # posterior sampling
    prior_concentration: float = 1.0
    resample_every: int = 1

    # quantile critics
    lr: float = 1e-3
    lr_schedule: str = "constant"  # constant, cosine, linear
    min_lr_ratio: float = 0.0
    lr_cooldown: float = 0.0  # fraction (or count) of updates spent decaying linearly to min_lr
    max_grad_norm: Optional[float] = None
    batch_size: int = 32
    updates_per_step: int = 1
    quantile_samples: int = 16
    hidden_dim: int = 0  # 0 means a single linear layer
    head_offset: float = DAIF_HEAD_OFFSET

    def __post_init__(self):
        if self.name not in AGENT_NAMES:
            raise ValueError(f"agent.name must be one of {AGENT_NAMES}, got {self.name!r}")

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            learning_rate=self.lr,
            lr_schedule=self.lr_schedule,
            min_lr_ratio=self.min_lr_ratio,
            cooldown=self.lr_cooldown,
            max_grad_norm=self.max_grad_norm,
        )

    def build(self, env: TabularEnv, gamma: float, total_steps: int, *, key: PRNGKeyArray) -> Agent:
        S, A = env.num_states, env.num_actions
        match self.name:
            case "psrl_pi":
                reward = env.as_tabular_mdp(gamma).reward
                return PsrlAgent(S, A, reward, gamma, self.prior_concentration, self.resample_every)
            case "iqql" | "daif":
                optimizer = self.optimizer().build(total_steps * self.updates_per_step)
                critic = QuantileCritic.init(
                    self.name, S, A, self.hidden_dim, optimizer, key=key, head_offset=self.head_offset
                )
                return QuantileAgent(
                    critic, total_steps, gamma, self.batch_size, self.updates_per_step, self.quantile_samples
                )
            case "random":
                return UniformRandomAgent(S, A)
            case "always_left":
                return ScriptedAgent.constant(S, A, env.left_action)
            case "always_right":
                return ScriptedAgent.constant(S, A, env.right_action)
            case _:
                raise ValueError(f"Unknown agent: {self.name}")
