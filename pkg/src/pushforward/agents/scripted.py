from typing import Tuple

import jax
import jax.numpy as jnp
from jaxtyping import Array, ArrayLike, Int, PRNGKeyArray

from pushforward.agents.base import Agent, GreedyPolicy
from pushforward.envs.mdp import Transition


class ScriptedAgent(Agent):
    """Always plays its fixed policy, warm-up included. Used as a baseline and as an oracle in tests."""

    def __init__(self, policy: GreedyPolicy, num_actions: int):
        self.policy = policy
        self.num_actions = num_actions

    @staticmethod
    def constant(num_states: int, num_actions: int, action: int) -> "ScriptedAgent":
        return ScriptedAgent(GreedyPolicy.constant(num_states, action), num_actions)

    def observe(self, transition: Transition) -> "ScriptedAgent":
        return self

    def train(self, step: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple["ScriptedAgent", Array]:
        return self, jnp.zeros(())

    def act(self, state, step, warmup_steps, key):
        return self.policy(state)


class UniformRandomAgent(ScriptedAgent):
    """Uniformly random actions at every step."""

    def __init__(self, num_states: int, num_actions: int):
        super().__init__(GreedyPolicy.constant(num_states), num_actions)

    def act(self, state, step, warmup_steps, key):
        return jax.random.randint(key, (), 0, self.num_actions)
