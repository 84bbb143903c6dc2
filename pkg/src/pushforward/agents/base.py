import abc
from typing import Tuple, TypeVar

import equinox as eqx
import jax
import jax.numpy as jnp
from jaxtyping import Array, ArrayLike, Int, PRNGKeyArray

from pushforward.envs.mdp import Transition


A = TypeVar("A", bound="Agent")


class GreedyPolicy(eqx.Module):
    """π as a table: `action_of[x]` is the action taken in state x."""

    action_of: Int[Array, "state"]

    @staticmethod
    def constant(num_states: int, action: int = 0) -> "GreedyPolicy":
        return GreedyPolicy(jnp.full((num_states,), action, dtype=jnp.int32))

    def __call__(self, state: Int[ArrayLike, "..."]) -> Array:
        return self.action_of[state]


class Agent(eqx.Module):
    """
    Common interface of the tabular agents. Agents are immutable: every method returns an updated agent, which lets
    the harness thread an agent through a `lax.scan` over the interaction budget.
    """

    policy: GreedyPolicy
    num_actions: int = eqx.field(static=True)

    @abc.abstractmethod
    def observe(self: A, transition: Transition) -> A:
        raise NotImplementedError

    @abc.abstractmethod
    def train(self: A, step: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple[A, Array]:
        """
        Runs the agent's per-step learning (posterior sampling and planning, or critic updates) and refreshes its
        greedy policy. Returns the updated agent and the training loss of this step (0 for agents without one).
        """
        raise NotImplementedError

    def act(self, state: Int[ArrayLike, ""], step: Int[ArrayLike, ""], warmup_steps: int, key: PRNGKeyArray):
        return agent_act(self, state, step, warmup_steps, key)


def agent_act(
    agent: Agent, state: Int[ArrayLike, ""], step: Int[ArrayLike, ""], warmup_steps: int, key: PRNGKeyArray
) -> Array:
    """Uniform-random action while `step < warmup_steps`, the agent's greedy action afterwards."""
    random_action = jax.random.randint(key, (), 0, agent.num_actions)
    return jnp.where(step < warmup_steps, random_action, agent.policy(state))


def greedy_argmax(values: ArrayLike, tolerance: float = 0.0) -> Array:
    """argmax over the last axis; ties (within `tolerance`) go to the lowest index."""
    values = jnp.asarray(values)
    best = jnp.max(values, axis=-1, keepdims=True)
    return jnp.argmax(values >= best - tolerance, axis=-1)
