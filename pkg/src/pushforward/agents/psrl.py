"""
Posterior sampling with policy iteration: a Dirichlet posterior over every transition row, one sampled MDP per
resampling step, and exact policy iteration on the sample.
"""
from typing import Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
from jaxtyping import Array, ArrayLike, Float, Int, PRNGKeyArray

from pushforward.agents.base import Agent, GreedyPolicy, greedy_argmax
from pushforward.envs.mdp import TabularMDP, Transition
from pushforward.numerics import sample_dirichlet


# Q-values closer than this count as a tie
TIE_TOLERANCE = 1e-12


class DirichletPosterior(eqx.Module):
    concentration: Float[Array, "state action next_state"]

    @staticmethod
    def uniform(num_states: int, num_actions: int, prior: float = 1.0) -> "DirichletPosterior":
        if prior <= 0:
            raise ValueError(f"prior concentration must be positive, got {prior}")
        return DirichletPosterior(jnp.full((num_states, num_actions, num_states), prior))

    def mean_kernel(self) -> Float[Array, "state action next_state"]:
        return self.concentration / jnp.sum(self.concentration, axis=-1, keepdims=True)


def psrl_update_posterior(post: DirichletPosterior, t: Transition) -> DirichletPosterior:
    return DirichletPosterior(post.concentration.at[t.state, t.action, t.next_state].add(1.0))


def psrl_sample_mdp(
    post: DirichletPosterior, key: PRNGKeyArray, reward: Float[ArrayLike, "state"], gamma: float
) -> TabularMDP:
    """Draws every row P̂(· | x, a) independently from Dirichlet(α_{x,a})."""
    return TabularMDP(sample_dirichlet(post.concentration, key), jnp.asarray(reward), gamma)


def policy_evaluation_exact(mdp: TabularMDP, pi: GreedyPolicy) -> Float[Array, "state"]:
    """Solves (I - γ P_π) V = P_R."""
    system = jnp.eye(mdp.num_states) - mdp.gamma * mdp.policy_kernel(pi.action_of)
    return jnp.linalg.solve(system, mdp.reward)


def action_values(mdp: TabularMDP, values: Float[ArrayLike, "state"]) -> Float[Array, "state action"]:
    """Q(x, a) = P_R(x) + γ Σ_x' P(x' | x, a) V(x')"""
    return mdp.reward[:, None] + mdp.gamma * jnp.einsum("xay,y->xa", mdp.transitions, values)


def greedy_improvement(mdp: TabularMDP, pi: GreedyPolicy) -> GreedyPolicy:
    q = action_values(mdp, policy_evaluation_exact(mdp, pi))
    return GreedyPolicy(greedy_argmax(q, TIE_TOLERANCE).astype(pi.action_of.dtype))


def policy_iteration(mdp: TabularMDP, initial: GreedyPolicy, max_iterations: int = 1000) -> GreedyPolicy:
    """Greedy improvement repeated until the policy no longer changes."""

    def cond(carry):
        _, changed, it = carry
        return changed & (it < max_iterations)

    def body(carry):
        pi, _, it = carry
        improved = greedy_improvement(mdp, pi)
        return improved, jnp.any(improved.action_of != pi.action_of), it + 1

    pi, _, _ = jax.lax.while_loop(cond, body, (initial, jnp.array(True), jnp.array(0)))
    return pi


class PsrlAgent(Agent):
    posterior: DirichletPosterior
    reward: Float[Array, "state"]
    gamma: float = eqx.field(static=True)
    resample_every: int = eqx.field(static=True)

    def __init__(self, num_states: int, num_actions: int, reward, gamma: float, prior: float, resample_every: int = 1):
        if resample_every < 1:
            raise ValueError(f"resample_every must be at least 1, got {resample_every}")
        self.policy = GreedyPolicy.constant(num_states)
        self.num_actions = num_actions
        self.posterior = DirichletPosterior.uniform(num_states, num_actions, prior)
        self.reward = jnp.asarray(reward)
        self.gamma = gamma
        self.resample_every = resample_every

    def observe(self, transition: Transition) -> "PsrlAgent":
        return eqx.tree_at(lambda a: a.posterior, self, psrl_update_posterior(self.posterior, transition))

    def replan(self, key: PRNGKeyArray) -> "PsrlAgent":
        mdp = psrl_sample_mdp(self.posterior, key, self.reward, self.gamma)
        return eqx.tree_at(lambda a: a.policy, self, policy_iteration(mdp, self.policy))

    def train(self, step: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple["PsrlAgent", Array]:
        agent = jax.lax.cond(step % self.resample_every == 0, lambda a: a.replan(key), lambda a: a, self)
        return agent, jnp.zeros(())
