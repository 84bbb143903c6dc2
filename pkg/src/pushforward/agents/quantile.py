"""
Implicit-quantile critics: IQQL regresses Q_τ(x, a) with the check loss, DAIF fits an ALD location μ_τ(x, a) with an
inverse-gamma prior over its scale. Both learn from a replay buffer and act greedily on the τ-averaged value head.
"""
from typing import Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
from jaxtyping import Array, ArrayLike, Float, Int, PRNGKeyArray
from optax import GradientTransformation, OptState

from pushforward.agents.base import Agent, GreedyPolicy, greedy_argmax
from pushforward.agents.replay import ReplayBuffer
from pushforward.envs.mdp import Transition
from pushforward.models.loss import daif_loss, iqql_loss, sample_taus
from pushforward.models.mlp import DAIF_HEAD_OFFSET, QuantileMlp
from pushforward.trainer import adam_step, init_optimizer


VARIANTS = ("iqql", "daif")


class QuantileCritic(eqx.Module):
    model: QuantileMlp
    opt_state: OptState
    optimizer: GradientTransformation = eqx.field(static=True)
    variant: str = eqx.field(static=True)
    head_offset: float = eqx.field(static=True, default=DAIF_HEAD_OFFSET)

    @staticmethod
    def init(
        variant: str,
        num_states: int,
        num_actions: int,
        hidden_dim: int,
        optimizer: GradientTransformation,
        *,
        key: PRNGKeyArray,
        head_offset: float = DAIF_HEAD_OFFSET,
    ) -> "QuantileCritic":
        if variant not in VARIANTS:
            raise ValueError(f"critic variant must be one of {VARIANTS}, got {variant!r}")
        output_dim = 1 if variant == "iqql" else 3
        model = QuantileMlp(num_states, num_actions, hidden_dim, output_dim, key=key)
        return QuantileCritic(model, init_optimizer(model, optimizer), optimizer, variant, head_offset)

    def loss(self, model: QuantileMlp, batch: Transition, pi: GreedyPolicy, gamma: float, key: PRNGKeyArray):
        if self.variant == "iqql":
            return iqql_loss(model, batch, pi.action_of, gamma, key)
        return daif_loss(model, batch, pi.action_of, gamma, key, self.head_offset)

    def apply_gradients(self, grads) -> "QuantileCritic":
        model, opt_state = adam_step(self.model, grads, self.opt_state, self.optimizer)
        return QuantileCritic(model, opt_state, self.optimizer, self.variant, self.head_offset)


def _train_step(critic: QuantileCritic, batch: Transition, pi: GreedyPolicy, gamma: float, key: PRNGKeyArray):
    loss, grads = eqx.filter_value_and_grad(critic.loss)(critic.model, batch, pi, gamma, key)
    return critic.apply_gradients(grads), loss


def iqql_train_step(
    critic: QuantileCritic, batch: Transition, pi: GreedyPolicy, gamma: float, key: PRNGKeyArray
) -> Tuple[QuantileCritic, Array]:
    """One Adam step on the batch-mean check loss against bootstrapped quantile targets."""
    if critic.variant != "iqql":
        raise ValueError(f"expected an iqql critic, got {critic.variant}")
    return _train_step(critic, batch, pi, gamma, key)


def daif_train_step(
    critic: QuantileCritic, batch: Transition, pi: GreedyPolicy, gamma: float, key: PRNGKeyArray
) -> Tuple[QuantileCritic, Array]:
    """One Adam step maximizing the batch-mean expected ALD log-likelihood of G = r + γ μ'."""
    if critic.variant != "daif":
        raise ValueError(f"expected a daif critic, got {critic.variant}")
    return _train_step(critic, batch, pi, gamma, key)


def greedy_policy_from_critic(critic: QuantileCritic, num_samples: int, key: PRNGKeyArray) -> GreedyPolicy:
    """π(x) = argmax_a mean_k Q_τk(x, a) with K fresh τ draws per (x, a)."""
    if num_samples < 1:
        raise ValueError(f"need at least one quantile sample, got {num_samples}")
    model = critic.model
    states = jnp.arange(model.num_states)[:, None, None]
    actions = jnp.arange(model.num_actions)[None, :, None]
    taus = sample_taus(key, (model.num_states, model.num_actions, num_samples))
    values = model.value(states, actions, taus).mean(axis=-1)
    return GreedyPolicy(greedy_argmax(values).astype(jnp.int32))


def quantile_curve(
    critic: QuantileCritic, state: Int[ArrayLike, ""], action: Int[ArrayLike, ""], taus: Float[ArrayLike, "tau"]
) -> Float[Array, "tau"]:
    """The critic's value head at a fixed (x, a) over a grid of quantile fractions."""
    taus = jnp.asarray(taus)
    return critic.model.value(jnp.full(taus.shape, state), jnp.full(taus.shape, action), taus)


class QuantileAgent(Agent):
    critic: QuantileCritic
    buffer: ReplayBuffer
    gamma: float = eqx.field(static=True)
    batch_size: int = eqx.field(static=True)
    updates_per_step: int = eqx.field(static=True)
    quantile_samples: int = eqx.field(static=True)

    def __init__(
        self,
        critic: QuantileCritic,
        capacity: int,
        gamma: float,
        batch_size: int = 32,
        updates_per_step: int = 1,
        quantile_samples: int = 16,
    ):
        if batch_size < 1 or updates_per_step < 1:
            raise ValueError(f"batch_size and updates_per_step must be positive, got {batch_size}, {updates_per_step}")
        self.policy = GreedyPolicy.constant(critic.model.num_states)
        self.num_actions = critic.model.num_actions
        self.critic = critic
        self.buffer = ReplayBuffer.empty(capacity)
        self.gamma = gamma
        self.batch_size = batch_size
        self.updates_per_step = updates_per_step
        self.quantile_samples = quantile_samples

    def observe(self, transition: Transition) -> "QuantileAgent":
        return eqx.tree_at(lambda a: a.buffer, self, self.buffer.add(transition))

    def train(self, step: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple["QuantileAgent", Array]:
        k_updates, k_policy = jax.random.split(key)
        step_fn = iqql_train_step if self.critic.variant == "iqql" else daif_train_step

        def update(critic, k):
            k_batch, k_loss = jax.random.split(k)
            batch = self.buffer.sample(k_batch, self.batch_size)
            return step_fn(critic, batch, self.policy, self.gamma, k_loss)

        critic, losses = jax.lax.scan(update, self.critic, jax.random.split(k_updates, self.updates_per_step))
        policy = greedy_policy_from_critic(critic, self.quantile_samples, k_policy)
        agent = eqx.tree_at(lambda a: (a.critic, a.policy), self, (critic, policy))
        return agent, jnp.mean(losses)
