"""
Training objectives of the quantile critics. Both are means over a batch of transitions where every transition gets
its own fresh (τ, τ') draw, and both bootstrap from the critic at (x', π(x'), τ') with the target held constant.
"""
from typing import Tuple

import jax
import jax.numpy as jnp
from jaxtyping import Array, Float, Int, PRNGKeyArray

from pushforward.envs.mdp import Transition
from pushforward.models.mlp import DAIF_HEAD_OFFSET, QuantileMlp, head_transform_daif
from pushforward.numerics import InvGammaParams, check_loss, expected_ald_loglik


# τ is drawn from U(ε, 1 - ε) so that log τ(1 - τ) stays finite
TAU_EPS = 1e-6


def sample_taus(key: PRNGKeyArray, shape) -> Float[Array, "..."]:
    return jax.random.uniform(key, shape, minval=TAU_EPS, maxval=1.0 - TAU_EPS)


def _bootstrap_targets(
    critic: QuantileMlp, batch: Transition, policy: Int[Array, "state"], gamma: float, next_tau: Array
) -> Array:
    next_value = critic.value(batch.next_state, policy[batch.next_state], next_tau)
    return jax.lax.stop_gradient(batch.reward + gamma * next_value)


def iqql_loss(
    critic: QuantileMlp, batch: Transition, policy: Int[Array, "state"], gamma: float, key: PRNGKeyArray
) -> Array:
    """mean ℓ_τ(r + γ Q_τ'(x', π(x')) - Q_τ(x, a))"""
    tau, next_tau = _draw_tau_pair(key, batch)
    target = _bootstrap_targets(critic, batch, policy, gamma, next_tau)
    prediction = critic.value(batch.state, batch.action, tau)
    return jnp.mean(check_loss(target - prediction, tau))


def daif_loss(
    critic: QuantileMlp,
    batch: Transition,
    policy: Int[Array, "state"],
    gamma: float,
    key: PRNGKeyArray,
    head_offset: float = DAIF_HEAD_OFFSET,
) -> Array:
    """The negated inverse-gamma-marginalized ALD log-likelihood of G = r + γ μ_τ'(x', π(x'))."""
    tau, next_tau = _draw_tau_pair(key, batch)
    returns = _bootstrap_targets(critic, batch, policy, gamma, next_tau)
    raw = jax.vmap(critic)(batch.state, batch.action, tau)
    mu, alpha, beta = head_transform_daif(raw, head_offset)
    return -jnp.mean(expected_ald_loglik(returns, mu, InvGammaParams(alpha, beta), tau))


def _draw_tau_pair(key: PRNGKeyArray, batch: Transition) -> Tuple[Array, Array]:
    k_tau, k_next = jax.random.split(key)
    shape = batch.state.shape
    return sample_taus(k_tau, shape), sample_taus(k_next, shape)
