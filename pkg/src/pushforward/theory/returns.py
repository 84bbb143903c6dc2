"""
Return distributions of finite MDPs as sorted atom vectors, and the distributional Bellman operator acting on them.

The return of a process started in (x₀, a₀) is G = Σ_{t=0..T} γ^t r(x_{t+1}): x₁ ~ P(· | x₀, a₀), later states follow
π, and each step pays the reward of the state it arrives in.
"""
import math
from typing import List, Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
from jaxtyping import Array, Float, Int, PRNGKeyArray

from pushforward.agents.base import GreedyPolicy
from pushforward.envs.mdp import TabularMDP
from pushforward.theory.wasserstein import EmpiricalReturnDist, wasserstein_p


TRUNCATION_TOLERANCE = 1e-6


def truncation_horizon(gamma: float, r_max: float, tolerance: float = TRUNCATION_TOLERANCE) -> int:
    """T = ceil(log(tol·(1 - γ)/R_max) / log γ), so that the discarded tail γ^T·R_max/(1 - γ) is at most tol."""
    if gamma == 0.0 or r_max <= 0.0:
        return 0
    return max(0, math.ceil(math.log(tolerance * (1.0 - gamma) / r_max) / math.log(gamma)))


def _inverse_cdf(cdf_rows: Float[Array, "n k"], u: Float[Array, "n"]) -> Int[Array, "n"]:
    """Index of the first CDF entry exceeding u, row by row."""
    return jnp.minimum(jnp.sum(cdf_rows <= u[:, None], axis=-1), cdf_rows.shape[-1] - 1)


def return_distribution(
    mdp: TabularMDP, pi: GreedyPolicy, x0, a0, horizon: int, num_atoms: int, key: PRNGKeyArray
) -> EmpiricalReturnDist:
    """
    `num_atoms` Monte-Carlo rollouts of the truncated return from (x0, a0). Rollouts are driven by uniforms through
    the inverse CDF, so two MDPs sampled with the same key are coupled.
    """
    first_cdf = jnp.cumsum(mdp.transitions[x0, a0])
    policy_cdf = jnp.cumsum(mdp.policy_kernel(pi.action_of), axis=-1)
    k_first, k_rest = jax.random.split(key)

    first_cdf = jnp.broadcast_to(first_cdf, (num_atoms, mdp.num_states))
    states = _inverse_cdf(first_cdf, jax.random.uniform(k_first, (num_atoms,)))
    returns = mdp.reward[states]

    def step(carry, inputs):
        states, returns = carry
        discount, k = inputs
        states = _inverse_cdf(policy_cdf[states], jax.random.uniform(k, (num_atoms,)))
        return (states, returns + discount * mdp.reward[states]), None

    if horizon > 0:
        discounts = mdp.gamma ** jnp.arange(1, horizon + 1, dtype=jnp.result_type(float))
        (_, returns), _ = jax.lax.scan(step, (states, returns), (discounts, jax.random.split(k_rest, horizon)))

    return EmpiricalReturnDist.from_samples(returns)


def return_distributions(
    mdp: TabularMDP, pi: GreedyPolicy, horizon: int, num_atoms: int, key: PRNGKeyArray
) -> Float[Array, "state action m"]:
    """Atoms of the return distribution for every (x, a). Each pair gets its own key derived from `key`."""
    keys = jax.random.split(key, mdp.num_states * mdp.num_actions).reshape(mdp.num_states, mdp.num_actions, -1)
    xs = jnp.arange(mdp.num_states)
    acts = jnp.arange(mdp.num_actions)

    def one(x, a, k):
        return return_distribution(mdp, pi, x, a, horizon, num_atoms, k).atoms

    return jax.vmap(lambda x, ks: jax.vmap(lambda a, k: one(x, a, k))(acts, ks))(xs, keys)


def bellman_backup(
    eta: Float[Array, "state action m"],
    mdp_star: TabularMDP,
    pi: GreedyPolicy,
    x,
    a,
    key: PRNGKeyArray,
    num_atoms: int | None = None,
) -> EmpiricalReturnDist:
    """
    (T η)(x, a): the law of r(x') + γ G' with x' ~ P*(· | x, a) and G' ~ η(x', π(x')).

    Drawn by systematic sampling: output atom i uses u_i = (i + U)/m, picks x' by inverting the CDF of P*(· | x, a)
    at u_i and takes the atom of η(x', π(x')) at the same relative position inside the x' interval. Backups of two
    different η with the same key are therefore quantile-coupled.
    """
    m_eta = eta.shape[-1]
    num_atoms = num_atoms or m_eta
    row = mdp_star.transitions[x, a]
    cdf = jnp.cumsum(row)

    u = (jnp.arange(num_atoms) + jax.random.uniform(key)) / num_atoms
    successors = _inverse_cdf(jnp.broadcast_to(cdf, (num_atoms, row.shape[0])), u)
    mass = row[successors]
    inside = (u - (cdf[successors] - mass)) / jnp.where(mass > 0, mass, 1.0)
    rank = jnp.clip(jnp.floor(inside * m_eta).astype(jnp.int32), 0, m_eta - 1)

    draws = eta[successors, pi.action_of[successors], rank]
    return EmpiricalReturnDist.from_samples(mdp_star.reward[successors] + mdp_star.gamma * draws)


def backup_all(
    eta: Float[Array, "state action m"], mdp_star: TabularMDP, pi: GreedyPolicy, key: PRNGKeyArray
) -> Float[Array, "state action m"]:
    num_states, num_actions = eta.shape[:2]
    keys = jax.random.split(key, num_states * num_actions).reshape(num_states, num_actions, -1)
    xs = jnp.arange(num_states)
    acts = jnp.arange(num_actions)

    def one(x, a, k):
        return bellman_backup(eta, mdp_star, pi, x, a, k).atoms

    return jax.vmap(lambda x, ks: jax.vmap(lambda a, k: one(x, a, k))(acts, ks))(xs, keys)


def max_wasserstein(
    eta_a: Float[Array, "state action m"], eta_b: Float[Array, "state action m"], p: float = 1.0
) -> Tuple[Array, Float[Array, "state action"]]:
    """W̄_p: the sup over (x, a) of the per-pair distances, returned together with the per-pair table."""
    per_pair = wasserstein_p(EmpiricalReturnDist(eta_a), EmpiricalReturnDist(eta_b), p)
    return jnp.max(per_pair), per_pair


def iterate_bellman(
    mdp: TabularMDP, pi: GreedyPolicy, eta0: Float[Array, "state action m"], sweeps: int, key: PRNGKeyArray
) -> Tuple[List[Array], Array]:
    """
    Applies the Bellman operator of `mdp` `sweeps` times. Returns every iterate (η₀ first) and the sup-W₁ distance
    between successive iterates.
    """
    etas = [jnp.sort(jnp.asarray(eta0, dtype=jnp.result_type(float)), axis=-1)]
    distances = []
    for k in jax.random.split(key, sweeps):
        etas.append(_backup_all_jit(etas[-1], mdp, pi, k))
        distances.append(max_wasserstein(etas[-1], etas[-2], 1.0)[0])
    return etas, jnp.stack(distances) if distances else jnp.zeros((0,))


_backup_all_jit = eqx.filter_jit(backup_all)
