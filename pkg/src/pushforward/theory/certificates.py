"""
Machine-checked instances of the contraction results: each `check_*` evaluates both sides of an inequality on a
concrete finite instance and returns a `Certificate` (it never raises on a violation).
"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, PRNGKeyArray

from pushforward.agents.base import GreedyPolicy
from pushforward.agents.psrl import policy_evaluation_exact
from pushforward.envs.latent_riverswim import LatentRiverSwim, LatentRiverSwimSpec
from pushforward.envs.mdp import TabularMDP
from pushforward.numerics import sample_dirichlet
from pushforward.theory.kernels import (
    EncoderDecoderPair,
    FiniteKernel,
    constant_decoder_pair,
    identity_pair,
    latent_encoder_decoder,
    lipschitz_constant,
    map_lipschitz_constant,
)
from pushforward.theory.returns import backup_all, iterate_bellman, max_wasserstein, return_distributions
from pushforward.theory.returns import truncation_horizon


logger = logging.getLogger(__name__)

MC_SLACK_COEFFICIENT = 0.05
EXACT_TOLERANCE = 1e-9
FIXED_POINT_MEAN_TOLERANCE = 0.01


@dataclass
class Certificate:
    name: str
    instance: str
    lhs: float
    rhs: float
    factor: float  # the inequality checked is lhs <= factor * rhs + slack
    slack: float
    passed: bool
    worst_pair: Optional[Tuple[int, int]] = None
    pair_margins: Optional[List[List[float]]] = None

    @property
    def margin(self) -> float:
        return self.factor * self.rhs + self.slack - self.lhs

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["pass"] = out.pop("passed")
        out["margin"] = self.margin
        return out


def mc_slack(r_max: float, gamma: float, num_atoms: int, scale: float = 1.0) -> float:
    """Monte-Carlo slack 0.05·R_max/(1 - γ)/√m, times `scale`."""
    return scale * MC_SLACK_COEFFICIENT * r_max / (1.0 - gamma) / math.sqrt(num_atoms)


def _r_max(*mdps: TabularMDP) -> float:
    return float(max(jnp.max(jnp.abs(m.reward)) for m in mdps))


@eqx.filter_jit
def _contraction_sides(
    mdp_star: TabularMDP,
    lhs_a: TabularMDP,
    lhs_b: TabularMDP,
    pi: GreedyPolicy,
    p: float,
    horizon: int,
    num_atoms: int,
    key: PRNGKeyArray,
    rhs_pair: Optional[Tuple[TabularMDP, TabularMDP]] = None,
) -> Tuple[Array, Array]:
    """
    Per-(x, a) W_p between the P*-backups of the return distributions of lhs_a and lhs_b, and W̄_p between the return
    distributions of `rhs_pair` (default: lhs_a and lhs_b). Every pair of distributions is sampled with common random
    numbers.
    """
    k_roll, k_backup = jax.random.split(key)
    eta_a = return_distributions(lhs_a, pi, horizon, num_atoms, k_roll)
    eta_b = return_distributions(lhs_b, pi, horizon, num_atoms, k_roll)
    _, lhs = max_wasserstein(backup_all(eta_a, mdp_star, pi, k_backup), backup_all(eta_b, mdp_star, pi, k_backup), p)

    if rhs_pair is not None:
        rhs_a, rhs_b = rhs_pair
        eta_a = return_distributions(rhs_a, pi, horizon, num_atoms, k_roll)
        eta_b = return_distributions(rhs_b, pi, horizon, num_atoms, k_roll)
    rhs, _ = max_wasserstein(eta_a, eta_b, p)
    return lhs, rhs


def _contraction_certificate(
    name: str, instance: str, lhs_pairs: Array, rhs: Array, factor: float, slack: float
) -> Certificate:
    lhs_pairs = np.asarray(lhs_pairs)
    bound = factor * float(rhs) + slack
    worst = np.unravel_index(int(np.argmax(lhs_pairs)), lhs_pairs.shape)
    return Certificate(
        name=name,
        instance=instance,
        lhs=float(lhs_pairs.max()),
        rhs=float(rhs),
        factor=factor,
        slack=slack,
        passed=bool(lhs_pairs.max() <= bound),
        worst_pair=(int(worst[0]), int(worst[1])),
        pair_margins=(bound - lhs_pairs).tolist(),
    )


def _with_gamma(gamma: Optional[float], *mdps: TabularMDP) -> List[TabularMDP]:
    if gamma is None:
        return list(mdps)
    return [TabularMDP(m.transitions, m.reward, gamma) for m in mdps]


def check_lemma1(
    mdp_star: TabularMDP,
    mdp_a: TabularMDP,
    mdp_b: TabularMDP,
    pi: GreedyPolicy,
    p: float = 1.0,
    gamma: Optional[float] = None,
    num_atoms: int = 4000,
    *,
    key: PRNGKeyArray,
    slack_scale: float = 1.0,
    instance: str = "",
) -> Certificate:
    """
    W̄_p(T η_a, T η_b) <= γ W̄_p(η_a, η_b) + ε, where η_a, η_b are the return distributions of the processes with
    kernels P_π and P̄_π and T is the Bellman operator of P*.
    """
    mdp_star, mdp_a, mdp_b = _with_gamma(gamma, mdp_star, mdp_a, mdp_b)
    gamma = mdp_star.gamma
    r_max = _r_max(mdp_star, mdp_a, mdp_b)
    horizon = truncation_horizon(gamma, r_max)
    lhs, rhs = _contraction_sides(mdp_star, mdp_a, mdp_b, pi, p, horizon, num_atoms, key)
    slack = mc_slack(r_max, gamma, num_atoms, slack_scale)
    return _contraction_certificate("lemma1", instance, lhs, rhs, gamma, slack)


def check_lemma2(
    f_index, f_coords, k: FiniteKernel, p: float = 1.0, *, tolerance: float = EXACT_TOLERANCE, instance: str = ""
) -> Certificate:
    """Lip(K∘f) <= Lip(K)·Lip(f), exactly up to float error."""
    composite = k.compose(f_index, f_coords)
    lhs = lipschitz_constant(composite, p) if composite.num_points > 1 else 0.0
    kernel_l = lipschitz_constant(k, p)
    map_l = map_lipschitz_constant(k.coords[jnp.asarray(f_index)], f_coords)
    return Certificate(
        name="lemma2",
        instance=instance,
        lhs=lhs,
        rhs=map_l,
        factor=kernel_l,
        slack=tolerance,
        passed=lhs <= kernel_l * map_l + tolerance,
    )


def check_theorem1(
    mdp_star: TabularMDP,
    mdp_a: TabularMDP,
    mdp_b: TabularMDP,
    pair: EncoderDecoderPair,
    pi: GreedyPolicy,
    p: float = 1.0,
    gamma: Optional[float] = None,
    num_atoms: int = 4000,
    *,
    key: PRNGKeyArray,
    slack_scale: float = 1.0,
    instance: str = "",
) -> Certificate:
    """
    W̄_p(T η'_a, T η'_b) <= γ·L_E·L_D·W̄_p(η_a, η_b) + ε, where η' are the return distributions of the processes
    re-encoded through the pair (x' ~ P, then x'' ~ P_D(· | S(x'))) and L_E, L_D are the Lipschitz constants of the
    encoder and the decoder.
    """
    mdp_star, mdp_a, mdp_b = _with_gamma(gamma, mdp_star, mdp_a, mdp_b)
    gamma = mdp_star.gamma
    r_max = _r_max(mdp_star, mdp_a, mdp_b)
    horizon = truncation_horizon(gamma, r_max)
    factor = gamma * pair.encoder_lipschitz * pair.decoder_lipschitz(p)
    transformed = (pair.transform(mdp_a), pair.transform(mdp_b))
    lhs, rhs = _contraction_sides(mdp_star, *transformed, pi, p, horizon, num_atoms, key, rhs_pair=(mdp_a, mdp_b))
    slack = mc_slack(r_max, gamma, num_atoms, slack_scale)
    return _contraction_certificate("theorem1", instance, lhs, rhs, factor, slack)


def check_fixed_point(
    mdp: TabularMDP,
    pi: GreedyPolicy,
    num_atoms: int = 1000,
    sweeps: int = 60,
    *,
    key: PRNGKeyArray,
    slack_scale: float = 1.0,
    instance: str = "",
) -> List[Certificate]:
    """
    Iterates the Bellman operator from η ≡ 0 and certifies (1) the successive sup-W₁ distances shrink by a factor
    of at most γ per sweep, up to Monte-Carlo slack, and (2) the means of the final iterate match the exact Q-values.
    """
    r_max = _r_max(mdp)
    eta0 = jnp.zeros((mdp.num_states, mdp.num_actions, num_atoms))
    etas, distances = iterate_bellman(mdp, pi, eta0, sweeps, key)
    distances = np.asarray(distances)

    excess = distances[1:] - mdp.gamma * distances[:-1]
    rate = Certificate(
        name="fixed_point_rate",
        instance=instance,
        lhs=float(excess.max()) if excess.size else 0.0,
        rhs=0.0,
        factor=1.0,
        slack=mc_slack(r_max, mdp.gamma, num_atoms, slack_scale),
        passed=False,
    )
    rate.passed = rate.margin >= 0

    # with arrival rewards, Q(x, a) = Σ_x' P(x' | x, a) V(x') where V solves V = r + γ P_π V
    q = jnp.einsum("xay,y->xa", mdp.transitions, policy_evaluation_exact(mdp, pi))
    errors = np.abs(np.asarray(etas[-1].mean(axis=-1) - q))
    worst = np.unravel_index(int(np.argmax(errors)), errors.shape)
    tolerance = FIXED_POINT_MEAN_TOLERANCE * r_max / (1.0 - mdp.gamma)
    mean = Certificate(
        name="fixed_point_mean",
        instance=instance,
        lhs=float(errors.max()),
        rhs=0.0,
        factor=1.0,
        slack=tolerance,
        passed=bool(errors.max() <= tolerance),
        worst_pair=(int(worst[0]), int(worst[1])),
        pair_margins=(tolerance - errors).tolist(),
    )
    return [rate, mean]


def random_mdp(key: PRNGKeyArray, num_states: int, num_actions: int, gamma: float) -> TabularMDP:
    """Dirichlet(1, ..., 1) transition rows and rewards uniform in [0, 1]."""
    k_rows, k_reward = jax.random.split(key)
    rows = sample_dirichlet(jnp.ones((num_states, num_actions, num_states)), k_rows)
    return TabularMDP(rows, jax.random.uniform(k_reward, (num_states,)), gamma)


def random_kernel_pair(
    key: PRNGKeyArray, num_states: int, num_actions: int, gamma: float
) -> Tuple[TabularMDP, TabularMDP, TabularMDP, GreedyPolicy]:
    """(P*, P, P̄, π): three independent random kernels sharing one reward vector, and a random policy."""
    k_star, k_a, k_b, k_pi = jax.random.split(key, 4)
    mdp_star = random_mdp(k_star, num_states, num_actions, gamma)
    mdp_a = mdp_star.replace_transitions(random_mdp(k_a, num_states, num_actions, gamma).transitions)
    mdp_b = mdp_star.replace_transitions(random_mdp(k_b, num_states, num_actions, gamma).transitions)
    pi = GreedyPolicy(jax.random.randint(k_pi, (num_states,), 0, num_actions))
    return mdp_star, mdp_a, mdp_b, pi


def random_lemma2_instance(key: PRNGKeyArray, max_points: int = 8):
    """A random map f (as kernel indices and domain coordinates) and a random kernel, all on at most `max_points`."""
    k_sizes, k_coords, k_support, k_probs, k_domain, k_map = jax.random.split(key, 6)
    num_points, support_size, domain_size = (int(s) for s in jax.random.randint(k_sizes, (3,), 2, max_points + 1))

    def increasing(k, size):
        return jnp.cumsum(jax.random.uniform(k, (size,), minval=0.1, maxval=2.0)) - 1.0

    kernel = FiniteKernel(
        increasing(k_coords, num_points),
        increasing(k_support, support_size) * 3.0,
        sample_dirichlet(jnp.full((num_points, support_size), 0.5), k_probs),
    )
    f_index = jax.random.randint(k_map, (domain_size,), 0, num_points)
    return f_index, increasing(k_domain, domain_size), kernel


# suites


def lemma1_suite(
    key: PRNGKeyArray,
    num_instances: int = 100,
    num_states: int = 4,
    num_actions: int = 2,
    gamma: float = 0.9,
    p: float = 1.0,
    num_atoms: int = 4000,
    slack_scale: float = 1.0,
) -> List[Certificate]:
    certificates = []
    for i, k in enumerate(jax.random.split(key, num_instances)):
        k_instance, k_check = jax.random.split(k)
        mdp_star, mdp_a, mdp_b, pi = random_kernel_pair(k_instance, num_states, num_actions, gamma)
        certificates.append(
            check_lemma1(
                mdp_star,
                mdp_a,
                mdp_b,
                pi,
                p,
                num_atoms=num_atoms,
                key=k_check,
                slack_scale=slack_scale,
                instance=f"random-{i}",
            )
        )
    return certificates


def lemma2_suite(
    key: PRNGKeyArray, num_instances: int = 50, max_points: int = 8, p: float = 1.0, tolerance: float = EXACT_TOLERANCE
) -> List[Certificate]:
    certificates = []
    for i, k in enumerate(jax.random.split(key, num_instances)):
        f_index, f_coords, kernel = random_lemma2_instance(k, max_points)
        certificates.append(check_lemma2(f_index, f_coords, kernel, p, tolerance=tolerance, instance=f"random-{i}"))
    return certificates


def theorem1_suite(
    key: PRNGKeyArray,
    gamma: float = 0.9,
    p: float = 1.0,
    num_atoms: int = 4000,
    slack_scale: float = 1.0,
    latent_n: int = 4,
) -> List[Certificate]:
    """
    The identity autoencoder on a random 4-state MDP (plus the check that it reproduces the contraction certificate
    without an encoder), Latent RiverSwim's own encoder/decoder on two perturbed latent kernels, and a constant
    decoder.
    """
    k_identity, k_latent_pi, k_latent, k_constant = jax.random.split(key, 4)
    certificates = []

    k_instance, k_check = jax.random.split(k_identity)
    mdp_star, mdp_a, mdp_b, pi = random_kernel_pair(k_instance, 4, 2, gamma)
    kwargs = dict(num_atoms=num_atoms, key=k_check, slack_scale=slack_scale)
    with_pair = check_theorem1(mdp_star, mdp_a, mdp_b, identity_pair(4), pi, p, instance="identity", **kwargs)
    without_pair = check_lemma1(mdp_star, mdp_a, mdp_b, pi, p, instance="identity", **kwargs)
    certificates.append(with_pair)
    certificates.append(
        Certificate(
            name="theorem1_identity_reduction",
            instance="identity",
            lhs=abs(with_pair.lhs - without_pair.lhs) + abs(with_pair.rhs - without_pair.rhs),
            rhs=0.0,
            factor=1.0,
            slack=without_pair.slack,
            passed=abs(with_pair.lhs - without_pair.lhs) + abs(with_pair.rhs - without_pair.rhs) <= without_pair.slack,
        )
    )

    spec = LatentRiverSwimSpec(latent_n)
    perturbed = LatentRiverSwimSpec(latent_n, p_forward=0.35, p_backward=0.05)
    latent_star = LatentRiverSwim(spec).as_tabular_mdp(gamma)
    latent_b = LatentRiverSwim(perturbed).as_tabular_mdp(gamma)
    latent_pi = GreedyPolicy(jax.random.randint(k_latent_pi, (latent_star.num_states,), 0, latent_star.num_actions))
    certificates.append(
        check_theorem1(
            latent_star,
            latent_star,
            latent_b,
            latent_encoder_decoder(spec),
            latent_pi,
            p,
            num_atoms=num_atoms,
            key=k_latent,
            slack_scale=slack_scale,
            instance=f"latent_riverswim-{latent_n}",
        )
    )

    k_instance, k_check = jax.random.split(k_constant)
    mdp_star, mdp_a, mdp_b, pi = random_kernel_pair(k_instance, 4, 2, gamma)
    certificates.append(
        check_theorem1(
            mdp_star,
            mdp_a,
            mdp_b,
            constant_decoder_pair(4, 2),
            pi,
            p,
            num_atoms=num_atoms,
            key=k_check,
            slack_scale=slack_scale,
            instance="constant_decoder",
        )
    )
    return certificates


def fixed_point_suite(
    key: PRNGKeyArray,
    num_instances: int = 5,
    num_states: int = 3,
    num_actions: int = 2,
    gamma: float = 0.9,
    num_atoms: int = 1000,
    sweeps: int = 60,
    slack_scale: float = 1.0,
) -> List[Certificate]:
    certificates: List[Certificate] = []
    for i, k in enumerate(jax.random.split(key, num_instances)):
        k_instance, k_check = jax.random.split(k)
        mdp, _, _, pi = random_kernel_pair(k_instance, num_states, num_actions, gamma)
        certificates.extend(
            check_fixed_point(mdp, pi, num_atoms, sweeps, key=k_check, slack_scale=slack_scale, instance=f"random-{i}")
        )
    return certificates


def summarize(certificates: List[Certificate]) -> Tuple[int, int]:
    failed = [c for c in certificates if not c.passed]
    for c in failed:
        logger.warning(
            f"{c.name}[{c.instance}] failed: lhs={c.lhs:.6g} > {c.factor:.6g} * {c.rhs:.6g} + {c.slack:.3g}"
            f" (margin {c.margin:.3g}, worst pair {c.worst_pair})"
        )
    return len(certificates) - len(failed), len(failed)
