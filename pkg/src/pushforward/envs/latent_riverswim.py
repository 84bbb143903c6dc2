"""
Latent RiverSwim: a 2-D grid of observations {1..n}² whose dynamics live on a hidden 1-D RiverSwim chain.

Observation (i, j) is encoded to the latent state floor(α·i + (1-α)·j), a grid action (a1, a2) to the latent move
sign(α·a1 + (1-α)·a2). A step encodes the observation, steps the latent chain and decodes the arrived latent state by
picking one of its preimage observations uniformly at random.
"""
import math
from dataclasses import dataclass
from typing import List, Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, ArrayLike, Float, Int, PRNGKeyArray

from pushforward.envs.mdp import TabularEnv, TabularMDP, check_row_stochastic
from pushforward.envs.riverswim import RIVERSWIM_ACTIONS, RiverSwimSpec, desired_state_weights, riverswim_transitions


# action id -> grid move
LATENT_ACTIONS = ((+1, 0), (-1, 0), (0, +1), (0, -1))

# floor(α·k + (1-α)·k) must be k even when the sum rounds to k - ulp
_FLOOR_EPS = 1e-9

Observation = Tuple[int, int]


@dataclass(frozen=True)
class LatentRiverSwimSpec:
    n: int
    p_forward: float = 0.3
    p_backward: float = 0.1
    mix_alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.mix_alpha < 1.0:
            raise ValueError(f"mix_alpha must lie in (0, 1), got {self.mix_alpha}")
        RiverSwimSpec(self.n, self.p_forward, self.p_backward)  # validates n, p_forward, p_backward
        for k in range(1, self.n + 1):
            if not latent_preimage(self, k):
                raise ValueError(f"latent state {k} has an empty preimage for n={self.n}, mix_alpha={self.mix_alpha}")

    @property
    def latent(self) -> RiverSwimSpec:
        return RiverSwimSpec(self.n, self.p_forward, self.p_backward)

    @property
    def num_observations(self) -> int:
        return self.n * self.n

    def obs_id(self, obs: Observation) -> int:
        i, j = obs
        _check_obs(self, obs)
        return (i - 1) * self.n + (j - 1)

    def obs_of(self, obs_id: int) -> Observation:
        if not 0 <= obs_id < self.num_observations:
            raise ValueError(f"observation id {obs_id} is outside 0..{self.num_observations - 1}")
        i, j = divmod(int(obs_id), self.n)
        return i + 1, j + 1


def _check_obs(spec: LatentRiverSwimSpec, obs: Observation):
    i, j = obs
    if not (1 <= i <= spec.n and 1 <= j <= spec.n):
        raise ValueError(f"observation {obs} is outside the {spec.n}x{spec.n} grid")


def _encode(mix_alpha: float, i: int, j: int) -> int:
    return math.floor(mix_alpha * i + (1.0 - mix_alpha) * j + _FLOOR_EPS)


def latent_encode(spec: LatentRiverSwimSpec, obs: Observation) -> int:
    _check_obs(spec, obs)
    return _encode(spec.mix_alpha, *obs)


def latent_action(spec: LatentRiverSwimSpec, a: Tuple[int, int]) -> int:
    if tuple(a) not in LATENT_ACTIONS:
        raise ValueError(f"grid action must be one of {LATENT_ACTIONS}, got {a}")
    a1, a2 = a
    return 1 if spec.mix_alpha * a1 + (1.0 - spec.mix_alpha) * a2 >= 0 else -1


def latent_preimage(spec: LatentRiverSwimSpec, k: int) -> List[Observation]:
    """All observations that encode to latent state k, in row-major order."""
    return [
        (i, j) for i in range(1, spec.n + 1) for j in range(1, spec.n + 1) if _encode(spec.mix_alpha, i, j) == k
    ]


def encoder_table(spec: LatentRiverSwimSpec) -> np.ndarray:
    """[n, n] grid of latent states, entry [i - 1, j - 1] = latent_encode((i, j))."""
    return np.array([[_encode(spec.mix_alpha, i, j) for j in range(1, spec.n + 1)] for i in range(1, spec.n + 1)])


def latent_decode(spec: LatentRiverSwimSpec, k: int, key: PRNGKeyArray) -> Observation:
    if not 1 <= k <= spec.n:
        raise ValueError(f"latent state {k} is outside 1..{spec.n}")
    preimage = latent_preimage(spec, k)
    index = int(jax.random.randint(key, (), 0, len(preimage)))
    return preimage[index]


def decoder_matrix(spec: LatentRiverSwimSpec) -> np.ndarray:
    """[n, n²] matrix D[k - 1, o] = P(observation o | latent k), uniform over the preimage."""
    enc = encoder_table(spec).reshape(-1)
    dec = np.zeros((spec.n, spec.num_observations))
    for k in range(1, spec.n + 1):
        members = enc == k
        dec[k - 1, members] = 1.0 / members.sum()
    return dec


def latent_transitions(spec: LatentRiverSwimSpec) -> np.ndarray:
    """
    The observation-level kernel T[o, a, o'] = Σ_k' P(k' | S(o), ā(a)) D(o' | k'), computed by enumeration.
    """
    latent_kernel = riverswim_transitions(spec.latent)  # [k, latent action, k']
    enc = encoder_table(spec).reshape(-1) - 1  # 0-based latent id per observation
    latent_action_ids = [RIVERSWIM_ACTIONS.index(latent_action(spec, a)) for a in LATENT_ACTIONS]
    per_obs = latent_kernel[enc][:, latent_action_ids]  # [o, a, k']
    transitions = per_obs @ decoder_matrix(spec)
    check_row_stochastic(transitions)
    return transitions


class LatentRiverSwim(TabularEnv):
    """
    Latent RiverSwim with flat observation ids (i - 1)·n + (j - 1) and action ids indexing LATENT_ACTIONS. Starts at
    observation (1, 1). The reward is the RiverSwim desired-state weight of the arrived latent state.
    """

    spec: LatentRiverSwimSpec = eqx.field(static=True)
    latent_kernel: Float[Array, "latent latent_action next_latent"]
    latent_reward: Float[Array, "latent"]
    encoder: Int[Array, "obs"]  # 0-based latent id per observation
    action_map: Int[Array, "action"]  # latent action id per grid action
    preimages: Int[Array, "latent slot"]  # observation ids, padded with -1
    preimage_sizes: Int[Array, "latent"]

    def __init__(self, spec: LatentRiverSwimSpec):
        self.spec = spec
        self.latent_kernel = jnp.asarray(riverswim_transitions(spec.latent))
        self.latent_reward = jnp.asarray(desired_state_weights(spec.n))
        self.encoder = jnp.asarray(encoder_table(spec).reshape(-1) - 1)
        self.action_map = jnp.asarray([RIVERSWIM_ACTIONS.index(latent_action(spec, a)) for a in LATENT_ACTIONS])

        members = [[spec.obs_id(obs) for obs in latent_preimage(spec, k)] for k in range(1, spec.n + 1)]
        width = max(len(m) for m in members)
        self.preimages = jnp.asarray([m + [-1] * (width - len(m)) for m in members])
        self.preimage_sizes = jnp.asarray([len(m) for m in members])

    @property
    def num_states(self) -> int:
        return self.spec.num_observations

    @property
    def num_actions(self) -> int:
        return len(LATENT_ACTIONS)

    @property
    def initial_state(self) -> int:
        return self.spec.obs_id((1, 1))

    @property
    def left_action(self) -> int:
        return LATENT_ACTIONS.index((-1, 0))

    @property
    def right_action(self) -> int:
        return LATENT_ACTIONS.index((+1, 0))

    def encode(self, state: Int[ArrayLike, "..."]) -> Array:
        """0-based latent id of flat observation ids."""
        return self.encoder[state]

    def step(self, state: Int[ArrayLike, ""], action: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple[Array, Array]:
        k_step, k_decode = jax.random.split(key)
        latent = self.encoder[state]
        next_latent = jax.random.choice(k_step, self.spec.n, p=self.latent_kernel[latent, self.action_map[action]])
        slot = jax.random.randint(k_decode, (), 0, self.preimage_sizes[next_latent])
        next_state = self.preimages[next_latent, slot]
        return next_state, self.latent_reward[next_latent]

    def is_target(self, state: Int[ArrayLike, "..."]) -> Array:
        return self.encoder[state] == self.spec.n - 1

    def as_tabular_mdp(self, gamma: float) -> TabularMDP:
        # the observation-level reward is the weight of the encoded latent state
        return TabularMDP(jnp.asarray(latent_transitions(self.spec)), self.latent_reward[self.encoder], gamma)
