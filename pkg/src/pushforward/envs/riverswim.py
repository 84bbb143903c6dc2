from dataclasses import dataclass
from typing import Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, ArrayLike, Float, Int, PRNGKeyArray

from pushforward.envs.mdp import TabularEnv, TabularMDP, check_row_stochastic


# action id -> signed move
RIVERSWIM_ACTIONS = (-1, +1)

DESIRED_WEIGHT = 0.99
START_WEIGHT = 0.005


@dataclass(frozen=True)
class RiverSwimSpec:
    n: int
    p_forward: float = 0.3
    p_backward: float = 0.1

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"RiverSwim needs at least 3 states, got n={self.n}")
        if not (self.p_forward > 0 and self.p_backward > 0 and self.p_forward + self.p_backward < 1):
            raise ValueError(
                "RiverSwim needs 0 < p_forward, 0 < p_backward and p_forward + p_backward < 1, got"
                f" p_forward={self.p_forward}, p_backward={self.p_backward}"
            )


def _check_state(spec: RiverSwimSpec, k: int):
    if not 1 <= k <= spec.n:
        raise ValueError(f"state {k} is outside 1..{spec.n}")


def riverswim_transition_row(spec: RiverSwimSpec, k: int, a: int) -> np.ndarray:
    """
    P(· | X = k, A = a) for 1-based state k and signed action a ∈ {-1, +1}. Entry i of the result is the
    probability of state i + 1.
    """
    _check_state(spec, k)
    if a not in RIVERSWIM_ACTIONS:
        raise ValueError(f"RiverSwim action must be -1 or +1, got {a}")

    n = spec.n
    pf, pb = spec.p_forward, spec.p_backward
    row = np.zeros(n)

    def add(target: int, mass: float):
        if mass > 0:
            row[target - 1] += mass

    if a == +1:
        add(k + 1, pf * (2 <= k <= n - 1) + (1 - (pf + pb)) * (k == 1))
        add(k, (1 - (pf + pb)) * (k >= 2) + (pf + pb) * (k == 1))
        add(k - 1, pb * (2 <= k <= n - 1) + (pf + pb) * (k == n))
    else:
        add(k, 1.0 * (k == 1))
        add(k - 1, 1.0 * (k - 1 >= 1))

    return row


def desired_state_weights(n: int) -> np.ndarray:
    """P_R: 0.99 on the far end, 0.005 on the start, the remaining 0.005 spread over the interior."""
    weights = np.full(n, START_WEIGHT / (n - 2))
    weights[0] = START_WEIGHT
    weights[-1] = DESIRED_WEIGHT
    return weights


def riverswim_reward(spec: RiverSwimSpec, k: int) -> float:
    _check_state(spec, k)
    return float(desired_state_weights(spec.n)[k - 1])


def riverswim_transitions(spec: RiverSwimSpec) -> np.ndarray:
    """[n, 2, n] tensor of transition rows, indexed by 0-based state and action id."""
    rows = np.stack(
        [np.stack([riverswim_transition_row(spec, k, a) for a in RIVERSWIM_ACTIONS]) for k in range(1, spec.n + 1)]
    )
    check_row_stochastic(rows)
    return rows


class RiverSwim(TabularEnv):
    """
    RiverSwim with flat state ids 0..n-1 (state k is id k - 1) and action ids 0 (left, -1) and 1 (right, +1).
    Starts at the leftmost state; continuing, never resets.
    """

    spec: RiverSwimSpec = eqx.field(static=True)
    transitions: Float[Array, "state action next_state"]
    reward: Float[Array, "state"]

    def __init__(self, spec: RiverSwimSpec):
        self.spec = spec
        self.transitions = jnp.asarray(riverswim_transitions(spec))
        self.reward = jnp.asarray(desired_state_weights(spec.n))

    @property
    def num_states(self) -> int:
        return self.spec.n

    @property
    def num_actions(self) -> int:
        return len(RIVERSWIM_ACTIONS)

    @property
    def initial_state(self) -> int:
        return 0

    @property
    def left_action(self) -> int:
        return RIVERSWIM_ACTIONS.index(-1)

    @property
    def right_action(self) -> int:
        return RIVERSWIM_ACTIONS.index(+1)

    def step(self, state: Int[ArrayLike, ""], action: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple[Array, Array]:
        next_state = jax.random.choice(key, self.num_states, p=self.transitions[state, action])
        return next_state, self.reward[next_state]

    def is_target(self, state: Int[ArrayLike, "..."]) -> Array:
        return jnp.asarray(state) == self.num_states - 1

    def as_tabular_mdp(self, gamma: float) -> TabularMDP:
        return TabularMDP(self.transitions, self.reward, gamma)
