import abc
from typing import Tuple

import equinox as eqx
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, ArrayLike, Float, Int, PRNGKeyArray

from pushforward.utils.jax_utils import is_concrete


ROW_TOLERANCE = 1e-12


class TabularMDP(eqx.Module):
    """
    A finite controlled Markov process. `transitions[x, a]` is the distribution of the next state, `reward[x]` is the
    desired-state weight of state x and `gamma` the discount.
    """

    transitions: Float[Array, "state action next_state"]
    reward: Float[Array, "state"]
    gamma: float = eqx.field(static=True)

    def __check_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.transitions.ndim != 3 or self.transitions.shape[0] != self.transitions.shape[2]:
            raise ValueError(f"transitions must have shape [S, A, S], got {self.transitions.shape}")
        if self.reward.shape != (self.transitions.shape[0],):
            raise ValueError(f"reward must have shape [{self.transitions.shape[0]}], got {self.reward.shape}")
        if is_concrete(self.transitions):
            check_row_stochastic(self.transitions)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    def policy_kernel(self, policy: Int[Array, "state"]) -> Float[Array, "state next_state"]:
        """P_π(x' | x) = P(x' | x, π(x))"""
        return self.transitions[jnp.arange(self.num_states), policy]

    def replace_transitions(self, transitions: Float[Array, "state action next_state"]) -> "TabularMDP":
        return TabularMDP(transitions, self.reward, self.gamma)


class Transition(eqx.Module):
    """One experience record (x, a, r, x'). Fields may carry a leading batch axis."""

    state: Int[Array, "..."]
    action: Int[Array, "..."]
    reward: Float[Array, "..."]
    next_state: Int[Array, "..."]


def check_row_stochastic(rows: ArrayLike, tolerance: float = ROW_TOLERANCE):
    """Host-side check, run on the numpy view of the rows. Tracers are skipped."""
    if not is_concrete(rows):
        return
    rows = np.asarray(rows)
    if np.any(rows < 0):
        raise ValueError("transition rows must be nonnegative")
    worst = float(np.max(np.abs(np.sum(rows, axis=-1) - 1.0)))
    if worst > tolerance:
        raise ValueError(f"transition rows must sum to 1 (worst deviation {worst:.3e})")


class TabularEnv(eqx.Module):
    """
    Interface shared by the tabular environments. States and actions are flat integer ids; `step` is pure and takes
    the PRNG key explicitly, so an environment is a plain value that can live inside a `lax.scan` carry.
    """

    @property
    @abc.abstractmethod
    def num_states(self) -> int:
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def num_actions(self) -> int:
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def initial_state(self) -> int:
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def left_action(self) -> int:
        """The action id that moves towards the start of the river."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def right_action(self) -> int:
        raise NotImplementedError

    @abc.abstractmethod
    def step(self, state: Int[ArrayLike, ""], action: Int[ArrayLike, ""], key: PRNGKeyArray) -> Tuple[Array, Array]:
        """Samples (next_state, reward); the reward is paid for the state arrived at."""
        raise NotImplementedError

    @abc.abstractmethod
    def is_target(self, state: Int[ArrayLike, "..."]) -> Array:
        """True where `state` is the most desired state (the one the visitation metric counts)."""
        raise NotImplementedError

    @abc.abstractmethod
    def as_tabular_mdp(self, gamma: float) -> TabularMDP:
        raise NotImplementedError
