import equinox as eqx
import jax
import jax.numpy as jnp
from jaxtyping import Array, Float, Int, PRNGKeyArray

from pushforward.envs.mdp import Transition


class ReplayBuffer(eqx.Module):
    """
    Fixed-capacity ring buffer of transitions. Sampling draws indices uniformly from the stored items with the given
    key, so a batch depends only on the key and the insertion history.
    """

    states: Int[Array, "capacity"]
    actions: Int[Array, "capacity"]
    rewards: Float[Array, "capacity"]
    next_states: Int[Array, "capacity"]
    count: Int[Array, ""]  # total insertions
    capacity: int = eqx.field(static=True)

    @staticmethod
    def empty(capacity: int) -> "ReplayBuffer":
        if capacity < 1:
            raise ValueError(f"replay capacity must be positive, got {capacity}")
        ints = jnp.zeros((capacity,), dtype=jnp.int32)
        return ReplayBuffer(ints, ints, jnp.zeros((capacity,)), ints, jnp.zeros((), dtype=jnp.int32), capacity)

    @property
    def size(self) -> Array:
        return jnp.minimum(self.count, self.capacity)

    def add(self, t: Transition) -> "ReplayBuffer":
        i = self.count % self.capacity
        return ReplayBuffer(
            self.states.at[i].set(t.state),
            self.actions.at[i].set(t.action),
            self.rewards.at[i].set(t.reward),
            self.next_states.at[i].set(t.next_state),
            self.count + 1,
            self.capacity,
        )

    def sample(self, key: PRNGKeyArray, batch_size: int) -> Transition:
        idx = jax.random.randint(key, (batch_size,), 0, jnp.maximum(self.size, 1))
        return Transition(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])
