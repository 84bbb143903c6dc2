from dataclasses import dataclass
from typing import Callable, List, Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
from jaxtyping import Array, ArrayLike, Float, Int, PRNGKeyArray, PyTree


DAIF_HEAD_OFFSET = 10.0


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dim: int  # 0 means a single linear layer
    output_dim: int

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1 or self.hidden_dim < 0:
            raise ValueError(f"invalid MLP dims: {self}")

    @staticmethod
    def for_critic(num_states: int, num_actions: int, hidden_dim: int, output_dim: int) -> "MlpSpec":
        return MlpSpec(num_states + num_actions + 1, hidden_dim, output_dim)


def _init_linear(in_features: int, out_features: int, key: PRNGKeyArray) -> eqx.nn.Linear:
    """Linear layer with weights uniform in ±1/√fan_in and zero bias."""
    k_layer, k_weight = jax.random.split(key)
    layer = eqx.nn.Linear(in_features, out_features, key=k_layer)
    bound = 1.0 / jnp.sqrt(in_features)
    weight = jax.random.uniform(k_weight, (out_features, in_features), minval=-bound, maxval=bound)
    return eqx.tree_at(lambda lin: (lin.weight, lin.bias), layer, (weight, jnp.zeros(out_features)))


class Mlp(eqx.Module):
    """A linear layer, or one ReLU hidden layer followed by a linear readout."""

    layers: List[eqx.nn.Linear]
    spec: MlpSpec = eqx.field(static=True)

    def __init__(self, spec: MlpSpec, *, key: PRNGKeyArray):
        self.spec = spec
        if spec.hidden_dim == 0:
            self.layers = [_init_linear(spec.input_dim, spec.output_dim, key)]
        else:
            k1, k2 = jax.random.split(key)
            self.layers = [
                _init_linear(spec.input_dim, spec.hidden_dim, k1),
                _init_linear(spec.hidden_dim, spec.output_dim, k2),
            ]

    def __call__(self, x: Float[ArrayLike, "input"]) -> Float[Array, "output"]:
        x = jnp.asarray(x)
        if x.shape != (self.spec.input_dim,):
            raise ValueError(f"expected input of shape ({self.spec.input_dim},), got {x.shape}")
        for layer in self.layers[:-1]:
            x = jax.nn.relu(layer(x))
        return self.layers[-1](x)


class QuantileMlp(eqx.Module):
    """
    The tabular critic network: (state, action, τ) → output head. One output for IQQL (the τ-quantile), three for
    DAIF (μ, raw α, raw β; see `head_transform_daif`).
    """

    mlp: Mlp
    num_states: int = eqx.field(static=True)
    num_actions: int = eqx.field(static=True)

    def __init__(self, num_states: int, num_actions: int, hidden_dim: int, output_dim: int, *, key: PRNGKeyArray):
        self.num_states = num_states
        self.num_actions = num_actions
        self.mlp = Mlp(MlpSpec.for_critic(num_states, num_actions, hidden_dim, output_dim), key=key)

    @property
    def spec(self) -> MlpSpec:
        return self.mlp.spec

    def __call__(self, state: Int[ArrayLike, ""], action: Int[ArrayLike, ""], tau: ArrayLike) -> Float[Array, "out"]:
        return self.mlp(encode_input(state, action, tau, self.num_states, self.num_actions))

    def value(self, state, action, tau) -> Array:
        """The value head: the quantile for IQQL, μ for DAIF. Maps over leading batch axes of the inputs."""
        state, action, tau = jnp.broadcast_arrays(jnp.asarray(state), jnp.asarray(action), jnp.asarray(tau))
        fn = lambda x, a, t: self(x, a, t)[0]  # noqa: E731
        for _ in range(state.ndim):
            fn = jax.vmap(fn)
        return fn(state, action, tau)


def encode_input(
    state: Int[ArrayLike, ""], action: Int[ArrayLike, ""], tau: ArrayLike, num_states: int, num_actions: int
) -> Float[Array, "input"]:
    """one-hot(state) ⊕ one-hot(action) ⊕ τ"""
    return jnp.concatenate(
        [
            jax.nn.one_hot(state, num_states, dtype=jnp.result_type(float)),
            jax.nn.one_hot(action, num_actions, dtype=jnp.result_type(float)),
            jnp.reshape(jnp.asarray(tau, dtype=jnp.result_type(float)), (1,)),
        ]
    )


def forward(params: Mlp, x: Float[ArrayLike, "input"]) -> Tuple[Float[Array, "output"], Callable]:
    """Evaluates the network and returns the output together with the pullback (the cached activations)."""
    return jax.vjp(lambda m: m(x), params)


def backward(cache: Callable, output_gradient: Float[ArrayLike, "output"]) -> PyTree:
    """Exact reverse-mode gradient with respect to the parameters of the `forward` call that produced `cache`."""
    (grads,) = cache(jnp.asarray(output_gradient, dtype=jnp.result_type(float)))
    return grads


def head_transform_daif(
    raw: Float[ArrayLike, "... 3"], offset: float = DAIF_HEAD_OFFSET
) -> Tuple[Array, Array, Array]:
    """(μ, α, β) = (raw₀, offset + softplus(raw₁), offset + softplus(raw₂))"""
    raw = jnp.asarray(raw)
    return raw[..., 0], offset + jax.nn.softplus(raw[..., 1]), offset + jax.nn.softplus(raw[..., 2])
