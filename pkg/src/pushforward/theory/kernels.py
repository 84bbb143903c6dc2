"""
Finite Markov kernels between subsets of the real line, their Lipschitz constants in Wasserstein distance, and the
encoder/decoder pairs that push a state process through a latent space.
"""
import equinox as eqx
import jax
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, ArrayLike, Float, Int

from pushforward.envs.latent_riverswim import LatentRiverSwimSpec, decoder_matrix, encoder_table
from pushforward.envs.mdp import TabularMDP, check_row_stochastic
from pushforward.theory.wasserstein import wasserstein_weighted
from pushforward.utils.jax_utils import is_concrete


def _check_increasing(coords: Array, what: str):
    if coords.ndim != 1:
        raise ValueError(f"{what} must be a vector, got shape {coords.shape}")
    if not is_concrete(coords):
        return
    gaps = np.diff(np.asarray(coords))
    if np.any(gaps == 0):
        raise ValueError(f"{what} contain duplicates: {coords}")
    if np.any(gaps < 0):
        raise ValueError(f"{what} must be strictly increasing: {coords}")


class FiniteKernel(eqx.Module):
    """
    K(s, ·) for s ranging over the points `coords` of the real line; every row is a distribution over the target
    points `support`.
    """

    coords: Float[Array, "n"]
    support: Float[Array, "k"]
    probs: Float[Array, "n k"]

    def __init__(self, coords: ArrayLike, support: ArrayLike, probs: ArrayLike):
        self.coords = jnp.asarray(coords, dtype=jnp.result_type(float))
        self.support = jnp.asarray(support, dtype=jnp.result_type(float))
        self.probs = jnp.asarray(probs, dtype=jnp.result_type(float))
        _check_increasing(self.coords, "kernel coordinates")
        if self.probs.shape != (self.coords.shape[0], self.support.shape[0]):
            raise ValueError(
                f"kernel rows must have shape {(self.coords.shape[0], self.support.shape[0])}, got {self.probs.shape}"
            )
        check_row_stochastic(self.probs, 1e-9)

    @property
    def num_points(self) -> int:
        return self.coords.shape[0]

    def compose(self, f_index: Int[ArrayLike, "d"], f_coords: Float[ArrayLike, "d"]) -> "FiniteKernel":
        """K∘f: the kernel on the domain of f, where f maps point i (at f_coords[i]) to kernel point f_index[i]."""
        return FiniteKernel(f_coords, self.support, self.probs[jnp.asarray(f_index)])


def _pairwise_slopes(numerators: Array, coords: Array) -> Array:
    i, j = jnp.triu_indices(coords.shape[0], k=1)
    return numerators[i, j] / jnp.abs(coords[i] - coords[j])


def lipschitz_constant(k: FiniteKernel, p: float = 1.0) -> float:
    """max over point pairs of W_p(K(s_i, ·), K(s_j, ·)) / |s_i - s_j|"""
    if k.num_points < 2:
        raise ValueError("a Lipschitz constant needs at least two kernel points")
    i, j = jnp.triu_indices(k.num_points, k=1)
    distances = jax.vmap(lambda a, b: wasserstein_weighted(k.support, a, k.support, b, p))(k.probs[i], k.probs[j])
    return float(jnp.max(distances / jnp.abs(k.coords[i] - k.coords[j])))


def map_lipschitz_constant(values: Float[ArrayLike, "d"], coords: Float[ArrayLike, "d"]) -> float:
    """Max pairwise slope |f(s_i) - f(s_j)| / |s_i - s_j| of a map given by its values at increasing points."""
    values = jnp.asarray(values, dtype=jnp.result_type(float))
    coords = jnp.asarray(coords, dtype=jnp.result_type(float))
    _check_increasing(coords, "map coordinates")
    if coords.shape[0] < 2:
        return 0.0
    return float(jnp.max(_pairwise_slopes(jnp.abs(values[:, None] - values[None, :]), coords)))


class EncoderDecoderPair(eqx.Module):
    """
    A deterministic encoder S from states (at `state_coords`) to the points of the decoder kernel, and a decoder
    P_D from those latent points back to distributions over the states.
    """

    state_coords: Float[Array, "state"]
    encoder_index: Int[Array, "state"]
    decoder: FiniteKernel

    def __init__(self, state_coords: ArrayLike, encoder_index: ArrayLike, decoder: FiniteKernel):
        self.state_coords = jnp.asarray(state_coords, dtype=jnp.result_type(float))
        self.encoder_index = jnp.asarray(encoder_index)
        self.decoder = decoder
        _check_increasing(self.state_coords, "state coordinates")
        if self.encoder_index.shape != self.state_coords.shape:
            raise ValueError("the encoder must map every state")
        if not all(is_concrete(x) for x in (self.encoder_index, self.state_coords, decoder.support)):
            return
        encoder_index = np.asarray(self.encoder_index)
        if np.any((encoder_index < 0) | (encoder_index >= decoder.num_points)):
            raise ValueError("encoder indices must address decoder points")
        if not np.array_equal(np.asarray(decoder.support), np.asarray(self.state_coords)):
            raise ValueError("the decoder must produce distributions over the states")

    @property
    def encoder_lipschitz(self) -> float:
        return map_lipschitz_constant(self.decoder.coords[self.encoder_index], self.state_coords)

    def decoder_lipschitz(self, p: float = 1.0) -> float:
        return lipschitz_constant(self.decoder, p)

    def reconstruction(self) -> Float[Array, "state state"]:
        """M[x', x''] = P_D(x'' | S(x'))"""
        return self.decoder.probs[self.encoder_index]

    def transform(self, mdp: TabularMDP) -> TabularMDP:
        """The kernel of the re-encoded process: x' ~ P(· | x, a), then x'' ~ P_D(· | S(x'))."""
        return mdp.replace_transitions(mdp.transitions @ self.reconstruction())


def identity_pair(num_states: int) -> EncoderDecoderPair:
    coords = jnp.arange(num_states, dtype=jnp.result_type(float))
    return EncoderDecoderPair(coords, jnp.arange(num_states), FiniteKernel(coords, coords, jnp.eye(num_states)))


def constant_decoder_pair(num_states: int, num_latent: int, target: int = 0) -> EncoderDecoderPair:
    """Every latent point decodes to the same state, so P_D has Lipschitz constant 0."""
    coords = jnp.arange(num_states, dtype=jnp.result_type(float))
    rows = jnp.zeros((num_latent, num_states)).at[:, target].set(1.0)
    encoder = jnp.arange(num_states) * num_latent // num_states
    return EncoderDecoderPair(coords, encoder, FiniteKernel(jnp.arange(num_latent), coords, rows))


def latent_encoder_decoder(spec: LatentRiverSwimSpec) -> EncoderDecoderPair:
    """
    Latent RiverSwim's encoder and uniform-preimage decoder. Observations sit at their flat ids (lexicographic in
    (i, j)), latent states at k = 1..n.
    """
    state_coords = np.arange(spec.num_observations, dtype=float)
    decoder = FiniteKernel(np.arange(1, spec.n + 1, dtype=float), state_coords, decoder_matrix(spec))
    return EncoderDecoderPair(state_coords, encoder_table(spec).reshape(-1) - 1, decoder)
