"""
Special functions and samplers shared by the agents: the check loss, digamma, the asymmetric Laplace (ALD)
log-density, its inverse-gamma marginalized expectation, and Gamma/Dirichlet sampling.

Everything here is a pure function of arrays (and an explicit PRNG key for the samplers), so it can be used under
`jit`, `vmap` and `grad`.
"""
import equinox as eqx
import jax
import jax.numpy as jnp
import numpy as np
from jaxtyping import Array, ArrayLike, Float, PRNGKeyArray

from pushforward.utils.jax_utils import is_concrete


class AldParams(eqx.Module):
    """Asymmetric Laplace distribution with location `mu`, scale `sigma` and quantile fraction `tau`."""

    mu: ArrayLike
    sigma: ArrayLike
    tau: ArrayLike

    def __check_init__(self):
        if is_concrete(self.sigma) and np.any(np.asarray(self.sigma) <= 0):
            raise ValueError(f"ALD scale must be positive, got {self.sigma}")
        if is_concrete(self.tau) and np.any((np.asarray(self.tau) <= 0) | (np.asarray(self.tau) >= 1)):
            raise ValueError(f"quantile fraction must lie in (0, 1), got {self.tau}")


class InvGammaParams(eqx.Module):
    """Inverse-gamma prior IG(alpha, beta) over the ALD scale."""

    alpha: ArrayLike
    beta: ArrayLike

    def __check_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if is_concrete(value) and np.any(np.asarray(value) <= 0):
                raise ValueError(f"inverse-gamma {name} must be positive, got {value}")


def check_loss(u: ArrayLike, tau: ArrayLike) -> Array:
    """
    The quantile-regression check loss (|u| + (2τ - 1)u) / 2.

    Written as a select so that the subgradient at the kink is the sign(0) = +1 branch, i.e. d/du = τ at u = 0.
    """
    u = jnp.asarray(u)
    return jnp.where(u >= 0, tau * u, (tau - 1.0) * u)


# coefficients B_2k / 2k of the asymptotic expansion, k = 1..8
_DIGAMMA_ASYMPTOTIC = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    1.0 / 132,
    -691.0 / 32760,
    1.0 / 12,
    -3617.0 / 8160,
)
_DIGAMMA_SHIFT_TO = 6.0


def digamma(x: ArrayLike) -> Array:
    """
    ψ(x) for x > 0, via upward recurrence ψ(x) = ψ(x + 1) - 1/x until x ≥ 6 and then the 8-term asymptotic
    series. Accurate to ~1e-13 in float64 on [1e-3, 1e6]. Differentiable (it's plain jnp).
    """
    x = jnp.asarray(x, dtype=jnp.result_type(float))
    x = eqx.error_if(x, jnp.any(x <= 0), "digamma is only defined for x > 0")

    z = x
    acc = jnp.zeros_like(x)
    # at most 6 shifts are needed to get from (0, 6) to [6, 12)
    for _ in range(int(_DIGAMMA_SHIFT_TO)):
        needs_shift = z < _DIGAMMA_SHIFT_TO
        acc = acc - jnp.where(needs_shift, 1.0 / z, 0.0)
        z = jnp.where(needs_shift, z + 1.0, z)

    inv_z2 = 1.0 / (z * z)
    series = jnp.zeros_like(z)
    # Horner on 1/z^2, highest order first
    for coeff in reversed(_DIGAMMA_ASYMPTOTIC):
        series = (series + coeff) * inv_z2

    return acc + jnp.log(z) - 0.5 / z - series


def ald_logpdf(g: ArrayLike, p: AldParams) -> Array:
    """log f(g | μ, σ, τ) = log τ(1-τ) - log σ - ℓ_τ(g - μ)/σ"""
    tau = jnp.asarray(p.tau)
    return jnp.log(tau * (1.0 - tau)) - jnp.log(p.sigma) - check_loss(jnp.asarray(g) - p.mu, tau) / p.sigma


def expected_ald_loglik(g: ArrayLike, mu: ArrayLike, ig: InvGammaParams, tau: ArrayLike) -> Array:
    """
    E_{σ ~ IG(α, β)}[log f(g | μ, σ, τ)], marginalized analytically using E[log σ] = log β - ψ(α) and
    E[1/σ] = α/β:

        log τ(1-τ) - log β + ψ(α) - (α / 2β) (|g - μ| + (2τ - 1)(g - μ))

    This is the (negated) critic objective of the distributional active inference agent.
    """
    tau = jnp.asarray(tau)
    alpha = jnp.asarray(ig.alpha)
    beta = jnp.asarray(ig.beta)
    # (|u| + (2τ-1)u) / 2 == check_loss(u), so the residual term is (α/β) ℓ_τ(u)
    residual = check_loss(jnp.asarray(g) - mu, tau)
    return jnp.log(tau * (1.0 - tau)) - jnp.log(beta) + digamma(alpha) - (alpha / beta) * residual


def sample_gamma(shape_param: ArrayLike, key: PRNGKeyArray, sample_shape=()) -> Float[Array, "..."]:
    """
    Gamma(shape, 1) draws. `jax.random.gamma` is Marsaglia–Tsang with the Gamma(shape + 1)·U^(1/shape) boost for
    shape < 1, which is exactly the sampler we want.
    """
    shape_param = jnp.asarray(shape_param, dtype=jnp.result_type(float))
    out_shape = tuple(sample_shape) + shape_param.shape
    return jax.random.gamma(key, shape_param, shape=out_shape)


def sample_dirichlet(concentration: ArrayLike, key: PRNGKeyArray) -> Float[Array, "... k"]:
    """
    Dirichlet draw(s) as normalized independent Gamma draws. The last axis indexes categories; leading axes are
    batched, so a whole [state, action, next_state] posterior is sampled in one call.
    """
    concentration = jnp.asarray(concentration, dtype=jnp.result_type(float))
    concentration = eqx.error_if(
        concentration, jnp.any(concentration <= 0), "Dirichlet concentration must be strictly positive"
    )
    gammas = sample_gamma(concentration, key)
    return gammas / jnp.sum(gammas, axis=-1, keepdims=True)
