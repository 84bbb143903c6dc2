import equinox as eqx
import jax.numpy as jnp
from jaxtyping import Array, ArrayLike, Float


class EmpiricalReturnDist(eqx.Module):
    """m equally weighted return samples, kept sorted ascending."""

    atoms: Float[Array, "m"]

    @staticmethod
    def from_samples(samples: Float[ArrayLike, "m"]) -> "EmpiricalReturnDist":
        return EmpiricalReturnDist(jnp.sort(jnp.asarray(samples, dtype=jnp.result_type(float)), axis=-1))

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[-1]

    def mean(self) -> Array:
        return jnp.mean(self.atoms, axis=-1)


def wasserstein_p(a: EmpiricalReturnDist, b: EmpiricalReturnDist, p: float = 1.0) -> Array:
    """
    Exact 1-D p-Wasserstein distance. For equal atom counts the sorted coupling gives (1/m Σ |a_i - b_i|^p)^(1/p);
    otherwise the uniform weights are coupled through their quantile functions. Leading axes are batched.
    """
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if a.atoms.shape[-1] == b.atoms.shape[-1]:
        return jnp.mean(jnp.abs(a.atoms - b.atoms) ** p, axis=-1) ** (1.0 / p)

    def uniform(atoms):
        return jnp.full(atoms.shape, 1.0 / atoms.shape[-1])

    return wasserstein_weighted(a.atoms, uniform(a.atoms), b.atoms, uniform(b.atoms), p)


def wasserstein_weighted(
    xs: Float[ArrayLike, "n"],
    wx: Float[ArrayLike, "n"],
    ys: Float[ArrayLike, "k"],
    wy: Float[ArrayLike, "k"],
    p: float = 1.0,
) -> Array:
    """
    Exact p-Wasserstein distance between two weighted discrete distributions on the real line:
    (∫₀¹ |F⁻¹(u) - G⁻¹(u)|^p du)^(1/p), integrated piecewise over the merged CDF levels. Weights need not be
    normalized; zero weights are allowed.
    """
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    xs, wx, ys, wy = (jnp.asarray(v, dtype=jnp.result_type(float)) for v in (xs, wx, ys, wy))

    def cdf(values, weights):
        order = jnp.argsort(values)
        values, weights = values[order], weights[order]
        levels = jnp.cumsum(weights) / jnp.sum(weights)
        return values, levels.at[-1].set(1.0)

    xs, cx = cdf(xs, wx)
    ys, cy = cdf(ys, wy)

    upper = jnp.sort(jnp.concatenate([cx, cy]))
    lower = jnp.concatenate([jnp.zeros(1), upper[:-1]])
    width = upper - lower
    mid = 0.5 * (upper + lower)

    qx = xs[jnp.clip(jnp.searchsorted(cx, mid, side="left"), 0, xs.shape[0] - 1)]
    qy = ys[jnp.clip(jnp.searchsorted(cy, mid, side="left"), 0, ys.shape[0] - 1)]
    return jnp.sum(width * jnp.abs(qx - qy) ** p) ** (1.0 / p)
