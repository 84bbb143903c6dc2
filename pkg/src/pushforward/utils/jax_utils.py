from typing import Union

import jax
import numpy as np
from jax import numpy as jnp


def jnp_to_python(a: Union[jnp.ndarray, np.ndarray, float, int]):
    if isinstance(a, (float, int)):
        return float(a)
    elif a.shape == () or a.shape == (1,):
        return a.item()
    else:
        return a.tolist()


def is_concrete(x) -> bool:
    """True if `x` holds an actual value, i.e. we're not being traced under jit/vmap/grad."""
    return not isinstance(x, jax.core.Tracer)
