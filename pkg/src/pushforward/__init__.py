import jax


# the certificates and the exact solvers are checked at 1e-10..1e-12, which float32 can't resolve
jax.config.update("jax_enable_x64", True)

import pushforward.config as config  # noqa: E402
import pushforward.logging as logging  # noqa: E402
import pushforward.numerics as numerics  # noqa: E402
