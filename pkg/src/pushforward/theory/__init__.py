from pushforward.theory.certificates import (
    Certificate,
    check_fixed_point,
    check_lemma1,
    check_lemma2,
    check_theorem1,
    random_kernel_pair,
    random_mdp,
)
from pushforward.theory.kernels import (
    EncoderDecoderPair,
    FiniteKernel,
    latent_encoder_decoder,
    lipschitz_constant,
    map_lipschitz_constant,
)
from pushforward.theory.returns import (
    backup_all,
    bellman_backup,
    iterate_bellman,
    max_wasserstein,
    return_distribution,
    return_distributions,
    truncation_horizon,
)
from pushforward.theory.wasserstein import EmpiricalReturnDist, wasserstein_p, wasserstein_weighted
