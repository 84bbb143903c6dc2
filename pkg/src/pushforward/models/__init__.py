from pushforward.models.loss import daif_loss, iqql_loss
from pushforward.models.mlp import Mlp, MlpSpec, QuantileMlp, backward, encode_input, forward, head_transform_daif
