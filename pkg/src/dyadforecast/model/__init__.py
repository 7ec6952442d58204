"""Partner encoder, segment generators, discriminator and their losses."""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .losses import (
    PROB_EPS, LossWeights, adversarial_term, discriminator_loss, generator_loss, generator_loss_terms, mse,
)
from .networks import (
    discriminate, discriminate_tm, encode_partner, encode_tm, forecast, forecast_flat_batch, forecast_tm,
    from_time_major, generate_segment, generate_tm, to_time_major,
)
from .params import ModelConfig, ModelParams, bind, init_params
