"""Evolving connectivity for recurrent spiking networks."""

from ._core import (
    ConfigError,
    DimensionError,
    Error,
    FormatError,
    Genome,
    MetricsRow,
    NetworkConfig,
    ProbabilityModel,
    ProtocolError,
    Task,
    Trainer,
    decode_checkpoint,
    decode_mask,
    ec_update,
    ec_update_explicit,
    encode_checkpoint,
    encode_mask,
    episode_seed,
    extract,
    generation_seed,
    init_model,
    kernel_bench,
    normalize_config,
    packed_matvec,
    sample_genome,
    shape_returns,
    train,
)

__version__ = "0.1.0"
