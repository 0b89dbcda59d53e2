"""Uncertainty-quantified Frechet Autoencoder Distance.

Train a dropout-regularized convolutional autoencoder, sample stochastic
embeddings with Monte Carlo dropout, and score datasets with the mean FAED
plus two trustworthiness readouts: sigma_faed (spread of the per-sample
FAED scores) and pvar (mean predictive variance of the embeddings).
"""

from .data import (
    Dataset,
    Image,
    augment_noise,
    augment_overlay,
    load_dataset_dir,
    load_image_ppm,
    resize_bilinear,
    save_dataset_dir,
    split_halves,
    synth_dataset,
    write_image_ppm,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FaedUqError,
    InsufficientDataError,
    NotPsdError,
    NumericalError,
    PpmParseError,
    TrainingDivergedError,
)
from .harness import (
    ExperimentConfig,
    SweepSpec,
    apply_augmentation,
    cmd_augment,
    cmd_embed,
    cmd_metrics,
    cmd_sweep,
    cmd_synth,
    cmd_train,
    read_embeddings,
    write_embeddings,
)
from .linalg import GaussianSummary, gaussian_summary, sqrtm_psd, sym_eig
from .metrics import (
    EmbeddingTensor,
    FaedDistribution,
    MetricReport,
    RankDeficiencyWarning,
    faed_distribution,
    frechet_distance,
    metric_report,
    pvar,
    sigma_faed,
)
from .nn import (
    ArchitectureConfig,
    Autoencoder,
    TrainConfig,
    adam_step,
    backward,
    build,
    encode_mc,
    fit,
    forward,
    load_checkpoint,
    loss_mse_sum,
    save_checkpoint,
)
from .rng import RngStream, mix64

__version__ = "0.1.0"
