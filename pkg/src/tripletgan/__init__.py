"""Triplet embedding networks trained as the discriminator of a GAN."""

from .data import LabeledDataset, load_idx, make_blobs, read_csv, select_labeled_subset, write_csv
from .evaluation import (
    EmbeddingSet,
    EvalReport,
    embed_dataset,
    evaluate,
    knn_classify,
    mean_average_precision,
)
from .networks import (
    EmbedderSpec,
    GeneratorSpec,
    ModelParams,
    embed,
    generate,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .objectives import (
    LossReport,
    combined_disc_loss,
    disc_prob,
    feature_matching_loss,
    triplet_loss,
    triplet_prob,
    unsup_disc_loss,
)
from .sampling import (
    MiningConfig,
    TripletBatch,
    enumerate_triplet_count,
    mine_hard_triplets,
    sample_noise,
    sample_random_triplets,
)
from .tensor import Tensor, backward
from .trainer import ModelConfig, OptimizerConfig, TrainConfig, TrainState, fit, pretrain, train_epoch

__version__ = "0.1.0"
