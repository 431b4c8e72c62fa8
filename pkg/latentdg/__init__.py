from latentdg.exceptions import (ShapeError, GraphError, DivergenceError,
                                 CheckpointError, ConfigError)

from latentdg.model import ModelConfig, Model, build_model, forward_all, \
    extract_tap_activations
from latentdg.checkpoint import save_checkpoint, load_checkpoint

from latentdg.style import channel_stats, ddf, reduce_dim, fit_reduction, \
    flat_features
from latentdg.clustering import kmeans
from latentdg.diagnostics import agreement_matrix, optimal_permutation, nmi
from latentdg.domains import PseudoDomainState, reassign

from latentdg.losses import LossConfig, classification_loss, \
    adversarial_loss, entropy_loss, lambda_schedule, compose_total

from latentdg.data import generate_dataset, make_splits, load_image_folder
from latentdg.data.augment import augment

from latentdg.config import DataConfig, TrainConfig, load_config
from latentdg.trainer import train, evaluate, RunRecord
from latentdg.sweep import ExperimentPlan, run_sweep, aggregate
