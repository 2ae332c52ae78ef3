from training.ensemble import EnsembleSpec, leave_one_out
from training.grid_search import GridResult, alpha_grid_search, select_alpha
from training.losses import (
    classification_loss_ensemble,
    classification_loss_whitebox,
    generator_loss,
    perceptual_loss,
)
from training.trainer import LOG_COLUMNS, train_attack, train_detector, write_run_artifacts

__all__ = [
    "EnsembleSpec",
    "GridResult",
    "LOG_COLUMNS",
    "alpha_grid_search",
    "classification_loss_ensemble",
    "classification_loss_whitebox",
    "generator_loss",
    "leave_one_out",
    "perceptual_loss",
    "select_alpha",
    "train_attack",
    "train_detector",
    "write_run_artifacts",
]
