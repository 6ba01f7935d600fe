"""Twin-bootstrap training: two models on independent bootstrap resamples.

The divergence between the twins gives a per-group parameter variance that
is used both to perturb the weights during training and as an uncertainty
estimate afterwards.
"""
__version__ = "0.1.0"

from twinboot.core import (
    ParamGrouping,
    estimate_sigma,
    group_by_layers,
    group_by_patches,
    group_whole,
    sample_around,
)
from twinboot.engine import (
    History,
    ResetSchedule,
    TrainConfig,
    TwinState,
    mean_reset,
    run_baseline,
    run_training,
    train_step,
)
from twinboot.optim import DivergedError
from twinboot.rng import RngStream

__all__ = [
    "DivergedError",
    "History",
    "ParamGrouping",
    "ResetSchedule",
    "RngStream",
    "TrainConfig",
    "TwinState",
    "estimate_sigma",
    "group_by_layers",
    "group_by_patches",
    "group_whole",
    "mean_reset",
    "run_baseline",
    "run_training",
    "sample_around",
    "train_step",
]
