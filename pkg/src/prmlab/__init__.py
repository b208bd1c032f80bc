"""Weakly supervised step-scorer laboratory.

Trains a per-step verifier from outcome labels alone: every step
inherits its trajectory's outcome as a pseudo label, and a third
"buffer" probability with a stochastic Bernoulli gate absorbs the label
noise that inevitably lands on correct steps of failed trajectories.
"""

from .core import (
    EPS_PROB,
    StepContent,
    StepProbabilities,
    Trajectory,
    make_trajectory,
    simplex_from_logits,
    validate_trajectory,
)
from .datagen import GenConfig, generate
from .evaluate import (
    BonCandidate,
    BonProblem,
    EvalReport,
    bon_accuracy,
    bon_select,
    harmonic_f1,
    predict_first_error,
    processbench_f1,
    sweep_threshold,
)
from .features import FeaturizerConfig, SparseVector, StepMatrix, featurize_dataset, featurize_step
from .ingest import read_dataset, split_solution, write_dataset
from .model import (
    ScorerParameters,
    TrainConfig,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_dataset,
    train,
)
from .objective import (
    LossConfig,
    ce_grad,
    ce_step_loss,
    expected_grad,
    expected_step_loss,
    grad_gap,
    sample_buffer_factors,
    step_loss_realized,
    trajectory_loss,
)
from .pseudolabel import assign_pseudo_labels

__version__ = "0.1.0"

__all__ = [
    "EPS_PROB",
    "StepContent",
    "StepProbabilities",
    "Trajectory",
    "make_trajectory",
    "simplex_from_logits",
    "validate_trajectory",
    "GenConfig",
    "generate",
    "BonCandidate",
    "BonProblem",
    "EvalReport",
    "bon_accuracy",
    "bon_select",
    "harmonic_f1",
    "predict_first_error",
    "processbench_f1",
    "sweep_threshold",
    "FeaturizerConfig",
    "SparseVector",
    "StepMatrix",
    "featurize_dataset",
    "featurize_step",
    "read_dataset",
    "split_solution",
    "write_dataset",
    "ScorerParameters",
    "TrainConfig",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "score_dataset",
    "train",
    "LossConfig",
    "ce_grad",
    "ce_step_loss",
    "expected_grad",
    "expected_step_loss",
    "grad_gap",
    "sample_buffer_factors",
    "step_loss_realized",
    "trajectory_loss",
    "assign_pseudo_labels",
    "__version__",
]
