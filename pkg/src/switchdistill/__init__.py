"""Desk-scale online knowledge distillation with adaptive mode switching.

Teacher/student pairs (and triples) train together; each iteration the
distillation gap between their softened predictions is compared against an
adaptive threshold, switching between reciprocal training and a
frozen-teacher mode that lets the student catch up.
"""

__version__ = "0.1.0"

from .datasets import Dataset, generate_blobs, load_cifar_binary, load_idx
from .gap import EXPERT, LEARNING, GapState, batch_gap_state, decide_mode, epsilon_factor, gap, threshold
from .losses import (
    LossBreakdown,
    ProbDist,
    ce_loss,
    degeneration_curve,
    ensemble_target,
    entropy,
    kl_loss,
    one_hot,
    soften,
    student_logit_grad,
    teacher_logit_grad,
)
from .network import Conv2d, Dense, Gradients, NetworkParams, backward, conv_mlp, forward, init_params, mlp
from .optim import OptimizerState, init_optimizer, step
from .training import (
    ModeTimeline,
    NetworkDef,
    OptimizerSettings,
    PairState,
    TrainConfig,
    TrainResult,
    evaluate,
    run_training,
    train_multi,
    train_pair,
)

__all__ = [
    "Dataset",
    "generate_blobs",
    "load_cifar_binary",
    "load_idx",
    "EXPERT",
    "LEARNING",
    "GapState",
    "batch_gap_state",
    "decide_mode",
    "epsilon_factor",
    "gap",
    "threshold",
    "LossBreakdown",
    "ProbDist",
    "ce_loss",
    "degeneration_curve",
    "ensemble_target",
    "entropy",
    "kl_loss",
    "one_hot",
    "soften",
    "student_logit_grad",
    "teacher_logit_grad",
    "Conv2d",
    "Dense",
    "Gradients",
    "NetworkParams",
    "backward",
    "conv_mlp",
    "forward",
    "init_params",
    "mlp",
    "OptimizerState",
    "init_optimizer",
    "step",
    "ModeTimeline",
    "NetworkDef",
    "OptimizerSettings",
    "PairState",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "run_training",
    "train_multi",
    "train_pair",
]
