"""Hand-written recurrent and convolutional sequence classifiers.

Both architectures consume windows of shape (W, D) (or batches (B, W, D)),
produce class probabilities through a shared softmax or sigmoid head, and
ship exact analytic gradients validated by a finite-difference checker.
"""

from .params import (
    ArchSpec,
    HeadKind,
    LstmSpec,
    ModelParameters,
    TcnSpec,
    init_parameters,
    load_checkpoint,
    param_count,
    param_slots,
    param_views,
    receptive_field,
    save_checkpoint,
)
from .common import sigmoid, softmax
from .lstm import forward as lstm_forward
from .lstm import loss_and_grad as lstm_loss_and_grad
from .tcn import forward as tcn_forward
from .tcn import level_outputs as tcn_level_outputs
from .tcn import loss_and_grad as tcn_loss_and_grad
from .train import (
    AdamState,
    FitResult,
    GradCheckReport,
    TrainConfig,
    TrainingDivergedError,
    adam_update,
    batch_loss_and_grad,
    binary_cross_entropy,
    clip_gradient,
    cross_entropy,
    finite_difference_gradient,
    fit,
    forward,
    grad_check,
    max_relative_error,
    sgd_update,
    train_step,
)

__all__ = [
    "AdamState",
    "ArchSpec",
    "FitResult",
    "GradCheckReport",
    "HeadKind",
    "LstmSpec",
    "ModelParameters",
    "TcnSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "adam_update",
    "batch_loss_and_grad",
    "binary_cross_entropy",
    "clip_gradient",
    "cross_entropy",
    "finite_difference_gradient",
    "fit",
    "forward",
    "grad_check",
    "init_parameters",
    "load_checkpoint",
    "lstm_forward",
    "lstm_loss_and_grad",
    "max_relative_error",
    "param_count",
    "param_slots",
    "param_views",
    "receptive_field",
    "save_checkpoint",
    "sgd_update",
    "sigmoid",
    "softmax",
    "tcn_forward",
    "tcn_level_outputs",
    "tcn_loss_and_grad",
    "train_step",
]
