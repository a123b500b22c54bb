"""Point-cloud classifiers: mini-PointNet and mini-DGCNN with exact gradients."""

from .base import (
    ARCH_DGCNN,
    ARCH_POINTNET,
    DEFAULT_KNN,
    ModelParams,
    cross_entropy_loss,
    forward_logits,
    init_model,
    input_gradient,
    predict_probs,
    predicted_class,
    quantize_params,
)
from .checkpoint import checkpoint_digest, load_model, model_from_bytes, model_to_bytes, save_model
from .train import (
    TrainConfig,
    evaluate_accuracy,
    param_gradient_and_step,
    train_model,
    write_training_log,
)

__all__ = [
    "ARCH_DGCNN",
    "ARCH_POINTNET",
    "DEFAULT_KNN",
    "ModelParams",
    "TrainConfig",
    "checkpoint_digest",
    "cross_entropy_loss",
    "evaluate_accuracy",
    "forward_logits",
    "init_model",
    "input_gradient",
    "load_model",
    "model_from_bytes",
    "model_to_bytes",
    "param_gradient_and_step",
    "predict_probs",
    "predicted_class",
    "quantize_params",
    "save_model",
    "train_model",
    "write_training_log",
]
