"""SGD-with-momentum training loop with a per-epoch CSV log.

Training is bit-deterministic for a fixed (seed, data, config): the shuffle
order, the init stream and the fixed-order gradient reduction leave no
hidden state. Final parameters are rounded to the float32 grid so the
checkpoint round-trip is lossless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidInput
from ..pointcloud import Dataset, PointCloud
from .base import DEFAULT_KNN, ModelParams, init_model, quantize_params

OPTIMIZER_TAG = "sgd-momentum"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    learning_rate: float = 0.01
    batch_size: int = 16
    seed: int = 0
    momentum: float = 0.9
    optimizer: str = OPTIMIZER_TAG

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInput("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidInput("learning rate must be > 0")
        if self.batch_size < 1:
            raise InvalidInput("batch size must be >= 1")
        if self.optimizer != OPTIMIZER_TAG:
            raise InvalidInput(f"unsupported optimizer {self.optimizer!r}")


def param_gradient_and_step(model: ModelParams, batch: list[PointCloud],
                            config: TrainConfig, velocity: dict | None = None):
    """One SGD-with-momentum step on the mean batch loss.

    Returns (updated model, updated velocity, mean loss). The gradient sum
    runs in batch order so the reduction order is fixed.
    """
    if not batch:
        raise InvalidInput("empty batch")
    total: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in model.params.items()}
    loss_sum = 0.0
    for cloud in batch:
        loss, _, grads = model.loss_and_grads(cloud.points, cloud.label)
        loss_sum += loss
        for name, g in grads.items():
            total[name] += g
    scale = 1.0 / len(batch)
    if velocity is None:
        velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    new_params = {}
    new_velocity = {}
    for name, p in model.params.items():
        v = config.momentum * velocity[name] + total[name] * scale
        new_velocity[name] = v
        new_params[name] = p - config.learning_rate * v
    updated = ModelParams(model.arch, model.n_classes, new_params, k=model.k)
    return updated, new_velocity, loss_sum * scale


def evaluate_accuracy(model: ModelParams, dataset: Dataset) -> float:
    """Fraction of clouds whose argmax logit equals the label; ties are wrong."""
    if len(dataset) == 0:
        raise InvalidInput("empty dataset")
    correct = 0
    for cloud in dataset:
        logits = model.logits(cloud.points)
        top = logits.max()
        if (logits == top).sum() == 1 and int(np.argmax(logits)) == cloud.label:
            correct += 1
    return correct / len(dataset)


def train_model(arch: str, train_set: Dataset, config: TrainConfig,
                test_set: Dataset | None = None, k: int = DEFAULT_KNN,
                hidden: tuple[int, ...] | None = None):
    """Train from scratch; returns (model, per-epoch log of dicts)."""
    if len(train_set) == 0:
        raise InvalidInput("empty training set")
    for cloud in train_set:
        if cloud.label is None:
            raise InvalidInput("training clouds must be labeled")
    n_classes = len(train_set.class_names)
    init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    model = init_model(arch, n_classes, seed=init_ss, k=k, hidden=hidden)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    velocity = None
    log: list[dict] = []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_weighted = 0.0
        for start in range(0, n, config.batch_size):
            batch = [train_set.clouds[i] for i in order[start:start + config.batch_size]]
            model, velocity, mean_loss = param_gradient_and_step(model, batch, config, velocity)
            loss_weighted += mean_loss * len(batch)
        entry = {
            "epoch": epoch,
            "mean_loss": loss_weighted / n,
            "train_acc": evaluate_accuracy(model, train_set),
            "test_acc": evaluate_accuracy(model, test_set) if test_set is not None else float("nan"),
        }
        log.append(entry)
    return quantize_params(model), log


def write_training_log(path: str | Path, log: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "mean_loss", "train_acc", "test_acc"])
        writer.writeheader()
        for entry in log:
            writer.writerow({k: entry[k] for k in writer.fieldnames})
