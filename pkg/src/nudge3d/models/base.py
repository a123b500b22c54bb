"""Model container, initialization and the inference/gradient entry points.

A model is an architecture tag plus an ordered map of named parameter
arrays. Both architectures are size-agnostic over the number of input
points (global max-pool), so a model trained at one cloud size can score
clouds of another size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput, ModelError
from ..pointcloud import as_points
from . import dgcnn, pointnet
from .common import cross_entropy, glorot_uniform, softmax

ARCH_POINTNET = "mini-pointnet"
ARCH_DGCNN = "mini-dgcnn"

_ARCH_MODULES = {ARCH_POINTNET: pointnet, ARCH_DGCNN: dgcnn}

DEFAULT_KNN = 8


@dataclass
class ModelParams:
    """Named parameter arrays of a classifier plus its architecture descriptor."""

    arch: str
    n_classes: int
    params: dict[str, np.ndarray]
    k: int = 0  # neighbor count, mini-dgcnn only

    def __post_init__(self):
        if self.arch not in _ARCH_MODULES:
            raise ModelError(f"unknown architecture {self.arch!r}")
        self.params = {name: np.asarray(a, dtype=np.float64) for name, a in self.params.items()}
        self._validate()

    def _validate(self):
        sizes = self._expected_sizes()
        expected = set()
        for name, (fan_in, fan_out) in sizes.items():
            expected.update((f"{name}.w", f"{name}.b"))
            w = self.params.get(f"{name}.w")
            b = self.params.get(f"{name}.b")
            if w is None or b is None:
                raise ModelError(f"missing parameter arrays for layer {name!r}")
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ModelError(
                    f"layer {name!r} expects w{(fan_in, fan_out)} b{(fan_out,)}, "
                    f"got w{w.shape} b{b.shape}")
        stray = set(self.params) - expected
        if stray:
            raise ModelError(f"unexpected parameter arrays: {sorted(stray)}")
        for name, a in self.params.items():
            if not np.isfinite(a).all():
                raise ModelError(f"non-finite values in parameter {name!r}")
        if self.arch == ARCH_DGCNN and self.k < 1:
            raise ModelError("mini-dgcnn requires neighbor count k >= 1")

    def _expected_sizes(self) -> dict[str, tuple[int, int]]:
        mod = _ARCH_MODULES[self.arch]
        # widths are read off the stored arrays so narrow variants validate too
        hidden = []
        for name in list(mod.layer_sizes(self.n_classes)):
            w = self.params.get(f"{name}.w")
            if w is None or w.ndim != 2:
                raise ModelError(f"missing or malformed weight for layer {name!r}")
            hidden.append(w.shape[1])
        return mod.layer_sizes(self.n_classes, hidden=tuple(hidden[:-1]))

    @property
    def param_count(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, self.n_classes,
                           {k: v.copy() for k, v in self.params.items()}, k=self.k)

    # inference surface used by the attacks (duck-typed: any object with
    # these three methods can stand in for a trained model)
    def logits(self, cloud) -> np.ndarray:
        pts = as_points(cloud)
        if self.arch == ARCH_DGCNN:
            return dgcnn.forward(self.params, pts, self.k)
        return pointnet.forward(self.params, pts)

    def probs(self, cloud) -> np.ndarray:
        return softmax(self.logits(cloud))

    def input_gradient(self, cloud, label: int) -> np.ndarray:
        _, dx, _ = self.loss_and_grads(cloud, label)
        return dx

    def loss_and_grads(self, cloud, label: int):
        pts = as_points(cloud)
        if not (0 <= label < self.n_classes):
            raise InvalidInput(f"label {label} out of range for {self.n_classes} classes")
        if self.arch == ARCH_DGCNN:
            return dgcnn.loss_and_grads(self.params, pts, label, self.k)
        return pointnet.loss_and_grads(self.params, pts, label)


def quantize_params(model: ModelParams) -> ModelParams:
    """Round parameters to float32-representable values (checkpoint grid)."""
    rounded = {k: v.astype(np.float32).astype(np.float64) for k, v in model.params.items()}
    return ModelParams(model.arch, model.n_classes, rounded, k=model.k)


def init_model(arch: str, n_classes: int, seed: int, k: int = DEFAULT_KNN,
               hidden: tuple[int, ...] | None = None) -> ModelParams:
    """Seeded Glorot-uniform weights, zero biases.

    ``hidden`` overrides the per-layer widths; the defaults are the desk-scale
    mini architectures. Parameters start on the float32 grid so freshly
    initialized models survive a checkpoint round-trip bit-exactly.
    """
    if arch not in _ARCH_MODULES:
        raise ModelError(f"unknown architecture {arch!r}")
    mod = _ARCH_MODULES[arch]
    sizes = mod.layer_sizes(n_classes) if hidden is None else mod.layer_sizes(n_classes, hidden)
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, (fan_in, fan_out) in sizes.items():
        params[f"{name}.w"] = glorot_uniform(rng, fan_in, fan_out)
        params[f"{name}.b"] = np.zeros(fan_out)
    model = ModelParams(arch, n_classes, params, k=k if arch == ARCH_DGCNN else 0)
    return quantize_params(model)


# --- functional surface ----------------------------------------------------

def forward_logits(model: ModelParams, cloud) -> np.ndarray:
    """Raw class scores for one cloud; order-invariant in the points."""
    return model.logits(cloud)


def predict_probs(model: ModelParams, cloud) -> np.ndarray:
    """Softmax class probabilities for one cloud."""
    return model.probs(cloud)


def cross_entropy_loss(logits: np.ndarray, label: int) -> float:
    """Negative log softmax probability of ``label``, log-sum-exp stabilized."""
    logits = np.asarray(logits, dtype=np.float64)
    if not (0 <= label < logits.shape[0]):
        raise InvalidInput(f"label {label} out of range for {logits.shape[0]} logits")
    return cross_entropy(logits, label)


def input_gradient(model: ModelParams, cloud, label: int) -> np.ndarray:
    """Exact gradient of the cross-entropy loss w.r.t. every input coordinate."""
    return model.input_gradient(cloud, label)


def predicted_class(model, cloud) -> int:
    """Argmax class; ties resolve to the lowest class index."""
    return int(np.argmax(model.logits(cloud)))
