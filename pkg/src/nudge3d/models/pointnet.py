"""Mini point-wise-MLP classifier.

Shared per-point MLP 3 -> h1 -> h2 -> h3 with ReLU, a global max-pool over
points, then a dense head h3 -> h4 -> C. No spatial transformer and no batch
norm, so inference is exactly permutation-invariant and gradients are exact.
Max-pool ties are routed entirely to the lowest point index.
"""

from __future__ import annotations

import numpy as np

from .common import cross_entropy, cross_entropy_dlogits, relu

DEFAULT_HIDDEN = (64, 64, 128, 64)


def layer_sizes(n_classes: int, hidden=DEFAULT_HIDDEN) -> dict[str, tuple[int, int]]:
    h1, h2, h3, h4 = hidden
    return {
        "mlp1": (3, h1),
        "mlp2": (h1, h2),
        "mlp3": (h2, h3),
        "head1": (h3, h4),
        "head2": (h4, n_classes),
    }


def forward(params: dict[str, np.ndarray], pts: np.ndarray) -> np.ndarray:
    a = pts
    for name in ("mlp1", "mlp2", "mlp3"):
        a = relu(a @ params[f"{name}.w"] + params[f"{name}.b"])
    pooled = a.max(axis=0)
    ah = relu(pooled @ params["head1.w"] + params["head1.b"])
    return ah @ params["head2.w"] + params["head2.b"]


def loss_and_grads(params: dict[str, np.ndarray], pts: np.ndarray, label: int):
    """Cross-entropy loss, exact input gradient and parameter gradients."""
    z1 = pts @ params["mlp1.w"] + params["mlp1.b"]
    a1 = relu(z1)
    z2 = a1 @ params["mlp2.w"] + params["mlp2.b"]
    a2 = relu(z2)
    z3 = a2 @ params["mlp3.w"] + params["mlp3.b"]
    a3 = relu(z3)
    cols = np.arange(a3.shape[1])
    rows = np.argmax(a3, axis=0)  # first max wins ties
    pooled = a3[rows, cols]
    zh = pooled @ params["head1.w"] + params["head1.b"]
    ah = relu(zh)
    logits = ah @ params["head2.w"] + params["head2.b"]

    loss = cross_entropy(logits, label)
    d = cross_entropy_dlogits(logits, label)

    grads = {"head2.w": np.outer(ah, d), "head2.b": d}
    dah = params["head2.w"] @ d
    dzh = dah * (zh > 0)
    grads["head1.w"] = np.outer(pooled, dzh)
    grads["head1.b"] = dzh
    dpooled = params["head1.w"] @ dzh

    da3 = np.zeros_like(a3)
    da3[rows, cols] = dpooled
    dz3 = da3 * (z3 > 0)
    grads["mlp3.w"] = a2.T @ dz3
    grads["mlp3.b"] = dz3.sum(axis=0)
    da2 = dz3 @ params["mlp3.w"].T
    dz2 = da2 * (z2 > 0)
    grads["mlp2.w"] = a1.T @ dz2
    grads["mlp2.b"] = dz2.sum(axis=0)
    da1 = dz2 @ params["mlp2.w"].T
    dz1 = da1 * (z1 > 0)
    grads["mlp1.w"] = pts.T @ dz1
    grads["mlp1.b"] = dz1.sum(axis=0)
    dx = dz1 @ params["mlp1.w"].T
    return loss, dx, grads
