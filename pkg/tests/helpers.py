"""Shared test doubles and oracles."""

from __future__ import annotations

import numpy as np

from nudge3d.models.common import softmax


class LinearModel:
    """Flat linear classifier over all coordinates; exact gradients by hand.

    Not permutation-invariant and tied to a fixed P; handy as a transparent
    white/grey-box stand-in where brute-force enumeration stays tractable.
    """

    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = np.asarray(w, dtype=np.float64)  # (P*3, C)
        self.b = np.asarray(b, dtype=np.float64)
        self.n_classes = self.b.shape[0]

    def logits(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64).ravel() @ self.w + self.b

    def probs(self, pts) -> np.ndarray:
        return softmax(self.logits(pts))

    def input_gradient(self, pts, label: int) -> np.ndarray:
        d = softmax(self.logits(pts))
        d[label] -= 1.0
        return (self.w @ d).reshape(-1, 3)


class ZeroModel:
    """All-zero logits and gradients for any input."""

    def __init__(self, n_classes: int = 3):
        self.n_classes = n_classes

    def logits(self, pts) -> np.ndarray:
        return np.zeros(self.n_classes)

    def probs(self, pts) -> np.ndarray:
        return np.full(self.n_classes, 1.0 / self.n_classes)

    def input_gradient(self, pts, label: int) -> np.ndarray:
        return np.zeros_like(np.asarray(pts, dtype=np.float64))


class StubGradModel:
    """Fixed gradient field; logits follow a caller-supplied function."""

    def __init__(self, grad, logits_fn=None, n_classes: int = 2):
        self.grad = np.asarray(grad, dtype=np.float64)
        self.logits_fn = logits_fn or (lambda pts: np.zeros(n_classes))
        self.n_classes = n_classes

    def logits(self, pts) -> np.ndarray:
        return self.logits_fn(np.asarray(pts, dtype=np.float64))

    def input_gradient(self, pts, label: int) -> np.ndarray:
        return self.grad.copy()


def fd_input_gradient(model, pts: np.ndarray, label: int, h: float) -> np.ndarray:
    """Central-difference gradient of the model's loss w.r.t. each coordinate."""
    pts = np.asarray(pts, dtype=np.float64)
    g = np.zeros_like(pts)
    for i in range(pts.shape[0]):
        for j in range(3):
            up = pts.copy()
            up[i, j] += h
            dn = pts.copy()
            dn[i, j] -= h
            lu, _, _ = model.loss_and_grads(up, label)
            ld, _, _ = model.loss_and_grads(dn, label)
            g[i, j] = (lu - ld) / (2.0 * h)
    return g


def max_rel_err(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Max abs deviation scaled by the reference's largest magnitude (floored)."""
    denom = max(np.abs(reference).max(), 1e-6)
    return float(np.abs(analytic - reference).max() / denom)


def brute_force_knn(pts: np.ndarray, k: int) -> np.ndarray:
    """All-pairs sort oracle: squared distances, ties by lower index."""
    pts = np.asarray(pts, dtype=np.float64)
    p = len(pts)
    rows = []
    for i in range(p):
        cand = [(((pts[i] - pts[j]) ** 2).sum(), j) for j in range(p) if j != i]
        cand.sort()
        rows.append([j for _, j in cand[:k]])
    return np.asarray(rows)
