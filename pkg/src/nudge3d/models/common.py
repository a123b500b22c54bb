"""Shared numeric blocks: initialization, softmax family, ReLU masks."""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def cross_entropy(logits: np.ndarray, label: int) -> float:
    return float(-log_softmax(logits)[label])


def cross_entropy_dlogits(logits: np.ndarray, label: int) -> np.ndarray:
    d = softmax(logits)
    d[label] -= 1.0
    return d


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)
