"""Per-sample attack outcomes and aggregated summaries.

Untargeted success means the prediction changed relative to the clean
prediction; targeted success means the prediction equals the target class.
Adversarial accuracy is always measured against the true label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AttackResult:
    """Outcome of one attack on one cloud."""

    pred_before: int
    pred_after: int
    true_label: int | None
    success: bool
    l2: float
    linf: float
    edited: int
    queries: int | None = None  # decision-based attacks only
    sample_id: int = -1
    seconds: float = 0.0
    error: str | None = None
    adversarial: np.ndarray | None = field(default=None, repr=False)

    def record(self) -> dict:
        """Deterministic JSON-ready view (drops arrays and wall time)."""
        return {
            "sample_id": self.sample_id,
            "true_label": self.true_label,
            "pred_before": self.pred_before,
            "pred_after": self.pred_after,
            "success": self.success,
            "l2": self.l2,
            "linf": self.linf,
            "edited": self.edited,
            "queries": self.queries,
            "error": self.error,
        }


@dataclass
class SummaryReport:
    """Aggregate view over one batch of attack results."""

    attack: str
    config: dict
    n_samples: int
    n_failed: int
    adv_accuracy: float
    success_rate: float
    mean_l2: float
    max_l2: float
    mean_linf: float
    max_linf: float
    mean_edited: float

    def record(self) -> dict:
        return {
            "attack": self.attack,
            "config": self.config,
            "n_samples": self.n_samples,
            "n_failed": self.n_failed,
            "adv_accuracy": self.adv_accuracy,
            "success_rate": self.success_rate,
            "mean_l2": self.mean_l2,
            "max_l2": self.max_l2,
            "mean_linf": self.mean_linf,
            "max_linf": self.max_linf,
            "mean_edited": self.mean_edited,
        }


def untargeted_success(pred_before: int, pred_after: int) -> bool:
    return pred_after != pred_before


def targeted_success(pred_after: int, target_class: int) -> bool:
    return pred_after == target_class
