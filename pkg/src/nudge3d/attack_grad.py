"""White-box gradient-based nudge attack.

Two phases sharing one iteration count. Phase 1 accumulates raw loss
gradients onto a scratch copy of the input and scores each point by how far
it drifted (row L2 of the displacement); the budget highest-scoring points
form the selection mask. Phase 2 restarts from the input and takes signed
steps of size epsilon on the masked points only.

Untargeted runs ascend the loss of the true label; targeted runs descend
the loss of the target class. The model can be any object exposing
``logits(points)`` and ``input_gradient(points, label)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInput, NumericError
from .pointcloud import as_points, perturbation_norms
from .results import AttackResult, targeted_success, untargeted_success

MODE_UNTARGETED = "untargeted"
MODE_TARGETED = "targeted"


@dataclass(frozen=True)
class GradAttackConfig:
    epsilon: float
    iterations: int
    budget: int
    mode: str = MODE_UNTARGETED
    target_class: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidInput("epsilon must be > 0")
        if self.iterations < 1:
            raise InvalidInput("iterations must be >= 1")
        if self.budget < 1:
            raise InvalidInput("budget must be >= 1")
        if self.mode not in (MODE_UNTARGETED, MODE_TARGETED):
            raise InvalidInput(f"unknown mode {self.mode!r}")
        if self.mode == MODE_TARGETED and self.target_class is None:
            raise InvalidInput("targeted mode requires target_class")


@dataclass(frozen=True)
class SelectionMask:
    """Boolean per-point mask plus the score threshold of the last point in."""

    mask: np.ndarray
    threshold: float


def _phase_sign(mode: str) -> float:
    return 1.0 if mode == MODE_UNTARGETED else -1.0


def locate_vulnerable_points(model, x, label: int, mode: str,
                             iterations: int, budget: int) -> SelectionMask:
    """Phase 1: rank points by gradient-accumulated displacement, keep top-budget.

    Score ties break toward the lower point index; the threshold is the score
    of the lowest-scoring selected point.
    """
    pts = as_points(x)
    p = pts.shape[0]
    if budget > p:
        raise InvalidInput(f"budget {budget} exceeds cloud size {p}")
    sign = _phase_sign(mode)
    drift = pts.copy()
    for i in range(iterations):
        grad = model.input_gradient(drift, label)
        if not np.isfinite(grad).all():
            raise NumericError(f"non-finite accumulated gradient at iteration {i}")
        drift = drift + sign * grad
    scores = np.linalg.norm(drift - pts, axis=1)
    order = np.lexsort((np.arange(p), -scores))
    chosen = order[:budget]
    mask = np.zeros(p, dtype=bool)
    mask[chosen] = True
    return SelectionMask(mask, float(scores[chosen[-1]]))


def masked_sign_descent(model, x, label: int, mode: str, mask: np.ndarray,
                        epsilon: float, iterations: int) -> np.ndarray:
    """Phase 2: iterated signed steps of size epsilon on masked points only.

    Unmasked rows come out bit-identical to the input. Each coordinate moves
    by a whole number of epsilon steps, so its total displacement never
    exceeds epsilon*iterations; a zero gradient leaves a coordinate in place
    that step.
    """
    pts = as_points(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (pts.shape[0],):
        raise InvalidInput(f"mask shape {mask.shape} does not match cloud size {pts.shape[0]}")
    sign = _phase_sign(mode)
    steps = np.zeros_like(pts)  # signed step counts, masked rows only
    for i in range(iterations):
        grad = model.input_gradient(pts + epsilon * steps, label)
        if not np.isfinite(grad).all():
            raise NumericError(f"non-finite gradient at iteration {i}")
        steps[mask] += sign * np.sign(grad[mask])
    adv = pts.copy()
    adv[mask] = pts[mask] + epsilon * steps[mask]
    # keep |adv - x| within the step budget at float precision
    bound = epsilon * iterations
    over = np.abs(adv - pts) > bound
    while np.any(over):
        adv[over] = np.nextafter(adv[over], pts[over])
        over = np.abs(adv - pts) > bound
    return adv


def nudge_grad(model, x, y: int, config: GradAttackConfig) -> AttackResult:
    """Full gradient-based nudge attack; returns the per-sample outcome."""
    pts = as_points(x)
    if config.mode == MODE_TARGETED and config.target_class == y:
        raise InvalidInput("target_class must differ from the true label")
    label = y if config.mode == MODE_UNTARGETED else config.target_class
    selection = locate_vulnerable_points(model, pts, label, config.mode,
                                         config.iterations, config.budget)
    adv = masked_sign_descent(model, pts, label, config.mode, selection.mask,
                              config.epsilon, config.iterations)
    pred_before = int(np.argmax(model.logits(pts)))
    pred_after = int(np.argmax(model.logits(adv)))
    if config.mode == MODE_UNTARGETED:
        success = untargeted_success(pred_before, pred_after)
    else:
        success = targeted_success(pred_after, config.target_class)
    norms = perturbation_norms(pts, adv)
    return AttackResult(pred_before=pred_before, pred_after=pred_after, true_label=y,
                        success=success, l2=norms.l2, linf=norms.linf,
                        edited=norms.edited, adversarial=adv)


def config_echo(config: GradAttackConfig) -> dict:
    return {"method": "grad", **asdict(config)}
