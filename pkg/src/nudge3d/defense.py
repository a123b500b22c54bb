"""Random-noise baseline attack and the blind point-removal defense.

The noise baseline moves a random subset of points by Gaussian offsets
rescaled so the flattened L2 norm matches a given target, which makes it a
fair per-sample comparison for the nudge attacks. The defense centers the
cloud and drops the k points furthest from the origin before predicting;
it is blind (applied at inference only, never inside attack optimization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .pointcloud import PointCloud, as_points, normalize_unit_sphere, perturbation_norms
from .results import AttackResult, untargeted_success


@dataclass(frozen=True)
class RemovalConfig:
    remove_k: int

    def __post_init__(self):
        if self.remove_k < 0:
            raise InvalidInput("remove_k must be >= 0")


def random_noise_attack(model, x, budget: int, target_l2: float, seed: int) -> AttackResult:
    """Scaled Gaussian noise on ``budget`` random points, L2-matched exactly."""
    pts = as_points(x)
    p = pts.shape[0]
    if not (1 <= budget <= p):
        raise InvalidInput(f"budget must be in [1, P], got {budget} with P={p}")
    if target_l2 < 0:
        raise InvalidInput("target_l2 must be >= 0")
    rng = np.random.default_rng(seed)
    idx = rng.choice(p, size=budget, replace=False)
    adv = pts.copy()
    if target_l2 > 0:
        noise = rng.normal(size=(budget, 3))
        norm = np.linalg.norm(noise)
        while norm == 0.0:  # probability-zero redraw guard
            noise = rng.normal(size=(budget, 3))
            norm = np.linalg.norm(noise)
        adv[idx] = pts[idx] + noise * (target_l2 / norm)
    pred_before = int(np.argmax(model.logits(pts)))
    pred_after = int(np.argmax(model.logits(adv)))
    norms = perturbation_norms(pts, adv)
    label = x.label if isinstance(x, PointCloud) else None
    return AttackResult(pred_before=pred_before, pred_after=pred_after, true_label=label,
                        success=untargeted_success(pred_before, pred_after),
                        l2=norms.l2, linf=norms.linf, edited=norms.edited, adversarial=adv)


def point_removal_defense(x, remove_k: int) -> PointCloud:
    """Center/rescale, then drop the remove_k points furthest from the origin.

    Radius ties drop the lower index first; survivors keep their input order.
    """
    cloud = x if isinstance(x, PointCloud) else PointCloud(as_points(x))
    p = cloud.n_points
    if not (0 <= remove_k < p):
        raise InvalidInput(f"remove_k must be in [0, P), got {remove_k} with P={p}")
    normalized = normalize_unit_sphere(cloud)
    if remove_k == 0:
        return normalized
    radii = np.linalg.norm(normalized.points, axis=1)
    order = np.lexsort((np.arange(p), -radii))
    drop = np.zeros(p, dtype=bool)
    drop[order[:remove_k]] = True
    return normalized.with_points(normalized.points[~drop].copy())


def defended_predict(model, x, remove_k: int) -> np.ndarray:
    """Class probabilities after the point-removal defense."""
    return model.probs(point_removal_defense(x, remove_k).points)
