"""Nudge attacks on 3D point-cloud classifiers.

Point-budget-limited adversarial perturbations: a white-box gradient
variant, a grey-box differential-evolution variant, a matched-noise
baseline, a blind point-removal defense, and the evaluation harness that
ties them together.
"""

from .attack_de import Candidate, DEConfig, apply_candidate, evolve_step, fitness_of, nudge_de
from .attack_grad import (
    GradAttackConfig,
    SelectionMask,
    locate_vulnerable_points,
    masked_sign_descent,
    nudge_grad,
)
from .defense import RemovalConfig, defended_predict, point_removal_defense, random_noise_attack
from .errors import InvalidInput, ModelError, NudgeError, NumericError, OFFParseError
from .offmesh import TriangleMesh, parse_off, sample_mesh_surface, serialize_off
from .pointcloud import (
    Dataset,
    PointCloud,
    knn_indices,
    normalize_unit_sphere,
    perturbation_norms,
    sample_fixed_size,
    synth_dataset,
    synth_shape,
)
from .results import AttackResult, SummaryReport

__version__ = "0.1.0"
