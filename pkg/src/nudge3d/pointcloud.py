"""Point-cloud containers, normalization, sampling, kNN and perturbation metrics.

Coordinates are kept as float64 in memory; the on-disk container (see
:mod:`nudge3d.storage`) stores float32. All randomized operations take an
explicit seed and are bit-deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInput

SYNTH_CLASS_NAMES = ("sphere", "cube", "cylinder", "cone", "torus")


def as_points(obj) -> np.ndarray:
    """Return the (P, 3) float64 coordinate array behind a cloud-like object."""
    pts = obj.points if isinstance(obj, PointCloud) else np.asarray(obj, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInput(f"expected a (P, 3) array, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """An ordered, fixed-size set of 3D points with an optional class label."""

    points: np.ndarray
    label: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise InvalidInput(f"points must be a non-empty (P, 3) array, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise InvalidInput("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray) -> "PointCloud":
        return PointCloud(points, self.label)


@dataclass
class Dataset:
    """A list of equally sized clouds plus class names and a split tag."""

    clouds: list[PointCloud]
    class_names: Sequence[str]
    split: str = "train"

    def __post_init__(self):
        c = len(self.class_names)
        sizes = {cl.n_points for cl in self.clouds}
        if len(sizes) > 1:
            raise InvalidInput(f"clouds have inconsistent sizes: {sorted(sizes)}")
        for cl in self.clouds:
            if cl.label is not None and not (0 <= cl.label < c):
                raise InvalidInput(f"label {cl.label} out of range for {c} classes")

    def __len__(self) -> int:
        return len(self.clouds)

    def __iter__(self):
        return iter(self.clouds)


class PerturbationNorms(NamedTuple):
    l2: float
    linf: float
    edited: int


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center the cloud at the origin and scale the furthest point to radius 1.

    A fully degenerate cloud (all points coincide) maps to all zeros. Point
    order is preserved.
    """
    pts = cloud.points
    centered = pts - pts.mean(axis=0)
    radius = np.linalg.norm(centered, axis=1).max()
    # a radius at rounding-noise scale means the points coincide
    if radius <= 1e-12 * max(1.0, float(np.abs(pts).max())):
        return cloud.with_points(np.zeros_like(pts))
    return cloud.with_points(centered / radius)


def sample_fixed_size(cloud: PointCloud, n: int, seed: int) -> PointCloud:
    """Resample a cloud to exactly ``n`` points.

    If the cloud has at least ``n`` points, a uniform subset is drawn without
    replacement; otherwise every original point is kept and the remainder is
    drawn with replacement.
    """
    if n < 1:
        raise InvalidInput("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = cloud.n_points
    if p >= n:
        idx = rng.choice(p, size=n, replace=False)
    else:
        extra = rng.integers(0, p, size=n - p)
        idx = np.concatenate([np.arange(p), extra])
    return cloud.with_points(cloud.points[idx].copy())


def knn_rows(features: np.ndarray, k: int) -> np.ndarray:
    """Row indices of the k nearest rows (Euclidean) for each row of a matrix.

    Excludes the row itself; exact distance ties go to the lower index.
    """
    m = np.asarray(features, dtype=np.float64)
    p = m.shape[0]
    if not (1 <= k <= p - 1):
        raise InvalidInput(f"k must be in [1, P-1], got k={k}, P={p}")
    if m.shape[1] <= 4:
        # direct differences keep exact ties exactly tied (coordinate space)
        d2 = np.zeros((p, p))
        for c in range(m.shape[1]):
            diff = m[:, c, None] - m[None, :, c]
            d2 += diff * diff
    else:
        # Gram form is much cheaper for wide feature matrices
        sq = np.einsum("ij,ij->i", m, m)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (m @ m.T)
    np.fill_diagonal(d2, np.inf)
    if k + 8 >= p:
        # stable sort keeps index order among equal distances
        return np.argsort(d2, axis=1, kind="stable")[:, :k]
    part = np.argpartition(d2, k - 1, axis=1)[:, :k]
    pd = np.take_along_axis(d2, part, axis=1)
    result = np.take_along_axis(part, np.lexsort((part, pd)), axis=1)
    # a distance tie across the selection boundary makes argpartition's pick
    # arbitrary; redo those rows with a full stable sort
    ambiguous = (d2 <= pd.max(axis=1)[:, None]).sum(axis=1) != k
    if ambiguous.any():
        rows = np.nonzero(ambiguous)[0]
        result[rows] = np.argsort(d2[rows], axis=1, kind="stable")[:, :k]
    return result


def knn_indices(cloud: PointCloud | np.ndarray, k: int) -> np.ndarray:
    """Per-point k-nearest-neighbor indices for a cloud (self excluded)."""
    return knn_rows(as_points(cloud), k)


def perturbation_norms(original: PointCloud | np.ndarray,
                       adversarial: PointCloud | np.ndarray) -> PerturbationNorms:
    """L2 / L-infinity norms of a perturbation plus the count of moved points."""
    a = as_points(original)
    b = as_points(adversarial)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch: {a.shape} vs {b.shape}")
    delta = b - a
    l2 = float(np.linalg.norm(delta.ravel()))
    linf = float(np.abs(delta).max())
    edited = int(np.any(delta != 0.0, axis=1).sum())
    return PerturbationNorms(l2, linf, edited)


# --- synthetic shape primitives -------------------------------------------

def _sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if n < 2:
        return v
    # pin the sample centroid to the sphere center, so unit-sphere
    # normalization keeps every radius at 1
    for _ in range(80):
        c = v.mean(axis=0)
        if np.abs(c).max() < 1e-12:
            break
        centered = v - c
        norms = np.linalg.norm(centered, axis=1, keepdims=True)
        if norms.min() < 1e-9:
            break
        v = centered / norms
    return v


def _cube(rng: np.random.Generator, n: int) -> np.ndarray:
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    axis = face // 2
    other = np.array([[1, 2], [0, 2], [0, 1]])[axis]
    rows = np.arange(n)
    pts = np.empty((n, 3))
    pts[rows, axis] = np.where(face % 2 == 0, 1.0, -1.0)
    pts[rows, other[:, 0]] = uv[:, 0]
    pts[rows, other[:, 1]] = uv[:, 1]
    return pts


def _cylinder(rng: np.random.Generator, n: int) -> np.ndarray:
    # unit radius, height 2; side area 4*pi, each cap pi
    u = rng.uniform(size=n)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r_or_z = rng.uniform(size=n)
    pts = np.empty((n, 3))
    side = u < 2.0 / 3.0
    pts[side, 0] = np.cos(phi[side])
    pts[side, 1] = np.sin(phi[side])
    pts[side, 2] = r_or_z[side] * 2.0 - 1.0
    cap = ~side
    r = np.sqrt(r_or_z[cap])
    pts[cap, 0] = r * np.cos(phi[cap])
    pts[cap, 1] = r * np.sin(phi[cap])
    pts[cap, 2] = np.where(u[cap] < 5.0 / 6.0, 1.0, -1.0)
    return pts


def _cone(rng: np.random.Generator, n: int) -> np.ndarray:
    # apex (0,0,1), base disk of radius 1 at z=-1
    lateral_area = np.pi * np.sqrt(5.0)
    p_lateral = lateral_area / (lateral_area + np.pi)
    u = rng.uniform(size=n)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    t = np.sqrt(rng.uniform(size=n))  # radial density grows linearly from apex
    pts = np.empty((n, 3))
    lat = u < p_lateral
    pts[lat, 0] = t[lat] * np.cos(phi[lat])
    pts[lat, 1] = t[lat] * np.sin(phi[lat])
    pts[lat, 2] = 1.0 - 2.0 * t[lat]
    base = ~lat
    pts[base, 0] = t[base] * np.cos(phi[base])
    pts[base, 1] = t[base] * np.sin(phi[base])
    pts[base, 2] = -1.0
    return pts


def _torus(rng: np.random.Generator, n: int, major: float = 1.0, minor: float = 0.4) -> np.ndarray:
    # rejection on the tube angle keeps the surface density uniform
    theta = np.empty(0)
    while theta.size < n:
        cand = rng.uniform(0.0, 2.0 * np.pi, size=2 * (n - theta.size) + 8)
        accept = rng.uniform(size=cand.size) < (major + minor * np.cos(cand)) / (major + minor)
        theta = np.concatenate([theta, cand[accept]])
    theta = theta[:n]
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    ring = major + minor * np.cos(theta)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), minor * np.sin(theta)], axis=1)


_SURFACES = (_sphere, _cube, _cylinder, _cone, _torus)


def sample_primitive_surface(class_id: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw (un-normalized) uniform surface sample of one of the 5 primitives."""
    if not (0 <= class_id < len(_SURFACES)):
        raise InvalidInput(f"unknown class_id {class_id}; supported: 0..{len(_SURFACES) - 1}")
    if n < 1:
        raise InvalidInput("n must be >= 1")
    return _SURFACES[class_id](rng, n)


def synth_shape(class_id: int, n: int, seed: int, jitter: float = 0.0) -> PointCloud:
    """Labeled synthetic cloud: primitive surface + Gaussian noise, normalized."""
    if jitter < 0:
        raise InvalidInput("jitter must be >= 0")
    rng = np.random.default_rng(seed)
    pts = sample_primitive_surface(class_id, n, rng)
    if jitter > 0:
        pts = pts + rng.normal(0.0, jitter, size=pts.shape)
    return normalize_unit_sphere(PointCloud(pts, label=class_id))


def synth_dataset(per_class: int, n_points: int, seed: int, jitter: float = 0.0,
                  split: str = "train", n_classes: int = len(SYNTH_CLASS_NAMES)) -> Dataset:
    """Balanced dataset over the primitive classes, one sub-seed per cloud."""
    if not (1 <= n_classes <= len(SYNTH_CLASS_NAMES)):
        raise InvalidInput(f"n_classes must be in [1, {len(SYNTH_CLASS_NAMES)}]")
    root = np.random.SeedSequence([seed, {"train": 0, "test": 1}.get(split, 2)])
    children = root.spawn(n_classes * per_class)
    clouds = []
    for class_id in range(n_classes):
        for j in range(per_class):
            child = children[class_id * per_class + j]
            clouds.append(synth_shape(class_id, n_points,
                                      seed=child.generate_state(1)[0], jitter=jitter))
    return Dataset(clouds, SYNTH_CLASS_NAMES[:n_classes], split=split)
