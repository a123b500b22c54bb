"""Binary cloud container (magic ``NPC1``) and dataset directory layout.

NPC1, little-endian: magic ``NPC1``, u32 point count, u32 has_label,
i32 label, then P x 3 float32 coordinates row-major. A dataset directory
holds ``train/`` and ``test/`` subdirectories of one-cloud-per-file NPC1
files plus a ``manifest.json``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .pointcloud import Dataset, PointCloud

_NPC_MAGIC = b"NPC1"
_HEADER = struct.Struct("<4sIIi")

MANIFEST_NAME = "manifest.json"


def cloud_to_bytes(cloud: PointCloud) -> bytes:
    has_label = cloud.label is not None
    header = _HEADER.pack(_NPC_MAGIC, cloud.n_points, int(has_label),
                          cloud.label if has_label else 0)
    return header + cloud.points.astype("<f4").tobytes(order="C")


def cloud_from_bytes(data: bytes) -> PointCloud:
    if len(data) < _HEADER.size:
        raise InvalidInput("truncated NPC1 data")
    magic, n, has_label, label = _HEADER.unpack_from(data)
    if magic != _NPC_MAGIC:
        raise InvalidInput(f"bad magic {magic!r}, expected {_NPC_MAGIC!r}")
    expected = _HEADER.size + 12 * n
    if len(data) != expected:
        raise InvalidInput(f"NPC1 payload is {len(data)} bytes, expected {expected}")
    pts = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, 3)
    return PointCloud(pts.astype(np.float64), label if has_label else None)


def save_cloud(path: str | Path, cloud: PointCloud) -> None:
    Path(path).write_bytes(cloud_to_bytes(cloud))


def load_cloud(path: str | Path) -> PointCloud:
    return cloud_from_bytes(Path(path).read_bytes())


def write_json(path: str | Path, payload: dict) -> None:
    """Canonical JSON writer: sorted keys, fixed layout, trailing newline."""
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def save_dataset(root: str | Path, train: Dataset, test: Dataset,
                 manifest_extra: dict | None = None) -> None:
    root = Path(root)
    counts = {}
    for ds in (train, test):
        split_dir = root / ds.split
        split_dir.mkdir(parents=True, exist_ok=True)
        per_class: dict[int, int] = {}
        for cloud in ds.clouds:
            i = per_class.get(cloud.label, 0)
            per_class[cloud.label] = i + 1
            name = f"{ds.class_names[cloud.label]}_{i:04d}.npc"
            save_cloud(split_dir / name, cloud)
        counts[ds.split] = {ds.class_names[c]: k for c, k in sorted(per_class.items())}
    manifest = {
        "format": "NPC1",
        "class_names": list(train.class_names),
        "points_per_cloud": train.clouds[0].n_points if train.clouds else 0,
        "counts": counts,
    }
    manifest.update(manifest_extra or {})
    write_json(root / MANIFEST_NAME, manifest)


def load_manifest(root: str | Path) -> dict:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} under {root}")
    return json.loads(path.read_text())


def load_split(root: str | Path, split: str) -> Dataset:
    """Load one split; file order is sorted by name, so it is stable."""
    manifest = load_manifest(root)
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise FileNotFoundError(f"no {split!r} split under {root}")
    clouds = [load_cloud(p) for p in sorted(split_dir.glob("*.npc"))]
    if not clouds:
        raise InvalidInput(f"split {split!r} under {root} holds no .npc files")
    return Dataset(clouds, manifest["class_names"], split=split)
