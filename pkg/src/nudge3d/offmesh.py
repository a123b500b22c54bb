"""ASCII OFF mesh parsing, serialization and area-weighted surface sampling.

Only what the ModelNet distribution needs: triangles, with polygon faces
fan-triangulated. Comment lines starting with '#' and blank lines are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, OFFParseError
from .pointcloud import PointCloud


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray     # (F, 3) int64, indices into vertices

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64))


def _tokens(data: str):
    """Yield (line_number, token_list) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_off(data: bytes | str) -> TriangleMesh:
    """Parse ASCII OFF into a triangle mesh, fanning polygon faces."""
    if isinstance(data, bytes):
        data = data.decode("ascii", errors="replace")
    lines = _tokens(data)

    try:
        lineno, toks = next(lines)
    except StopIteration:
        raise OFFParseError("empty file, missing OFF header") from None
    # ModelNet has files with the counts glued onto the header line
    if toks[0] != "OFF" and not toks[0].startswith("OFF"):
        raise OFFParseError(f"expected OFF header, got {toks[0]!r}", line=lineno)
    if toks[0] == "OFF" and len(toks) == 1:
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise OFFParseError("missing counts line") from None
    else:
        toks = [toks[0][3:], *toks[1:]] if toks[0] != "OFF" else toks[1:]
    if len(toks) < 3:
        raise OFFParseError("counts line needs V F E", line=lineno)
    try:
        n_vert, n_face = int(toks[0]), int(toks[1])
    except ValueError:
        raise OFFParseError(f"non-numeric counts {toks[:3]}", line=lineno) from None

    vertices = np.empty((n_vert, 3))
    for i in range(n_vert):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise OFFParseError(f"expected {n_vert} vertices, file ended after {i}") from None
        if len(toks) < 3:
            raise OFFParseError(f"vertex needs 3 coordinates, got {len(toks)}", line=lineno)
        try:
            vertices[i] = [float(t) for t in toks[:3]]
        except ValueError:
            raise OFFParseError(f"non-numeric vertex coordinate in {toks[:3]}", line=lineno) from None

    faces: list[tuple[int, int, int]] = []
    for i in range(n_face):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise OFFParseError(f"expected {n_face} faces, file ended after {i}") from None
        try:
            count = int(toks[0])
            idx = [int(t) for t in toks[1:1 + count]]
        except ValueError:
            raise OFFParseError(f"non-numeric face token in {toks}", line=lineno) from None
        if count < 3 or len(idx) != count:
            raise OFFParseError(f"face declares {count} vertices but lists {len(toks) - 1}",
                                line=lineno)
        if any(j < 0 or j >= n_vert for j in idx):
            raise OFFParseError(f"face index out of range in {idx}", line=lineno)
        for a, b in zip(idx[1:-1], idx[2:]):
            faces.append((idx[0], a, b))

    return TriangleMesh(vertices, np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def serialize_off(mesh: TriangleMesh) -> str:
    """Write a mesh back to ASCII OFF (triangles only)."""
    out = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    out.extend(" ".join(repr(float(c)) for c in v) for v in mesh.vertices)
    out.extend("3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces)
    return "\n".join(out) + "\n"


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_mesh_surface(mesh: TriangleMesh, n: int, seed: int) -> PointCloud:
    """Uniform area-weighted surface sample of ``n`` points."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if len(mesh.faces) == 0:
        raise InvalidInput("mesh has no faces to sample")
    rng = np.random.default_rng(seed)
    areas = triangle_areas(mesh)
    total = areas.sum()
    if total <= 0:
        raise InvalidInput("mesh has zero total surface area")
    tri = rng.choice(len(mesh.faces), size=n, p=areas / total)
    # square-root trick gives a uniform barycentric sample
    r1 = np.sqrt(rng.uniform(size=(n, 1)))
    r2 = rng.uniform(size=(n, 1))
    a = mesh.vertices[mesh.faces[tri, 0]]
    b = mesh.vertices[mesh.faces[tri, 1]]
    c = mesh.vertices[mesh.faces[tri, 2]]
    pts = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c
    return PointCloud(pts)
