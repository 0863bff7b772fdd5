"""Wavefront OBJ import/export, vertices and triangular faces only.

Coordinates print with 9 significant digits, which round-trips meter-scale
meshes to < 1e-8 m. Faces must be triangles; quads raise ParseError.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError
from .meshops import TriMesh


def export_obj(mesh: TriMesh, path: str | Path) -> None:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def import_obj(path: str | Path) -> TriMesh:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as e:
                raise ParseError(f"{path}:{lineno}: {e}") from e
        elif tag == "f":
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: only triangular faces are supported")
            idx = []
            for p in parts[1:]:
                token = p.split("/")[0]
                try:
                    i = int(token)
                except ValueError as e:
                    raise ParseError(f"{path}:{lineno}: bad face index {p!r}") from e
                if i < 0:
                    i = len(verts) + 1 + i  # negative OBJ indices count from the end
                if not (1 <= i <= len(verts)):
                    raise ParseError(f"{path}:{lineno}: face index {i} out of range")
                idx.append(i - 1)
            faces.append(idx)
        # other tags (vn, vt, o, g, s, usemtl, ...) are ignored
    if not verts:
        raise ParseError(f"{path}: no vertices found")
    return TriMesh(
        vertices=np.asarray(verts, dtype=float),
        faces=np.asarray(faces, dtype=np.int32).reshape(-1, 3),
    )
