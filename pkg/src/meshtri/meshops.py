"""Triangle meshes, quadric edge-collapse subsampling, and the gather operator.

Decimation is collapse-to-endpoint: a collapse never moves a vertex, so the
surviving vertices are a subset of the source and the coarsening operator is
a pure row gather (index-stable across poses, constant Jacobian). Collapses
are ordered by accumulated plane-quadric error with ties broken by vertex
index, making the result deterministic for a given mesh.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .camera import _as_readonly
from .errors import DimensionMismatch, InvariantViolation, ParseError, TargetTooSmall

# Table-driven sub-vertex presets (counts used throughout the experiments).
VERTEX_PRESETS = (431, 216, 108, 54)


@dataclass(frozen=True)
class TriMesh:
    """Vertices (V x 3, meters) and triangular faces (F x 3 indices)."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = _as_readonly(self.vertices)
        f = _as_readonly(self.faces, dtype=np.int32)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvariantViolation(f"vertices must be V x 3, got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise InvariantViolation(f"faces must be F x 3, got {f.shape}")
        if f.size:
            if f.min() < 0 or f.max() >= v.shape[0]:
                raise InvariantViolation("face indices out of range")
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise InvariantViolation("degenerate face with repeated vertex index")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]


@dataclass(frozen=True)
class SubsamplingOperator:
    """Row gather selecting N of the source mesh's V vertices."""

    kept_indices: np.ndarray
    source_v: int

    def __post_init__(self):
        k = _as_readonly(self.kept_indices, dtype=np.int64)
        if k.ndim != 1:
            raise InvariantViolation("kept_indices must be 1-D")
        if k.size and (np.any(np.diff(k) <= 0) or k[0] < 0 or k[-1] >= self.source_v):
            raise InvariantViolation("kept_indices must be strictly increasing and in range")
        object.__setattr__(self, "kept_indices", k)
        object.__setattr__(self, "source_v", int(self.source_v))

    @property
    def n(self) -> int:
        return int(self.kept_indices.size)

    def to_dict(self) -> dict:
        return {"source_V": self.source_v, "kept_indices": [int(i) for i in self.kept_indices]}

    @classmethod
    def from_dict(cls, d: dict) -> "SubsamplingOperator":
        try:
            return cls(kept_indices=np.asarray(d["kept_indices"], dtype=np.int64), source_v=int(d["source_V"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad subsampling operator record: {e}") from e

    @classmethod
    def identity(cls, source_v: int) -> "SubsamplingOperator":
        return cls(kept_indices=np.arange(source_v, dtype=np.int64), source_v=source_v)


@dataclass(frozen=True)
class VisibilityMap:
    """Boolean per-vertex visibility."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise InvariantViolation("visibility values must be 1-D")
        v = v.astype(bool)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)


def apply_subsample(op: SubsamplingOperator, verts) -> np.ndarray:
    """Gather rows at kept_indices; linear in verts."""
    verts = np.asarray(verts, dtype=float)
    if verts.shape[0] != op.source_v:
        raise DimensionMismatch(f"verts has {verts.shape[0]} rows, operator wants {op.source_v}")
    return verts[op.kept_indices]


def subsample_visibility(full: VisibilityMap, op: SubsamplingOperator) -> VisibilityMap:
    """Visibility of the kept vertices."""
    if len(full) != op.source_v:
        raise DimensionMismatch(f"visibility length {len(full)} != source_V {op.source_v}")
    return VisibilityMap(values=full.values[op.kept_indices])


def compose_operators(first: SubsamplingOperator, second: SubsamplingOperator) -> SubsamplingOperator:
    """Single operator equal to applying `first`, then `second`."""
    if second.source_v != first.n:
        raise DimensionMismatch(
            f"second operator expects {second.source_v} rows, first yields {first.n}"
        )
    return SubsamplingOperator(
        kept_indices=first.kept_indices[second.kept_indices], source_v=first.source_v
    )


def _face_quadric(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm < 1e-18:
        return np.zeros((4, 4))
    n = n / norm
    plane = np.array([n[0], n[1], n[2], -float(n @ a)])
    return np.outer(plane, plane)


def _vertex_cost(q: np.ndarray, p: np.ndarray) -> float:
    h = np.array([p[0], p[1], p[2], 1.0])
    return float(h @ q @ h)


def decimate(mesh: TriMesh, target_n: int) -> tuple[TriMesh, SubsamplingOperator]:
    """Collapse edges by quadric error until target_n vertices remain."""
    out_mesh, op, _ = decimate_trace(mesh, target_n)
    return out_mesh, op


def decimate_trace(
    mesh: TriMesh, target_n: int
) -> tuple[TriMesh, SubsamplingOperator, list[float]]:
    """Like :func:`decimate` but also returns the performed collapse costs."""
    v_count = mesh.num_vertices
    if target_n < 4:
        raise TargetTooSmall(f"cannot decimate below 4 vertices (asked {target_n})")
    if target_n > v_count:
        raise DimensionMismatch(f"target {target_n} exceeds vertex count {v_count}")

    verts = mesh.vertices
    face_list = [tuple(int(i) for i in f) for f in mesh.faces]
    face_alive = [True] * len(face_list)
    faces_of: list[set[int]] = [set() for _ in range(v_count)]
    for fi, (a, b, c) in enumerate(face_list):
        faces_of[a].add(fi)
        faces_of[b].add(fi)
        faces_of[c].add(fi)

    quadrics = np.zeros((v_count, 4, 4))
    for a, b, c in face_list:
        q = _face_quadric(verts[a], verts[b], verts[c])
        quadrics[a] += q
        quadrics[b] += q
        quadrics[c] += q

    alive = np.ones(v_count, dtype=bool)
    alive_count = v_count
    version = [0] * v_count
    heap: list[tuple[float, int, int, int, int]] = []

    def push_edge(u: int, w: int):
        # entry keeps the cheaper endpoint; ties keep the smaller index
        if u > w:
            u, w = w, u
        q = quadrics[u] + quadrics[w]
        cost_u = _vertex_cost(q, verts[u])
        cost_w = _vertex_cost(q, verts[w])
        if cost_u <= cost_w:
            kept, gone, cost = u, w, cost_u
        else:
            kept, gone, cost = w, u, cost_w
        heapq.heappush(heap, (cost, kept, gone, version[kept], version[gone]))

    seen = set()
    for a, b, c in face_list:
        for u, w in ((a, b), (b, c), (a, c)):
            key = (u, w) if u < w else (w, u)
            if key not in seen:
                seen.add(key)
                push_edge(u, w)
    del seen

    performed: list[float] = []
    face_key = {}
    for fi, f in enumerate(face_list):
        face_key[frozenset(f)] = fi

    while alive_count > target_n:
        if not heap:
            raise TargetTooSmall(
                f"no valid collapse left at {alive_count} vertices (target {target_n})"
            )
        cost, kept, gone, vk, vg = heapq.heappop(heap)
        if not (alive[kept] and alive[gone]):
            continue
        if version[kept] != vk or version[gone] != vg:
            continue
        dying = faces_of[kept] & faces_of[gone]
        if not dying:
            continue

        # guard 1: no vertex may lose its last face
        ok = True
        affected: dict[int, int] = {}
        for fi in dying:
            for vv in face_list[fi]:
                if vv != gone:
                    affected[vv] = affected.get(vv, 0) + 1
        for vv, lost in affected.items():
            if len(faces_of[vv]) - lost < 1:
                ok = False
                break
        if not ok:
            continue

        # guard 2: rewriting gone->kept must not duplicate an existing face
        rewrite = faces_of[gone] - dying
        for fi in rewrite:
            new_face = frozenset(kept if vv == gone else vv for vv in face_list[fi])
            other = face_key.get(new_face)
            if other is not None and other != fi and face_alive[other]:
                ok = False
                break
        if not ok:
            continue

        performed.append(cost)
        for fi in dying:
            face_alive[fi] = False
            face_key.pop(frozenset(face_list[fi]), None)
            for vv in face_list[fi]:
                faces_of[vv].discard(fi)
        for fi in rewrite:
            face_key.pop(frozenset(face_list[fi]), None)
            face_list[fi] = tuple(kept if vv == gone else vv for vv in face_list[fi])
            face_key[frozenset(face_list[fi])] = fi
            faces_of[kept].add(fi)
        faces_of[gone].clear()
        alive[gone] = False
        alive_count -= 1
        quadrics[kept] = quadrics[kept] + quadrics[gone]
        version[kept] += 1
        version[gone] += 1

        neighbors = set()
        for fi in faces_of[kept]:
            for vv in face_list[fi]:
                if vv != kept:
                    neighbors.add(vv)
        for w in sorted(neighbors):
            push_edge(kept, w)

    kept_indices = np.flatnonzero(alive)
    remap = -np.ones(v_count, dtype=np.int64)
    remap[kept_indices] = np.arange(kept_indices.size)
    new_faces = [
        tuple(int(remap[vv]) for vv in face_list[fi])
        for fi in range(len(face_list))
        if face_alive[fi]
    ]
    out = TriMesh(vertices=verts[kept_indices], faces=np.asarray(new_faces, dtype=np.int32).reshape(-1, 3))
    op = SubsamplingOperator(kept_indices=kept_indices.astype(np.int64), source_v=v_count)
    return out, op, performed
