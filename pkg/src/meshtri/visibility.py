"""Per-vertex visibility: brute-force reference and a BVH-accelerated twin.

A vertex is visible from a camera iff the segment from the camera center to
the vertex hits no mesh triangle strictly before the vertex (ray parameter
below 1 - 1e-6), ignoring triangles incident to the vertex itself. The BVH
path tests exactly the same per-triangle arithmetic as the brute-force path
(shared kernel), so the two agree bit-for-bit; only the set of candidate
triangles is pruned, which cannot change an any-hit answer.
"""

from __future__ import annotations

import numpy as np

from .camera import CameraCalib
from .errors import InvariantViolation
from .meshops import TriMesh, VisibilityMap

RAY_T_MAX = 1.0 - 1e-6
_DEGENERATE_SEGMENT = 1e-12
_LEAF_SIZE = 8
_BOX_PAD = 1e-9


def _segment_hits(origin: np.ndarray, direction: np.ndarray, a, b, c, exclude: np.ndarray) -> bool:
    """Any-hit Moller-Trumbore for one segment against a triangle batch.

    a, b, c: (F, 3) triangle corners; exclude: (F,) bool, triangles to skip.
    Hit counts when 0 < t < RAY_T_MAX with barycentrics inside the triangle.
    """
    e1 = b - a
    e2 = c - a
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    valid = np.abs(det) > 1e-300
    inv = np.where(valid, det, 1.0)
    svec = origin - a
    u = np.einsum("ij,ij->i", svec, pvec) / inv
    qvec = np.cross(svec, e1)
    v = np.einsum("ij,j->i", qvec, direction) / inv
    t = np.einsum("ij,ij->i", e2, qvec) / inv
    hit = (
        valid
        & ~exclude
        & (u >= 0.0)
        & (v >= 0.0)
        & (u + v <= 1.0)
        & (t > 0.0)
        & (t < RAY_T_MAX)
    )
    return bool(hit.any())


def _incidence(mesh: TriMesh) -> list[np.ndarray]:
    """For each vertex, the face-index array of incident triangles."""
    f = mesh.faces
    owners = [[] for _ in range(mesh.num_vertices)]
    for fi in range(f.shape[0]):
        owners[f[fi, 0]].append(fi)
        owners[f[fi, 1]].append(fi)
        owners[f[fi, 2]].append(fi)
    return [np.asarray(o, dtype=np.int64) for o in owners]


def visibility_bruteforce(mesh: TriMesh, calib: CameraCalib) -> VisibilityMap:
    """Reference visibility: every vertex tested against every triangle."""
    if mesh.num_vertices == 0:
        raise InvariantViolation("mesh has no vertices")
    origin = calib.center
    verts = mesh.vertices
    f = mesh.faces
    a, b, c = verts[f[:, 0]], verts[f[:, 1]], verts[f[:, 2]]
    n_faces = f.shape[0]
    incident = _incidence(mesh)

    out = np.zeros(mesh.num_vertices, dtype=bool)
    for vi in range(mesh.num_vertices):
        direction = verts[vi] - origin
        if float(direction @ direction) < _DEGENERATE_SEGMENT**2:
            continue  # vertex at the camera center: defined invisible
        exclude = np.zeros(n_faces, dtype=bool)
        exclude[incident[vi]] = True
        out[vi] = not _segment_hits(origin, direction, a, b, c, exclude)
    return VisibilityMap(values=out)


class TriangleBVH:
    """Median-split BVH over triangle bounding boxes (read-only, shareable)."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        f = mesh.faces
        v = mesh.vertices
        self.corners = (v[f[:, 0]], v[f[:, 1]], v[f[:, 2]])
        tri_min = np.minimum(np.minimum(self.corners[0], self.corners[1]), self.corners[2])
        tri_max = np.maximum(np.maximum(self.corners[0], self.corners[1]), self.corners[2])
        pad = _BOX_PAD * max(1.0, float(np.max(tri_max) - np.min(tri_min))) if f.size else 0.0
        self._tri_min = tri_min - pad
        self._tri_max = tri_max + pad
        centroids = (tri_min + tri_max) / 2.0

        # flat node arrays: box, children (-1 for leaf), triangle id span
        self.box_min: list[np.ndarray] = []
        self.box_max: list[np.ndarray] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.start: list[int] = []
        self.count: list[int] = []
        self.order = np.arange(f.shape[0], dtype=np.int64)

        if f.shape[0]:
            self._build(0, f.shape[0], centroids)

    def _new_node(self, ids: np.ndarray) -> int:
        idx = len(self.box_min)
        self.box_min.append(self._tri_min[ids].min(axis=0))
        self.box_max.append(self._tri_max[ids].max(axis=0))
        self.left.append(-1)
        self.right.append(-1)
        self.start.append(0)
        self.count.append(0)
        return idx

    def _build(self, lo: int, hi: int, centroids: np.ndarray) -> int:
        ids = self.order[lo:hi]
        node = self._new_node(ids)
        if hi - lo <= _LEAF_SIZE:
            self.start[node] = lo
            self.count[node] = hi - lo
            return node
        spread = centroids[ids].max(axis=0) - centroids[ids].min(axis=0)
        axis = int(np.argmax(spread))
        keys = centroids[ids, axis]
        perm = np.argsort(keys, kind="stable")
        self.order[lo:hi] = ids[perm]
        mid = lo + (hi - lo) // 2
        left = self._build(lo, mid, centroids)
        right = self._build(mid, hi, centroids)
        self.left[node] = left
        self.right[node] = right
        return node

    def _segment_overlaps(self, node: int, origin: np.ndarray, direction: np.ndarray) -> bool:
        t0, t1 = 0.0, 1.0
        bmin, bmax = self.box_min[node], self.box_max[node]
        for ax in range(3):
            d = direction[ax]
            o = origin[ax]
            if abs(d) < 1e-300:
                if o < bmin[ax] or o > bmax[ax]:
                    return False
                continue
            inv = 1.0 / d
            ta = (bmin[ax] - o) * inv
            tb = (bmax[ax] - o) * inv
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
        return True

    def segment_occluded(self, origin: np.ndarray, target: np.ndarray, exclude_faces: np.ndarray) -> bool:
        """True iff some non-excluded triangle blocks origin -> target."""
        direction = target - origin
        a, b, c = self.corners
        stack = [0] if self.box_min else []
        excl = set(int(i) for i in exclude_faces)
        while stack:
            node = stack.pop()
            if not self._segment_overlaps(node, origin, direction):
                continue
            if self.left[node] < 0:
                ids = self.order[self.start[node] : self.start[node] + self.count[node]]
                mask = np.fromiter((int(i) in excl for i in ids), dtype=bool, count=ids.size)
                if _segment_hits(origin, direction, a[ids], b[ids], c[ids], mask):
                    return True
            else:
                stack.append(self.right[node])
                stack.append(self.left[node])
        return False


def visibility(mesh: TriMesh, calib: CameraCalib) -> VisibilityMap:
    """BVH-accelerated visibility; output identical to the brute-force path."""
    if mesh.num_vertices == 0:
        raise InvariantViolation("mesh has no vertices")
    origin = calib.center
    bvh = TriangleBVH(mesh)
    incident = _incidence(mesh)
    out = np.zeros(mesh.num_vertices, dtype=bool)
    for vi in range(mesh.num_vertices):
        direction = mesh.vertices[vi] - origin
        if float(direction @ direction) < _DEGENERATE_SEGMENT**2:
            continue
        out[vi] = not bvh.segment_occluded(origin, mesh.vertices[vi], incident[vi])
    return VisibilityMap(values=out)
