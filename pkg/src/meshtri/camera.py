"""Calibrated pinhole cameras, the voxel cuboid, and bilinear sampling.

Conventions (these matter; downstream feature unprojection depends on them):

* World -> camera: ``x_cam = R @ x_world + t``, OpenCV axes (x right, y down,
  z forward). A point is projectable only if its camera-frame z is positive.
* Pixel (x, y) has its center at real coordinates (x, y), origin at the
  image's top-left. Projection returns (x, y) = (column, row).
* Voxel centers, not corners, define the cuboid sample locations:
  ``coord = center - side/2 + (index + 0.5) * side / resolution`` per axis.
* Bilinear samples outside [0, W-1] x [0, H-1] return zeros (border-zero).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidDimension, InvalidRotation, NonPositiveDepth, ParseError

DEPTH_EPS = 1e-9
DEFAULT_CUBOID_SIDE = 2.0
DEFAULT_CUBOID_RESOLUTION = 64
SUPPORTED_RESOLUTIONS = (16, 32, 64)


def _as_readonly(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CameraCalib:
    """Intrinsics + extrinsics of one calibrated pinhole camera."""

    intrinsics: np.ndarray  # 3x3, upper triangular, [2,2] == 1
    rotation: np.ndarray  # 3x3 world->camera, orthonormal, det +1
    translation: np.ndarray  # 3, meters
    image_size: tuple[int, int]  # (height, width) pixels

    def __post_init__(self):
        k = _as_readonly(self.intrinsics)
        r = _as_readonly(self.rotation)
        t = _as_readonly(self.translation)
        if k.shape != (3, 3) or r.shape != (3, 3) or t.shape != (3,):
            raise InvalidDimension(
                f"calib shapes K{k.shape} R{r.shape} t{t.shape}, want (3,3),(3,3),(3,)"
            )
        if abs(k[2, 2] - 1.0) > 1e-12 or abs(k[1, 0]) > 1e-12 or abs(k[2, 0]) > 1e-12 or abs(k[2, 1]) > 1e-12:
            raise InvalidRotation("intrinsics must be upper-triangular with K[2,2] == 1")
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidRotation("rotation must be orthonormal with det +1")
        h, w = self.image_size
        if h <= 0 or w <= 0:
            raise InvalidDimension(f"image_size {self.image_size} must be positive")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "image_size", (int(h), int(w)))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation

    @property
    def projection_matrix(self) -> np.ndarray:
        """3x4 matrix K [R | t]."""
        return self.intrinsics @ np.hstack([self.rotation, self.translation[:, None]])

    def to_dict(self) -> dict:
        return {
            "intrinsics": [float(v) for v in self.intrinsics.ravel()],
            "rotation": [float(v) for v in self.rotation.ravel()],
            "translation": [float(v) for v in self.translation],
            "image_size": [int(self.image_size[0]), int(self.image_size[1])],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraCalib":
        try:
            k = np.asarray(d["intrinsics"], dtype=float).reshape(3, 3)
            r = np.asarray(d["rotation"], dtype=float).reshape(3, 3)
            t = np.asarray(d["translation"], dtype=float).reshape(3)
            h, w = d["image_size"]
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad camera record: {e}") from e
        return cls(intrinsics=k, rotation=r, translation=t, image_size=(int(h), int(w)))


def load_calib(path: str | Path) -> list[CameraCalib]:
    """Read one camera (JSON object) or a rig (JSON array) from a file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
    records = data if isinstance(data, list) else [data]
    return [CameraCalib.from_dict(r) for r in records]


def save_calib(cams: CameraCalib | list[CameraCalib], path: str | Path) -> None:
    from .serial import dump_json

    if isinstance(cams, CameraCalib):
        dump_json(cams.to_dict(), path)
    else:
        dump_json([c.to_dict() for c in cams], path)


@dataclass(frozen=True)
class VoxelGrid:
    """Axis-aligned cuboid of voxel centers in world space."""

    center: np.ndarray  # 3, meters
    side: float  # meters
    resolution: int  # voxels per axis
    coords: np.ndarray = field(repr=False, default=None)  # L,L,L,3 voxel centers

    def __post_init__(self):
        object.__setattr__(self, "center", _as_readonly(self.center))
        if self.coords is not None:
            object.__setattr__(self, "coords", _as_readonly(self.coords))

    @property
    def pitch(self) -> float:
        """Edge length of one voxel."""
        return self.side / self.resolution

    def voxel_index_of(self, point) -> tuple[int, int, int]:
        """Index of the voxel containing a world point (clamped to the grid)."""
        p = np.asarray(point, dtype=float)
        rel = (p - self.center + self.side / 2.0) / self.pitch
        idx = np.clip(np.floor(rel).astype(int), 0, self.resolution - 1)
        return (int(idx[0]), int(idx[1]), int(idx[2]))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        half = self.side / 2.0
        return self.center - half, self.center + half

    def to_dict(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "side": float(self.side),
            "resolution": int(self.resolution),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelGrid":
        try:
            return make_cuboid(d["center"], d["side"], d["resolution"])
        except (KeyError, TypeError) as e:
            raise ParseError(f"bad grid record: {e}") from e


def make_cuboid(
    center,
    side: float = DEFAULT_CUBOID_SIDE,
    resolution: int = DEFAULT_CUBOID_RESOLUTION,
) -> VoxelGrid:
    """Build the voxel grid for a cuboid of the given side length.

    Voxel centers: ``center - side/2 + (i + 0.5) * side / L`` per axis, so all
    of them lie strictly inside the cuboid.
    """
    center = np.asarray(center, dtype=float).reshape(3)
    if not (side > 0):
        raise InvalidDimension(f"cuboid side must be positive, got {side}")
    if int(resolution) != resolution or resolution < 2:
        raise InvalidDimension(f"resolution must be an integer >= 2, got {resolution}")
    resolution = int(resolution)
    axes = [
        center[a] - side / 2.0 + (np.arange(resolution) + 0.5) * (side / resolution)
        for a in range(3)
    ]
    gi, gj, gk = np.meshgrid(axes[0], axes[1], axes[2], indexing="ij")
    coords = np.stack([gi, gj, gk], axis=-1)
    return VoxelGrid(center=center, side=float(side), resolution=resolution, coords=coords)


def rotate_grid_yaw(grid: VoxelGrid, angle: float) -> VoxelGrid:
    """Rotate the grid's sample coordinates about the vertical (z) axis.

    The rotation pivots on the grid center. Intended for data augmentation;
    the returned grid keeps center/side/resolution and carries rotated coords,
    so its coords no longer satisfy the axis-aligned closed form.
    """
    c, s = np.cos(angle), np.sin(angle)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    rel = grid.coords.reshape(-1, 3) - grid.center
    rotated = rel @ rz.T + grid.center
    return VoxelGrid(
        center=grid.center,
        side=grid.side,
        resolution=grid.resolution,
        coords=rotated.reshape(grid.coords.shape),
    )


@dataclass(frozen=True)
class FeatureMap:
    """Dense H x W x K feature image; all values finite."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_readonly(self.values)
        if v.ndim != 3:
            raise InvalidDimension(f"feature map must be H x W x K, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidDimension("feature map contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def project_point(calib: CameraCalib, p) -> np.ndarray:
    """Perspective-project one world point to pixel coordinates.

    Raises NonPositiveDepth if the camera-frame depth is <= 1e-9.
    """
    p = np.asarray(p, dtype=float).reshape(3)
    cam = calib.rotation @ p + calib.translation
    if cam[2] <= DEPTH_EPS:
        raise NonPositiveDepth(f"camera-frame depth {cam[2]:.3e} <= {DEPTH_EPS}")
    uvw = calib.intrinsics @ cam
    return uvw[:2] / uvw[2]


def project_points(calib: CameraCalib, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of an (M, 3) array.

    Returns (pixels, valid) where pixels is (M, 2) and valid marks points with
    positive depth; invalid rows hold zeros. No exception is raised here so
    bulk callers can apply their own policy.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    cam = pts @ calib.rotation.T + calib.translation
    z = cam[:, 2]
    valid = z > DEPTH_EPS
    safe_z = np.where(valid, z, 1.0)
    uv = cam[:, :2] / safe_z[:, None]
    k = calib.intrinsics
    px = np.empty((pts.shape[0], 2))
    px[:, 0] = k[0, 0] * uv[:, 0] + k[0, 1] * uv[:, 1] + k[0, 2]
    px[:, 1] = k[1, 1] * uv[:, 1] + k[1, 2]
    px[~valid] = 0.0
    return px, valid


def project_grid(calib: CameraCalib, grid: VoxelGrid) -> np.ndarray:
    """Project every voxel center; returns an L x L x L x 2 pixel array.

    Raises NonPositiveDepth naming the first offending voxel index if any
    center has nonpositive camera-frame depth.
    """
    pix, valid = project_points(calib, grid.coords.reshape(-1, 3))
    if not np.all(valid):
        bad = int(np.argmin(valid))
        l = grid.resolution
        idx = np.unravel_index(bad, (l, l, l))
        raise NonPositiveDepth(f"voxel {tuple(int(i) for i in idx)} has nonpositive depth")
    return pix.reshape(grid.resolution, grid.resolution, grid.resolution, 2)


def bilinear_sample(fmap: FeatureMap, coords: np.ndarray) -> np.ndarray:
    """Sample an M x 2 array of (x, y) pixel coordinates from a feature map.

    Standard bilinear interpolation over the four surrounding pixel centers;
    anything outside the closed box [0, W-1] x [0, H-1] yields a zero vector.
    Total function: never raises.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    h, w, k = fmap.values.shape
    x, y = coords[:, 0], coords[:, 1]
    inside = (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)

    xc = np.clip(x, 0.0, w - 1.0)
    yc = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(xc).astype(int)
    y0 = np.floor(yc).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xc - x0)[:, None]
    fy = (yc - y0)[:, None]

    v = fmap.values
    out = (
        v[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + v[y0, x1] * fx * (1.0 - fy)
        + v[y1, x0] * (1.0 - fx) * fy
        + v[y1, x1] * fx * fy
    )
    out[~inside] = 0.0
    return out


def scale_calib(calib: CameraCalib, new_size: tuple[int, int]) -> CameraCalib:
    """Rescale intrinsics so projections land in a resized image plane.

    Used when a feature map has a different resolution than the source image:
    project with the scaled calib to get feature-map pixel coordinates.
    """
    h0, w0 = calib.image_size
    h1, w1 = new_size
    sx, sy = w1 / w0, h1 / h0
    k = calib.intrinsics.copy()
    k[0, :] *= sx
    k[1, :] *= sy
    return CameraCalib(
        intrinsics=k,
        rotation=calib.rotation,
        translation=calib.translation,
        image_size=(int(h1), int(w1)),
    )
