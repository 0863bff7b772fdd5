"""Differentiable volumetric pipeline over the voxel cuboid.

Unprojection lifts per-view 2D features to the grid by projecting every voxel
center and bilinearly sampling the feature map. Multi-view volumes fuse by an
elementwise softmax over views (confidence weights summing to 1). Per-vertex
score volumes normalize to a distribution per channel and decode to
coordinates by expectation over voxel centers (soft-argmax).

Both softmaxes subtract the per-element maximum before exponentiation, and
reductions use numpy's fixed-order pairwise summation, so results do not
depend on how work is partitioned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraCalib, FeatureMap, VoxelGrid, _as_readonly, bilinear_sample, project_points
from .errors import (
    EmptyViewList,
    GateOutOfRange,
    IndexOutOfRange,
    InvalidSigma,
    NotNormalized,
    ShapeMismatch,
)

DEFAULT_FEATURE_CHANNELS = 32
NORMALIZED_TOL = 1e-6


@dataclass(frozen=True)
class VolumeFeature:
    """L x L x L x K feature volume over a voxel grid."""

    values: np.ndarray
    grid: VoxelGrid
    bad_depth_voxels: int = 0  # diagnostic: voxels dropped for nonpositive depth

    def __post_init__(self):
        v = _as_readonly(self.values)
        l = self.grid.resolution
        if v.ndim != 4 or v.shape[:3] != (l, l, l):
            raise ShapeMismatch(f"volume shape {v.shape} does not match grid L={l}")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[3]


@dataclass(frozen=True)
class Heatmap3D:
    """L x L x L x N per-vertex score volume; `normalized` marks a distribution."""

    values: np.ndarray
    grid: VoxelGrid
    normalized: bool = field(default=False, compare=False)

    def __post_init__(self):
        v = _as_readonly(self.values)
        l = self.grid.resolution
        if v.ndim != 4 or v.shape[:3] != (l, l, l):
            raise ShapeMismatch(f"heatmap shape {v.shape} does not match grid L={l}")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[3]


def unproject(fmap: FeatureMap, grid: VoxelGrid, calib: CameraCalib) -> VolumeFeature:
    """Sample a feature map at every voxel-center projection.

    Voxels that project outside the image get zero features; voxels behind
    the camera also get zeros and are counted in `bad_depth_voxels`. Total
    function by design so multi-view pipelines survive odd camera poses.
    """
    l = grid.resolution
    pix, valid = project_points(calib, grid.coords.reshape(-1, 3))
    sampled = bilinear_sample(fmap, pix)
    sampled[~valid] = 0.0
    return VolumeFeature(
        values=sampled.reshape(l, l, l, fmap.channels),
        grid=grid,
        bad_depth_voxels=int(np.count_nonzero(~valid)),
    )


def _check_same_shape(volumes: list[VolumeFeature]):
    if not volumes:
        raise EmptyViewList("need at least one view")
    shape = volumes[0].values.shape
    grid = volumes[0].grid
    for v in volumes[1:]:
        if v.values.shape != shape:
            raise ShapeMismatch(f"volume shapes differ: {v.values.shape} vs {shape}")
        if v.grid is not grid and not np.array_equal(v.grid.coords, grid.coords):
            raise ShapeMismatch("volumes live on different grids")


def aggregate_softmax(volumes: list[VolumeFeature]) -> tuple[VolumeFeature, list[np.ndarray]]:
    """Confidence-weighted fusion of C volumes.

    Per (voxel, channel): d_c = exp(x_c) / sum_c' exp(x_c'), output is
    sum_c d_c * x_c. Returns the fused volume and the C weight arrays.
    """
    _check_same_shape(volumes)
    stack = np.stack([v.values for v in volumes], axis=0)
    m = stack.max(axis=0, keepdims=True)
    e = np.exp(stack - m)
    denom = e.sum(axis=0, keepdims=True)
    weights = e / denom
    agg = (weights * stack).sum(axis=0)
    return (
        VolumeFeature(values=agg, grid=volumes[0].grid),
        [weights[c] for c in range(len(volumes))],
    )


def aggregate_visibility_gated(
    volumes: list[VolumeFeature], gates: list[np.ndarray]
) -> tuple[VolumeFeature, list[np.ndarray]]:
    """Softmax fusion with per-view, per-voxel gates in [0, 1].

    Weights become gate_c * exp(x_c) / sum gate * exp; where every gate is
    zero the plain softmax weights are used instead, so fusion never divides
    by zero. Gates have shape L x L x L and broadcast over channels.
    """
    _check_same_shape(volumes)
    if len(gates) != len(volumes):
        raise ShapeMismatch(f"{len(gates)} gates for {len(volumes)} views")
    l = volumes[0].grid.resolution
    gs = []
    for g in gates:
        g = np.asarray(g, dtype=float)
        if g.shape != (l, l, l):
            raise ShapeMismatch(f"gate shape {g.shape} != ({l},{l},{l})")
        if g.min() < 0.0 or g.max() > 1.0:
            raise GateOutOfRange(f"gate values in [{g.min()}, {g.max()}]")
        gs.append(g[..., None])
    gate = np.stack(gs, axis=0)  # C,L,L,L,1
    stack = np.stack([v.values for v in volumes], axis=0)
    m = stack.max(axis=0, keepdims=True)
    e = np.exp(stack - m)
    gated = gate * e
    denom = gated.sum(axis=0, keepdims=True)
    plain = e / e.sum(axis=0, keepdims=True)
    dead = denom <= 0.0
    weights = np.where(dead, plain, gated / np.where(dead, 1.0, denom))
    agg = (weights * stack).sum(axis=0)
    return (
        VolumeFeature(values=agg, grid=volumes[0].grid),
        [weights[c] for c in range(len(volumes))],
    )


def heatmap_normalize(h: Heatmap3D) -> Heatmap3D:
    """Per-channel softmax over all voxels; channels sum to 1."""
    v = h.values
    l3 = v.shape[0] * v.shape[1] * v.shape[2]
    flat = v.reshape(l3, v.shape[3])
    m = flat.max(axis=0, keepdims=True)
    e = np.exp(flat - m)
    e /= e.sum(axis=0, keepdims=True)
    return Heatmap3D(values=e.reshape(v.shape), grid=h.grid, normalized=True)


def soft_argmax(hnorm: Heatmap3D) -> np.ndarray:
    """Expectation of voxel-center coordinates per channel: N x 3.

    Requires normalized channels (sum 1 within 1e-6); the output lies in the
    convex hull of the grid coordinates.
    """
    v = hnorm.values
    l3 = v.shape[0] * v.shape[1] * v.shape[2]
    flat = v.reshape(l3, v.shape[3])
    sums = flat.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > NORMALIZED_TOL:
        raise NotNormalized(f"channel sums deviate up to {np.max(np.abs(sums - 1.0)):.2e}")
    coords = hnorm.grid.coords.reshape(l3, 3)
    # fixed-order reduction: independent of BLAS threading/partitioning
    return np.einsum("ln,lc->nc", flat, coords)


def soft_argmax_from_logits(h: Heatmap3D) -> np.ndarray:
    """normalize + soft_argmax in one call, for raw score volumes."""
    return soft_argmax(heatmap_normalize(h))


def soft_argmax_logits_vjp(h: Heatmap3D, upstream: np.ndarray) -> np.ndarray:
    """Gradient of soft_argmax(heatmap_normalize(h)) w.r.t. the raw scores.

    upstream: N x 3 cotangent on the output coordinates. Uses the closed form
    d M_n / d h_n(ijk) = p_n(ijk) * (r_ijk - M_n), with p the normalized map.
    """
    upstream = np.asarray(upstream, dtype=float)
    v = h.values
    n = v.shape[3]
    if upstream.shape != (n, 3):
        raise ShapeMismatch(f"upstream {upstream.shape} != ({n}, 3)")
    l3 = v.shape[0] * v.shape[1] * v.shape[2]
    hn = heatmap_normalize(h)
    p = hn.values.reshape(l3, n)
    coords = h.grid.coords.reshape(l3, 3)
    m = p.T @ coords  # N x 3
    proj = coords @ upstream.T - (m * upstream).sum(axis=1)[None, :]  # l3 x N
    return (p * proj).reshape(v.shape)


def vertex_l1_loss(m: np.ndarray, m_star: np.ndarray) -> float:
    """Mean over vertices of the L1 distance between coordinate rows."""
    m = np.asarray(m, dtype=float)
    m_star = np.asarray(m_star, dtype=float)
    if m.shape != m_star.shape:
        raise ShapeMismatch(f"{m.shape} vs {m_star.shape}")
    return float(np.abs(m - m_star).sum() / m.shape[0])


def vertex_l1_loss_grad(m: np.ndarray, m_star: np.ndarray) -> np.ndarray:
    """Gradient of the L1 loss in m; the subgradient at 0 is taken as 0."""
    m = np.asarray(m, dtype=float)
    m_star = np.asarray(m_star, dtype=float)
    if m.shape != m_star.shape:
        raise ShapeMismatch(f"{m.shape} vs {m_star.shape}")
    return np.sign(m - m_star) / m.shape[0]


def render_gaussian_heatmaps(verts: np.ndarray, grid: VoxelGrid, sigma: float) -> Heatmap3D:
    """Log-Gaussian score volumes: channel n holds -||r - vert_n||^2 / (2 sigma^2).

    Normalizing these scores yields a discretized isotropic Gaussian, so the
    soft-argmax of the rendered map recovers the input vertex (up to grid
    truncation).
    """
    if not (sigma > 0):
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    verts = np.asarray(verts, dtype=float).reshape(-1, 3)
    l = grid.resolution
    coords = grid.coords.reshape(-1, 3)
    # ||r - v||^2 = ||r||^2 - 2 r.v + ||v||^2, kept in float64 throughout
    r2 = np.einsum("ij,ij->i", coords, coords)
    v2 = np.einsum("ij,ij->i", verts, verts)
    cross = coords @ verts.T
    d2 = r2[:, None] - 2.0 * cross + v2[None, :]
    scores = -d2 / (2.0 * sigma * sigma)
    return Heatmap3D(values=scores.reshape(l, l, l, verts.shape[0]), grid=grid)


def confidence_profile(weights: list[np.ndarray], voxel_index) -> np.ndarray:
    """Mean confidence per view at one voxel, averaged over channels.

    The returned C values sum to 1: they are the channel-mean of weights that
    sum to 1 per channel.
    """
    if not weights:
        raise EmptyViewList("no weight volumes")
    i, j, k = (int(x) for x in voxel_index)
    shape = weights[0].shape
    if not (0 <= i < shape[0] and 0 <= j < shape[1] and 0 <= k < shape[2]):
        raise IndexOutOfRange(f"voxel {voxel_index} outside {shape[:3]}")
    return np.array([float(w[i, j, k].mean()) for w in weights])


def heatmap_memory_bytes(resolution: int, channels: int) -> int:
    """Bytes of one float32 heatmap volume: L^3 * N * 4."""
    return resolution**3 * channels * 4


def format_memory_report(resolution: int, channels: int) -> str:
    mb = heatmap_memory_bytes(resolution, channels) / 1e6
    return f"{resolution}^3 x {channels} heatmap: {mb:.1f} MB"
