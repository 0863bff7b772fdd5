"""Deterministic synthetic multi-camera scenes with ground truth.

A scene holds a toy body in a seeded random pose/shape, a camera ring aimed
at its pelvis, and the voxel cuboid centered there. It stands in for both
datasets and the learned networks: rendered per-vertex score volumes play
the role of the regression head's output, and synthetic 2D feature maps
drive the unprojection/aggregation branch.

run_pipeline exercises the full non-learned chain on one scene: feature
unprojection and multi-view softmax fusion (with the per-view confidence
profile diagnostic), heatmap rendering, normalization and soft-argmax
decoding, body fitting on the decoded vertices, joint regression, and the
metric suite against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics as metrics_mod
from .body import BodyModel, FitParams, lbs_forward, make_toy_model, regress_joints
from .camera import CameraCalib, FeatureMap, VoxelGrid, make_cuboid, project_points, scale_calib
from .errors import InvalidConfig
from .fitting import FitConfig, FitResult, decoded_pose, fit
from .meshops import SubsamplingOperator, TriMesh, decimate
from .rotations import matrix_to_rot6d, rot6d_to_matrix, rotation_about_axis
from .volumetric import (
    Heatmap3D,
    aggregate_softmax,
    confidence_profile,
    heatmap_normalize,
    render_gaussian_heatmaps,
    soft_argmax,
    unproject,
    vertex_l1_loss,
)

DEFAULT_SIGMA_FACTOR = 1.5
_WORLD_UP = np.array([0.0, 0.0, 1.0])

_MODEL_CACHE: dict = {}
_SUBOP_CACHE: dict = {}


@dataclass(frozen=True)
class SceneConfig:
    views: int = 4
    sub_vertices: int = 108
    pose_magnitude: float = 0.35
    shape_magnitude: float = 1.0
    camera_radius: float = 4.0
    translation_magnitude: float = 0.3
    cuboid_side: float = 2.0
    grid_resolution: int = 64
    model_seed: int = 0
    vertex_budget: int = 600
    image_size: tuple = (512, 512)
    focal: float = 1000.0

    def __post_init__(self):
        if self.views < 1:
            raise InvalidConfig("need at least one view")
        if self.sub_vertices < 4:
            raise InvalidConfig("sub_vertices must be >= 4")
        if self.camera_radius <= self.cuboid_side:
            raise InvalidConfig("camera ring must sit outside the cuboid")


@dataclass(frozen=True)
class Scene:
    model: BodyModel
    subop: SubsamplingOperator
    gt_params: FitParams
    gt_mesh: np.ndarray
    gt_sub: np.ndarray
    gt_pose: np.ndarray  # flat axis-angle vector behind gt_params.z
    cameras: list
    grid: VoxelGrid
    seed: int
    config: SceneConfig

    @property
    def pelvis(self) -> np.ndarray:
        return regress_joints(self.model, self.gt_mesh)[0]


def shared_toy_assets(config: SceneConfig) -> tuple[BodyModel, SubsamplingOperator]:
    """Toy model + subsampling operator, cached across scenes."""
    mkey = (config.model_seed, config.vertex_budget)
    if mkey not in _MODEL_CACHE:
        _MODEL_CACHE[mkey] = make_toy_model(config.model_seed, config.vertex_budget)
    model = _MODEL_CACHE[mkey]
    skey = mkey + (config.sub_vertices,)
    if skey not in _SUBOP_CACHE:
        mesh = TriMesh(vertices=model.template, faces=model.faces)
        _, op = decimate(mesh, config.sub_vertices)
        _SUBOP_CACHE[skey] = op
    return model, _SUBOP_CACHE[skey]


def _look_at(position: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World->camera rotation: z toward the target, y down (OpenCV axes)."""
    z = target - position
    z = z / np.linalg.norm(z)
    x = np.cross(z, _WORLD_UP)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=0)


def _sample_pose(model: BodyModel, rng: np.random.Generator, magnitude: float) -> np.ndarray:
    pose = rng.uniform(-1.0, 1.0, size=model.pose_dim) * magnitude
    pose3 = pose.reshape(-1, 3)
    # extremities wiggle less so the body stays well inside the cuboid
    for j in (10, 11, 22, 23):
        pose3[j - 1] *= 0.3
    # hinge joints bend their natural way
    for joint, axis, sign in model.hinge_dofs:
        pose3[joint - 1, axis] = -sign * abs(pose3[joint - 1, axis])
    return pose3.reshape(-1)


def gen_scene(seed: int, config: SceneConfig = SceneConfig()) -> Scene:
    """Seeded scene: body parameters, cameras on a ring, pelvis-centered grid."""
    model, subop = shared_toy_assets(config)
    rng = np.random.default_rng(seed)

    pose = _sample_pose(model, rng, config.pose_magnitude)
    beta = rng.uniform(-1.0, 1.0, size=model.num_shape_dims) * config.shape_magnitude
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    tilt = rng.uniform(-0.15, 0.15, size=2)
    rot = (
        rotation_about_axis(_WORLD_UP, yaw)
        @ rotation_about_axis([1.0, 0.0, 0.0], tilt[0])
        @ rotation_about_axis([0.0, 1.0, 0.0], tilt[1])
    )
    t = rng.uniform(-1.0, 1.0, size=3) * config.translation_magnitude
    t[2] *= 0.3

    params = FitParams(z=pose, r6=matrix_to_rot6d(rot), beta=beta, t=t)
    gt_mesh = lbs_forward(model, pose, rot, beta, t)
    gt_sub = gt_mesh[subop.kept_indices]
    pelvis = regress_joints(model, gt_mesh)[0]
    grid = make_cuboid(pelvis, config.cuboid_side, config.grid_resolution)

    cameras = []
    h, w = config.image_size
    for c in range(config.views):
        azim = 2.0 * np.pi * c / config.views + rng.uniform(-0.15, 0.15)
        radius = config.camera_radius * (1.0 + rng.uniform(-0.05, 0.05))
        height = rng.uniform(-0.2, 0.9)
        position = pelvis + np.array(
            [radius * np.cos(azim), radius * np.sin(azim), height]
        )
        rotation = _look_at(position, pelvis)
        translation = -rotation @ position
        focal = config.focal * (1.0 + rng.uniform(-0.05, 0.05))
        intrinsics = np.array(
            [[focal, 0.0, w / 2.0], [0.0, focal, h / 2.0], [0.0, 0.0, 1.0]]
        )
        calib = CameraCalib(
            intrinsics=intrinsics, rotation=rotation, translation=translation, image_size=(h, w)
        )
        depth = (calib.rotation @ grid.center + calib.translation)[2]
        if depth <= 0:
            raise InvalidConfig(f"camera {c} does not see the cuboid center")
        cameras.append(calib)

    return Scene(
        model=model,
        subop=subop,
        gt_params=params,
        gt_mesh=gt_mesh,
        gt_sub=gt_sub,
        gt_pose=pose,
        cameras=cameras,
        grid=grid,
        seed=seed,
        config=config,
    )


def render_scene_heatmaps(
    scene: Scene,
    resolution: int | None = None,
    sigma: float | None = None,
    logit_noise: float = 0.0,
) -> Heatmap3D:
    """Per-sub-vertex score volumes on the scene grid.

    sigma defaults to 1.5 voxel pitches (sub-voxel recovery wants support
    spanning a few voxels). logit_noise > 0 adds seeded Gaussian noise to the
    scores, for robustness experiments.
    """
    grid = scene.grid
    if resolution is not None and resolution != grid.resolution:
        grid = make_cuboid(grid.center, grid.side, resolution)
    if sigma is None:
        sigma = DEFAULT_SIGMA_FACTOR * grid.pitch
    hm = render_gaussian_heatmaps(scene.gt_sub, grid, sigma)
    if logit_noise > 0.0:
        rng = np.random.default_rng(scene.seed + 101)
        noisy = hm.values + rng.normal(0.0, logit_noise, size=hm.values.shape)
        hm = Heatmap3D(values=noisy, grid=grid)
    return hm


def synth_feature_maps(
    scene: Scene,
    feature_size: tuple = (96, 96),
    channels: int = 8,
    dropout: float = 0.0,
) -> tuple[list, list]:
    """Synthetic per-view 2D features: Gaussian splats at sub-vertex projections.

    Returns (feature maps, feature-resolution calibs). dropout > 0 zeroes
    whole views with that seeded probability (robustness hook).
    """
    rng = np.random.default_rng(scene.seed + 202)
    h, w = feature_size
    ys, xs = np.mgrid[0:h, 0:w]
    fmaps, calibs = [], []
    channel_gain = rng.uniform(0.5, 1.5, size=channels)
    for calib in scene.cameras:
        fcal = scale_calib(calib, feature_size)
        pix, valid = project_points(fcal, scene.gt_sub)
        values = np.zeros((h, w, channels))
        sigma_px = 2.0
        for p, ok in zip(pix, valid):
            if not ok:
                continue
            d2 = (xs - p[0]) ** 2 + (ys - p[1]) ** 2
            blob = np.exp(-d2 / (2.0 * sigma_px**2))
            values += blob[:, :, None] * channel_gain[None, None, :]
        if dropout > 0.0 and rng.uniform() < dropout:
            values[:] = 0.0
        fmaps.append(FeatureMap(values=values))
        calibs.append(fcal)
    return fmaps, calibs


@dataclass(frozen=True)
class PipelineConfig:
    heatmap_resolution: int = 64
    sigma_factor: float = DEFAULT_SIGMA_FACTOR
    feature_channels: int = 8
    feature_size: tuple = (96, 96)
    fit: FitConfig = field(default_factory=FitConfig)
    heatmap_logit_noise: float = 0.0
    feature_dropout: float = 0.0


@dataclass(frozen=True)
class PipelineOutput:
    report: metrics_mod.MetricReport
    fit_result: FitResult
    decoded_vertices: np.ndarray  # soft-argmax output fed to the fit
    decoded_l1_m: float  # mean L1 distance decoded vs gt sub-vertices (meters)
    confidence_profile: np.ndarray  # per-view mean weight at the pelvis voxel
    bad_depth_voxels: int

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "decoded_l1_m": self.decoded_l1_m,
            "confidence_profile": [float(x) for x in self.confidence_profile],
            "bad_depth_voxels": self.bad_depth_voxels,
            "fit": {
                "params": self.fit_result.params.to_dict(),
                "term_breakdown": self.fit_result.term_breakdown.to_dict(),
                "final_cost": self.fit_result.term_breakdown.e_fit,
            },
        }


def run_pipeline(scene: Scene, cfg: PipelineConfig = PipelineConfig()) -> PipelineOutput:
    """Render -> aggregate -> decode -> fit -> evaluate on one scene."""
    grid = scene.grid
    if grid.resolution != cfg.heatmap_resolution:
        grid = make_cuboid(grid.center, grid.side, cfg.heatmap_resolution)

    # multi-view unprojection/fusion branch (diagnostic: the fused volume
    # would feed the learned decoder, which synthetic scoring stands in for)
    fmaps, fcalibs = synth_feature_maps(
        scene, cfg.feature_size, cfg.feature_channels, cfg.feature_dropout
    )
    volumes = [unproject(fm, grid, fc) for fm, fc in zip(fmaps, fcalibs)]
    _, weights = aggregate_softmax(volumes)
    pelvis_voxel = grid.voxel_index_of(scene.pelvis)
    profile = confidence_profile(weights, pelvis_voxel)
    bad_depth = int(sum(v.bad_depth_voxels for v in volumes))

    sigma = cfg.sigma_factor * grid.pitch
    hm = render_scene_heatmaps(scene, cfg.heatmap_resolution, sigma, cfg.heatmap_logit_noise)
    decoded = soft_argmax(heatmap_normalize(hm))
    decoded_l1 = vertex_l1_loss(decoded, scene.gt_sub)

    result = fit(scene.model, decoded, scene.subop, cfg.fit, init="neutral")

    gt_joints = regress_joints(scene.model, scene.gt_mesh)
    pred_rots = metrics_mod.joint_rotation_set(
        decoded_pose(result.params, scene.model, cfg.fit), rot6d_to_matrix(result.params.r6)
    )
    gt_rots = metrics_mod.joint_rotation_set(
        scene.gt_pose, rot6d_to_matrix(scene.gt_params.r6)
    )
    report = metrics_mod.full_report(
        pred_joints=result.joints,
        gt_joints=gt_joints,
        pred_mesh=result.fitted_mesh,
        gt_mesh=scene.gt_mesh,
        pred_rotations=pred_rots,
        gt_rotations=gt_rots,
    )
    return PipelineOutput(
        report=report,
        fit_result=result,
        decoded_vertices=decoded,
        decoded_l1_m=decoded_l1,
        confidence_profile=profile,
        bad_depth_voxels=bad_depth,
    )
