"""meshtri: volumetric multi-view mesh triangulation and body fitting.

The package covers the non-learned core of a multi-view human-mesh pipeline:
camera geometry and voxel-cuboid feature unprojection, confidence-weighted
multi-view fusion, 3D soft-argmax vertex decoding, per-vertex visibility,
quadric mesh subsampling, a linear-blend-skinning body model with exact
reverse-mode gradients, the surface-fitting optimizer, and the evaluation
metric suite - validated end-to-end on synthetic scenes.
"""

__version__ = "0.1.0"

from .body import BodyModel, FitParams, lbs_forward, load_model, make_toy_model, regress_joints, save_model
from .camera import (
    CameraCalib,
    FeatureMap,
    VoxelGrid,
    bilinear_sample,
    make_cuboid,
    project_grid,
    project_point,
    rotate_grid_yaw,
)
from .errors import MeshtriError
from .fitting import FitConfig, FitResult, data_term, fit, fit_joints, neutral_init, reg_terms
from .meshops import (
    SubsamplingOperator,
    TriMesh,
    VisibilityMap,
    apply_subsample,
    compose_operators,
    decimate,
    subsample_visibility,
)
from .metrics import MetricReport, angular_distance, auc, mpjpe, mpve, pck3d, per_joint_angular
from .objio import export_obj, import_obj
from .rotations import (
    axis_angle_to_matrix,
    matrix_to_axis_angle,
    matrix_to_rot6d,
    rot6d_to_matrix,
)
from .scene import PipelineConfig, Scene, SceneConfig, gen_scene, render_scene_heatmaps, run_pipeline
from .visibility import visibility, visibility_bruteforce
from .volumetric import (
    Heatmap3D,
    VolumeFeature,
    aggregate_softmax,
    aggregate_visibility_gated,
    confidence_profile,
    heatmap_normalize,
    render_gaussian_heatmaps,
    soft_argmax,
    unproject,
    vertex_l1_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
