"""Evaluation metrics: position errors, rotation errors, 3DPCK, AUC.

Position inputs are meters (the library unit); position metrics report
millimeters. No pelvis alignment is applied anywhere. Rotation error is the
angular distance 2 asin(||R - R*||_F / (2 sqrt 2)) in degrees, evaluated on
parent-relative joint rotations with the root entry carrying the global
orientation.

The AUC averages 3DPCK over thresholds 5..150 mm in 5 mm steps
(trapezoidal); the 0 mm endpoint is excluded because the strict inequality
makes it identically zero. The grid is a documented convention, recorded in
the report metadata for comparability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import SMPL_PARENTS
from .errors import LengthMismatch, ShapeMismatch
from .rotations import axis_angle_to_matrix, check_rotation

MM_PER_M = 1000.0
PCK_DEFAULT_THRESHOLD_MM = 150.0
AUC_STEP_MM = 5.0
AUC_MAX_MM = 150.0
AUC_GRID_NOTE = "pck averaged over thresholds 5..150 mm step 5 (t=0 excluded: strict inequality)"

# Table-style 20-joint rotation evaluation set: the 24-joint tree minus feet
# and hands; "torso/spine/chest" are the three spine links, "thrx" the collars.
ANGULAR_JOINT_NAMES = (
    "pelvis", "L-hip", "R-hip", "torso", "L-knee", "R-knee", "spine",
    "L-ankl", "R-ankl", "chest", "neck", "L-thrx", "R-thrx", "head",
    "L-shld", "R-shld", "L-elbw", "R-elbw", "L-wrst", "R-wrst",
)
ANGULAR_SMPL_JOINTS = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21)


@dataclass(frozen=True)
class MetricReport:
    mpjpe: float  # mm
    mpve: float  # mm
    mean_angular: float  # degrees
    per_joint_angular: dict  # name -> degrees, ANGULAR_JOINT_NAMES order
    pck: float  # percent at pck_threshold_mm
    auc: float  # percent
    pck_threshold_mm: float = PCK_DEFAULT_THRESHOLD_MM
    auc_grid: str = field(default=AUC_GRID_NOTE)

    def __post_init__(self):
        if min(self.mpjpe, self.mpve, self.mean_angular) < 0:
            raise ShapeMismatch("metrics must be nonnegative")
        if not (0.0 <= self.pck <= 100.0 and 0.0 <= self.auc <= 100.0):
            raise ShapeMismatch("pck/auc must lie in [0, 100]")

    def to_dict(self) -> dict:
        return {
            "mpjpe_mm": self.mpjpe,
            "mpve_mm": self.mpve,
            "mean_angular_deg": self.mean_angular,
            "per_joint_angular_deg": dict(self.per_joint_angular),
            "pck_percent": self.pck,
            "pck_threshold_mm": self.pck_threshold_mm,
            "auc_percent": self.auc,
            "auc_grid": self.auc_grid,
        }


def _mean_distance_mm(pred, gt) -> float:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"{pred.shape} vs {gt.shape}")
    return float(np.linalg.norm(pred - gt, axis=-1).mean() * MM_PER_M)


def mpjpe(pred, gt) -> float:
    """Mean Euclidean joint error in mm, no root alignment."""
    return _mean_distance_mm(pred, gt)


def mpve(pred, gt) -> float:
    """Mean Euclidean vertex error in mm, no root alignment."""
    return _mean_distance_mm(pred, gt)


def angular_distance(r, r_star) -> float:
    """Rotation error 2 asin(||R - R*||_F / (2 sqrt 2)) in degrees.

    The asin argument is clamped to [0, 1]: floating-point Frobenius norms
    can exceed 2 sqrt 2 by ulps for opposite rotations.
    """
    r = check_rotation(r)
    r_star = check_rotation(r_star)
    arg = np.linalg.norm(r - r_star) / (2.0 * np.sqrt(2.0))
    return float(np.degrees(2.0 * np.arcsin(np.clip(arg, 0.0, 1.0))))


def per_joint_angular(pred_rots, gt_rots) -> dict:
    """Elementwise angular distance over the named 20-joint rotation set."""
    if len(pred_rots) != len(ANGULAR_JOINT_NAMES) or len(gt_rots) != len(ANGULAR_JOINT_NAMES):
        raise LengthMismatch(
            f"need {len(ANGULAR_JOINT_NAMES)} rotations, got {len(pred_rots)}/{len(gt_rots)}"
        )
    return {
        name: angular_distance(p, g)
        for name, p, g in zip(ANGULAR_JOINT_NAMES, pred_rots, gt_rots)
    }


def joint_rotation_set(pose, global_rot) -> list:
    """The 20 evaluated rotations from a flat pose vector + global rotation.

    Entry 0 (pelvis) is the global orientation; every other entry is the
    parent-relative rotation of the corresponding tree joint.
    """
    pose = np.asarray(pose, dtype=float).reshape(-1, 3)
    if pose.shape[0] != len(SMPL_PARENTS) - 1:
        raise LengthMismatch(f"pose has {pose.shape[0]} joints, want {len(SMPL_PARENTS) - 1}")
    rots = [check_rotation(global_rot)]
    for j in ANGULAR_SMPL_JOINTS[1:]:
        rots.append(axis_angle_to_matrix(pose[j - 1]))
    return rots


def mean_angular(per_joint: dict) -> float:
    return float(np.mean(list(per_joint.values())))


def pck3d(pred, gt, threshold_mm: float = PCK_DEFAULT_THRESHOLD_MM) -> float:
    """Percent of joints with error strictly below the threshold."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"{pred.shape} vs {gt.shape}")
    if not (threshold_mm > 0):
        raise ShapeMismatch(f"threshold must be positive, got {threshold_mm}")
    err = np.linalg.norm(pred - gt, axis=-1) * MM_PER_M
    return float((err < threshold_mm).mean() * 100.0)


def auc(pred, gt) -> float:
    """Trapezoidal mean of pck3d over the 5..150 mm threshold grid, percent."""
    thresholds = np.arange(AUC_STEP_MM, AUC_MAX_MM + AUC_STEP_MM / 2, AUC_STEP_MM)
    vals = np.array([pck3d(pred, gt, float(t)) for t in thresholds])
    return float(np.trapezoid(vals, dx=AUC_STEP_MM) / (AUC_MAX_MM - AUC_STEP_MM))


def full_report(
    pred_joints,
    gt_joints,
    pred_mesh,
    gt_mesh,
    pred_rotations=None,
    gt_rotations=None,
    pck_threshold_mm: float = PCK_DEFAULT_THRESHOLD_MM,
) -> MetricReport:
    """Assemble every metric; rotation entries fall back to zeros if omitted."""
    if pred_rotations is not None and gt_rotations is not None:
        per_joint = per_joint_angular(pred_rotations, gt_rotations)
    else:
        per_joint = {name: 0.0 for name in ANGULAR_JOINT_NAMES}
    return MetricReport(
        mpjpe=mpjpe(pred_joints, gt_joints),
        mpve=mpve(pred_mesh, gt_mesh),
        mean_angular=mean_angular(per_joint),
        per_joint_angular=per_joint,
        pck=pck3d(pred_joints, gt_joints, pck_threshold_mm),
        auc=auc(pred_joints, gt_joints),
        pck_threshold_mm=pck_threshold_mm,
    )
