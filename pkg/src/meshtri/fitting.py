"""Surface fitting: minimize data + regularization cost over body parameters.

The cost is E_fit = E_data + E_reg with E_data the mean squared distance
between the model's sub-vertices and the target vertices, and E_reg the
weighted sum of L2 penalties on pose code and shape, an L2 penalty on wrist
rotations, and an exponential penalty on elbow/knee hinge angles bending the
unnatural way. Optimization is Adam (beta1 0.9, beta2 0.999, eps 1e-8) with
exact reverse-mode gradients from the body-model graph; runs are
deterministic given (inputs, config).

The pose prior is pluggable: the default decodes the code directly as the
per-joint axis-angle vector; any differentiable decoder can be registered to
stand in for a learned latent prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .body import BodyModel, FitParams, lbs_graph, regress_joints
from .errors import DimensionMismatch, InvalidConfig, NonFiniteCost, ShapeMismatch
from .meshops import SubsamplingOperator
from .rotations import rot6d_to_matrix_var

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

DATA_TERM_VERTICES = "vertices"
DATA_TERM_JOINTS = "joints"


class DirectPosePrior:
    """Identity prior: the code z is the per-joint axis-angle vector itself."""

    name = "direct-L2"

    def dim(self, model: BodyModel) -> int:
        return model.pose_dim

    def decode(self, z: ad.Var, model: BodyModel) -> ad.Var:
        return z


_POSE_PRIORS = {"direct-L2": DirectPosePrior}


def register_pose_prior(name: str, factory) -> None:
    """Register a pose-prior factory (callable returning dim/decode object)."""
    _POSE_PRIORS[name] = factory


def get_pose_prior(name: str):
    try:
        return _POSE_PRIORS[name]()
    except KeyError:
        raise InvalidConfig(f"unknown pose prior {name!r}; registered: {sorted(_POSE_PRIORS)}")


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 6e-2
    iterations: int = 500
    lambda_w: float = 6e-2
    lambda_z: float = 2e-6
    lambda_beta: float = 5e-6
    lambda_alpha: float = 5e-5
    seed: int = 0
    pose_prior: str = "direct-L2"
    data_term: str = DATA_TERM_VERTICES

    def __post_init__(self):
        for name in ("lambda_w", "lambda_z", "lambda_beta", "lambda_alpha"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if self.iterations < 1:
            raise InvalidConfig("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")
        if self.data_term not in (DATA_TERM_VERTICES, DATA_TERM_JOINTS):
            raise InvalidConfig(f"data_term must be vertices|joints, got {self.data_term!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "lambda_w": self.lambda_w,
            "lambda_z": self.lambda_z,
            "lambda_beta": self.lambda_beta,
            "lambda_alpha": self.lambda_alpha,
            "seed": self.seed,
            "pose_prior": self.pose_prior,
            "data_term": self.data_term,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        from .serial import check_schema

        check_schema(d, set(cls().to_dict()), "fit config")
        clean = {k: v for k, v in d.items() if k != "schema_version"}
        return cls(**clean)


@dataclass(frozen=True)
class TermBreakdown:
    """Cost components at the final parameters."""

    e_data: float
    e_z: float
    e_beta: float
    e_theta_w: float
    e_alpha: float
    e_reg: float
    e_fit: float

    def to_dict(self) -> dict:
        return {
            "e_data": self.e_data,
            "e_z": self.e_z,
            "e_beta": self.e_beta,
            "e_theta_w": self.e_theta_w,
            "e_alpha": self.e_alpha,
            "e_reg": self.e_reg,
            "e_fit": self.e_fit,
        }


@dataclass(frozen=True)
class FitResult:
    params: FitParams
    fitted_mesh: np.ndarray  # V x 3
    fitted_sub: np.ndarray  # N x 3
    joints: np.ndarray  # 17 x 3
    cost_trace: np.ndarray  # per-iteration E_fit at the pre-step parameters
    term_breakdown: TermBreakdown


def data_term(fitted_sub, target) -> float:
    """Mean squared L2 distance between sub-vertex rows."""
    fitted_sub = np.asarray(fitted_sub, dtype=float)
    target = np.asarray(target, dtype=float)
    if fitted_sub.shape != target.shape:
        raise ShapeMismatch(f"{fitted_sub.shape} vs {target.shape}")
    diff = fitted_sub - target
    return float((diff * diff).sum() / fitted_sub.shape[0])


def _wrist_indices(model: BodyModel) -> list[int]:
    idx = []
    for w in model.wrist_joints:
        idx.extend(range(3 * (w - 1), 3 * (w - 1) + 3))
    return idx


def _hinge_indices(model: BodyModel) -> tuple[list[int], np.ndarray]:
    idx = [3 * (joint - 1) + axis for joint, axis, _ in model.hinge_dofs]
    signs = np.array([float(sign) for _, _, sign in model.hinge_dofs])
    return idx, signs


def reg_terms(
    params: FitParams, model: BodyModel, cfg: FitConfig
) -> tuple[float, float, float, float, float]:
    """(E_z, E_beta, E_theta_w, E_alpha, E_reg) at the given parameters."""
    prior = get_pose_prior(cfg.pose_prior)
    if params.z.shape != (prior.dim(model),):
        raise DimensionMismatch(f"z {params.z.shape} != ({prior.dim(model)},)")
    if params.beta.shape != (model.num_shape_dims,):
        raise DimensionMismatch(f"beta {params.beta.shape} != ({model.num_shape_dims},)")
    pose = prior.decode(ad.Var(params.z), model).value
    e_z = float(params.z @ params.z)
    e_beta = float(params.beta @ params.beta)
    widx = _wrist_indices(model)
    e_w = float(pose[widx] @ pose[widx]) if widx else 0.0
    hidx, signs = _hinge_indices(model)
    e_alpha = float(np.exp(signs * pose[hidx]).sum()) if hidx else 0.0
    e_reg = (
        cfg.lambda_z * e_z + cfg.lambda_beta * e_beta + cfg.lambda_w * e_w + cfg.lambda_alpha * e_alpha
    )
    return e_z, e_beta, e_w, e_alpha, e_reg


def _cost_graph(
    model: BodyModel,
    target: np.ndarray,
    subop: SubsamplingOperator | None,
    cfg: FitConfig,
    prior,
    z: ad.Var,
    r6: ad.Var,
    beta: ad.Var,
    t: ad.Var,
):
    """Build E_fit as a Var; returns (cost, pieces dict of term Vars)."""
    pose = prior.decode(z, model)
    root = rot6d_to_matrix_var(r6)
    mesh = lbs_graph(model, pose, root, beta, t)

    if cfg.data_term == DATA_TERM_VERTICES:
        sub = mesh[subop.kept_indices]
        diff = ad.sub(sub, ad.Var(target))
        e_data = ad.mul(ad.sum_(ad.square(diff)), 1.0 / target.shape[0])
    else:
        joints = ad.matmul(ad.Var(model.joint_regressor_g), mesh)
        diff = ad.sub(joints, ad.Var(target))
        e_data = ad.mul(ad.sum_(ad.square(diff)), 1.0 / target.shape[0])

    e_z = ad.sum_(ad.square(z))
    e_beta = ad.sum_(ad.square(beta))
    widx = _wrist_indices(model)
    e_w = ad.sum_(ad.square(pose[widx])) if widx else ad.Var(0.0)
    hidx, signs = _hinge_indices(model)
    e_alpha = ad.sum_(ad.exp(ad.mul(pose[hidx], signs))) if hidx else ad.Var(0.0)
    e_reg = ad.add(
        ad.add(ad.mul(e_z, cfg.lambda_z), ad.mul(e_beta, cfg.lambda_beta)),
        ad.add(ad.mul(e_w, cfg.lambda_w), ad.mul(e_alpha, cfg.lambda_alpha)),
    )
    cost = ad.add(e_data, e_reg)
    pieces = {
        "mesh": mesh,
        "e_data": e_data,
        "e_z": e_z,
        "e_beta": e_beta,
        "e_theta_w": e_w,
        "e_alpha": e_alpha,
        "e_reg": e_reg,
    }
    return cost, pieces


def neutral_init(model: BodyModel, target: np.ndarray, cfg: FitConfig) -> FitParams:
    """All-zero code and shape, identity rotation, translation at the target centroid."""
    prior = get_pose_prior(cfg.pose_prior)
    return FitParams(
        z=np.zeros(prior.dim(model)),
        r6=np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        beta=np.zeros(model.num_shape_dims),
        t=np.asarray(target, dtype=float).mean(axis=0),
    )


def fit(
    model: BodyModel,
    target,
    subop: SubsamplingOperator | None,
    cfg: FitConfig = FitConfig(),
    init: FitParams | str = "neutral",
) -> FitResult:
    """Adam-minimize the fitting cost; returns parameters, meshes, and trace.

    target: N x 3 sub-vertex coordinates (or 17 x 3 joints when
    cfg.data_term == "joints"). cost_trace[i] is the cost at the parameters
    entering iteration i; the term breakdown is evaluated at the final
    parameters, so its e_fit is the post-optimization cost.
    """
    target = np.ascontiguousarray(target, dtype=float)
    if target.ndim != 2 or target.shape[1] != 3:
        raise DimensionMismatch(f"target must be N x 3, got {target.shape}")
    if cfg.data_term == DATA_TERM_VERTICES:
        if subop is None:
            raise DimensionMismatch("vertex data term needs a subsampling operator")
        if subop.source_v != model.num_vertices:
            raise DimensionMismatch(
                f"operator source {subop.source_v} != model vertices {model.num_vertices}"
            )
        if target.shape[0] != subop.n:
            raise DimensionMismatch(f"target rows {target.shape[0]} != operator N {subop.n}")
    else:
        if target.shape[0] != model.joint_regressor_g.shape[0]:
            raise DimensionMismatch(
                f"joint target rows {target.shape[0]} != {model.joint_regressor_g.shape[0]}"
            )

    prior = get_pose_prior(cfg.pose_prior)
    if init == "neutral":
        params = neutral_init(model, target, cfg)
    elif isinstance(init, FitParams):
        params = init
    else:
        raise InvalidConfig(f"init must be FitParams or 'neutral', got {init!r}")
    if params.z.shape != (prior.dim(model),):
        raise DimensionMismatch(f"init z {params.z.shape} != ({prior.dim(model)},)")
    if params.beta.shape != (model.num_shape_dims,):
        raise DimensionMismatch(f"init beta {params.beta.shape} != ({model.num_shape_dims},)")

    values = {
        "z": params.z.copy(),
        "r6": params.r6.copy(),
        "beta": params.beta.copy(),
        "t": params.t.copy(),
    }
    moment1 = {k: np.zeros_like(v) for k, v in values.items()}
    moment2 = {k: np.zeros_like(v) for k, v in values.items()}
    trace = np.empty(cfg.iterations)

    for it in range(cfg.iterations):
        leaves = {k: ad.Var(v) for k, v in values.items()}
        cost, _ = _cost_graph(
            model, target, subop, cfg, prior,
            leaves["z"], leaves["r6"], leaves["beta"], leaves["t"],
        )
        c = float(cost.value)
        if not np.isfinite(c):
            raise NonFiniteCost(it)
        trace[it] = c
        ad.backward(cost)
        step = it + 1
        bias1 = 1.0 - ADAM_BETA1**step
        bias2 = 1.0 - ADAM_BETA2**step
        for k in values:
            g = leaves[k].grad
            if g is None:
                g = np.zeros_like(values[k])
            moment1[k] = ADAM_BETA1 * moment1[k] + (1.0 - ADAM_BETA1) * g
            moment2[k] = ADAM_BETA2 * moment2[k] + (1.0 - ADAM_BETA2) * (g * g)
            mhat = moment1[k] / bias1
            vhat = moment2[k] / bias2
            values[k] = values[k] - cfg.learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)

    leaves = {k: ad.Var(v) for k, v in values.items()}
    cost, pieces = _cost_graph(
        model, target, subop, cfg, prior,
        leaves["z"], leaves["r6"], leaves["beta"], leaves["t"],
    )
    final_cost = float(cost.value)
    if not np.isfinite(final_cost):
        raise NonFiniteCost(cfg.iterations)
    breakdown = TermBreakdown(
        e_data=float(pieces["e_data"].value),
        e_z=float(pieces["e_z"].value),
        e_beta=float(pieces["e_beta"].value),
        e_theta_w=float(pieces["e_theta_w"].value),
        e_alpha=float(pieces["e_alpha"].value),
        e_reg=float(pieces["e_reg"].value),
        e_fit=final_cost,
    )
    mesh = pieces["mesh"].value
    fitted_sub = mesh[subop.kept_indices] if subop is not None else mesh
    result_params = FitParams(z=values["z"], r6=values["r6"], beta=values["beta"], t=values["t"])
    return FitResult(
        params=result_params,
        fitted_mesh=mesh,
        fitted_sub=np.ascontiguousarray(fitted_sub),
        joints=regress_joints(model, mesh),
        cost_trace=trace,
        term_breakdown=breakdown,
    )


def fit_joints(result: FitResult, model: BodyModel) -> np.ndarray:
    """Regressed 17 x 3 joints of a fit's full mesh."""
    if result.fitted_mesh.shape != (model.num_vertices, 3):
        raise DimensionMismatch(
            f"fitted mesh {result.fitted_mesh.shape} does not match model"
        )
    return regress_joints(model, result.fitted_mesh)


def decoded_pose(params: FitParams, model: BodyModel, cfg: FitConfig) -> np.ndarray:
    """Flat axis-angle pose vector the prior decodes from params.z."""
    prior = get_pose_prior(cfg.pose_prior)
    return prior.decode(ad.Var(params.z), model).value
