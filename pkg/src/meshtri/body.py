"""Parametric articulated body: linear blend skinning over a 24-joint tree.

The forward function composes, in order: shape blending of the template,
rest-joint regression, forward kinematics down the kinematic tree (local
axis-angle rotations, a global rotation at the root pivoting on the rest
pelvis), linear blend skinning, and a global translation. It is written once
as an autodiff graph (:func:`lbs_graph`) so the fitting optimizer gets exact
reverse-mode gradients; :func:`lbs_forward` is the plain-array wrapper.

A deterministic capsule-limb toy humanoid (:func:`make_toy_model`) stands in
for proprietary body-model assets in tests and synthetic scenes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .camera import _as_readonly
from .errors import DimensionMismatch, InvariantViolation, ParseError
from .rotations import axis_angle_to_matrix_var, check_rotation

NUM_JOINTS = 24
NUM_SHAPE = 10
POSE_DIM = 3 * (NUM_JOINTS - 1)

SMPL_PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21)

SMPL_JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hand", "right_hand",
)

# 17-joint subset the joint regressor G selects (pelvis, hips, spine chain,
# knees, ankles, neck, head, shoulders, elbows, wrists).
REGRESSED_JOINT_SUBSET = (0, 1, 2, 3, 4, 5, 7, 8, 9, 12, 15, 16, 17, 18, 19, 20, 21)

# Elbow/knee bending DOFs as (joint, axis, sign): exp(sign * angle) grows when
# the joint bends the unnatural way. Axes follow the toy rig's rest frame
# (legs along -z bending about x, arms along +-x bending about z).
TOY_HINGE_DOFS = ((4, 0, 1), (5, 0, 1), (18, 2, -1), (19, 2, 1))
TOY_WRIST_JOINTS = (20, 21)


@dataclass(frozen=True)
class BodyModel:
    """Immutable template mesh + skinning data; safe to share across threads."""

    template: np.ndarray  # V x 3 meters
    faces: np.ndarray  # F x 3 int vertex indices
    shape_dirs: np.ndarray  # V x 3 x B
    skin_weights: np.ndarray  # V x J, rows sum to 1
    joint_regressor_g: np.ndarray  # 17 x V, rows sum to 1
    rest_joint_regressor: np.ndarray  # J x V
    parents: tuple  # length J, parents[0] == -1
    hinge_dofs: tuple = ()  # ((joint, axis, sign), ...)
    wrist_joints: tuple = ()

    def __post_init__(self):
        t = _as_readonly(self.template)
        f = _as_readonly(self.faces, dtype=np.int32)
        sd = _as_readonly(self.shape_dirs)
        sw = _as_readonly(self.skin_weights)
        g = _as_readonly(self.joint_regressor_g)
        rj = _as_readonly(self.rest_joint_regressor)
        v = t.shape[0]
        j = len(self.parents)
        if t.ndim != 2 or t.shape[1] != 3:
            raise InvariantViolation(f"template must be V x 3, got {t.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise InvariantViolation(f"faces must be F x 3, got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= v):
            raise InvariantViolation("face indices out of range")
        if f.size and np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise InvariantViolation("degenerate face with repeated vertex index")
        if sd.shape[:2] != (v, 3) or sd.ndim != 3:
            raise InvariantViolation(f"shape_dirs must be V x 3 x B, got {sd.shape}")
        if sw.shape != (v, j):
            raise InvariantViolation(f"skin_weights must be V x J, got {sw.shape}")
        if np.any(sw < -1e-12):
            raise InvariantViolation("skin_weights must be nonnegative")
        if np.max(np.abs(sw.sum(axis=1) - 1.0)) > 1e-9:
            raise InvariantViolation("skin_weights rows must sum to 1")
        if g.shape != (17, v):
            raise InvariantViolation(f"joint_regressor_g must be 17 x V, got {g.shape}")
        if np.any(g < -1e-12) or np.max(np.abs(g.sum(axis=1) - 1.0)) > 1e-9:
            raise InvariantViolation("joint regressor rows must be nonnegative and sum to 1")
        if rj.shape != (j, v):
            raise InvariantViolation(f"rest_joint_regressor must be J x V, got {rj.shape}")
        if self.parents[0] != -1 or any(not (0 <= p < i) for i, p in enumerate(self.parents[1:], 1)):
            raise InvariantViolation("parents must encode a tree rooted at joint 0")
        for joint, axis, sign in self.hinge_dofs:
            if not (1 <= joint < j and 0 <= axis < 3 and sign in (-1, 1)):
                raise InvariantViolation(f"bad hinge dof ({joint}, {axis}, {sign})")
        if any(not (1 <= w < j) for w in self.wrist_joints):
            raise InvariantViolation("wrist joint index out of range")
        object.__setattr__(self, "template", t)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "shape_dirs", sd)
        object.__setattr__(self, "skin_weights", sw)
        object.__setattr__(self, "joint_regressor_g", g)
        object.__setattr__(self, "rest_joint_regressor", rj)
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        object.__setattr__(self, "hinge_dofs", tuple((int(a), int(b), int(c)) for a, b, c in self.hinge_dofs))
        object.__setattr__(self, "wrist_joints", tuple(int(w) for w in self.wrist_joints))

    @property
    def num_vertices(self) -> int:
        return self.template.shape[0]

    @property
    def num_joints(self) -> int:
        return len(self.parents)

    @property
    def num_shape_dims(self) -> int:
        return self.shape_dirs.shape[2]

    @property
    def pose_dim(self) -> int:
        return 3 * (self.num_joints - 1)


@dataclass(frozen=True)
class FitParams:
    """Optimization parameters: pose code, global 6D rotation, shape, translation."""

    z: np.ndarray
    r6: np.ndarray
    beta: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        z = _as_readonly(self.z)
        r6 = _as_readonly(self.r6)
        beta = _as_readonly(self.beta)
        t = _as_readonly(self.t)
        if r6.shape != (6,) or t.shape != (3,):
            raise DimensionMismatch(f"r6 {r6.shape} must be (6,), t {t.shape} must be (3,)")
        for name, a in (("z", z), ("r6", r6), ("beta", beta), ("t", t)):
            if not np.all(np.isfinite(a)):
                raise InvariantViolation(f"FitParams.{name} contains non-finite values")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "r6", r6)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "t", t)

    def to_dict(self) -> dict:
        return {
            "z": [float(v) for v in self.z],
            "r6": [float(v) for v in self.r6],
            "beta": [float(v) for v in self.beta],
            "t": [float(v) for v in self.t],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitParams":
        return cls(
            z=np.asarray(d["z"], dtype=float),
            r6=np.asarray(d["r6"], dtype=float),
            beta=np.asarray(d["beta"], dtype=float),
            t=np.asarray(d["t"], dtype=float),
        )


def lbs_graph(model: BodyModel, pose: ad.Var, root_rot: ad.Var, beta: ad.Var, t: ad.Var) -> ad.Var:
    """Autodiff graph of the skinning forward function.

    pose: flat (3*(J-1),) local axis-angle vector; root_rot: 3x3 rotation
    applied at the root, pivoting on the rest root joint; beta: (B,) shape;
    t: (3,) translation. Returns the posed V x 3 mesh as a Var.
    """
    v = model.num_vertices
    j = model.num_joints

    sd_flat = ad.Var(model.shape_dirs.reshape(v * 3, model.num_shape_dims))
    shaped = ad.add(ad.Var(model.template), ad.reshape(ad.matmul(sd_flat, beta), (v, 3)))
    jrest = ad.matmul(ad.Var(model.rest_joint_regressor), shaped)

    world_rot: list[ad.Var] = [None] * j
    world_off: list[ad.Var] = [None] * j
    j0 = jrest[0]
    world_rot[0] = root_rot
    world_off[0] = ad.sub(j0, ad.matmul(root_rot, j0))
    for joint in range(1, j):
        parent = model.parents[joint]
        local = axis_angle_to_matrix_var(pose[slice(3 * (joint - 1), 3 * joint)])
        jj = jrest[joint]
        world_rot[joint] = ad.matmul(world_rot[parent], local)
        world_off[joint] = ad.add(
            ad.matmul(world_rot[parent], ad.sub(jj, ad.matmul(local, jj))),
            world_off[parent],
        )

    rows = [
        ad.concat([ad.reshape(world_rot[k], (9,)), world_off[k]]) for k in range(j)
    ]
    a_flat = ad.stack(rows, axis=0)  # J x 12
    blended = ad.reshape(ad.matmul(ad.Var(model.skin_weights), a_flat), (v, 4, 3))
    rot_part = blended[:, :3, :]  # V x 3 x 3 row-major per-vertex rotation
    off_part = blended[:, 3, :]  # V x 3
    posed = ad.add(
        ad.reshape(ad.matmul(rot_part, ad.reshape(shaped, (v, 3, 1))), (v, 3)),
        off_part,
    )
    return ad.add(posed, t)


def _check_lbs_dims(model: BodyModel, pose: np.ndarray, beta: np.ndarray, t: np.ndarray):
    if pose.size != model.pose_dim:
        raise DimensionMismatch(f"pose has {pose.size} values, model wants {model.pose_dim}")
    if beta.shape != (model.num_shape_dims,):
        raise DimensionMismatch(f"beta {beta.shape} != ({model.num_shape_dims},)")
    if t.shape != (3,):
        raise DimensionMismatch(f"t must be a 3-vector, got {t.shape}")


def lbs_forward(model: BodyModel, pose, global_rot, beta, t) -> np.ndarray:
    """Posed V x 3 mesh for plain arrays: pose (J-1,3) or flat, rotation 3x3."""
    pose = np.asarray(pose, dtype=float).reshape(-1)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    t = np.asarray(t, dtype=float).reshape(-1)
    _check_lbs_dims(model, pose, beta, t)
    rot = check_rotation(global_rot)
    out = lbs_graph(model, ad.Var(pose), ad.Var(rot), ad.Var(beta), ad.Var(t))
    return out.value


def regress_joints(model: BodyModel, mesh) -> np.ndarray:
    """17 x 3 joint coordinates, the regressor matrix applied to a mesh."""
    mesh = np.asarray(mesh, dtype=float)
    if mesh.shape != (model.num_vertices, 3):
        raise DimensionMismatch(
            f"mesh {mesh.shape} does not match model ({model.num_vertices}, 3)"
        )
    return model.joint_regressor_g @ mesh


def rest_joints(model: BodyModel, beta=None) -> np.ndarray:
    """J x 3 rest joint locations for an optionally shaped template."""
    shaped = model.template
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        shaped = shaped + model.shape_dirs @ beta
    return model.rest_joint_regressor @ shaped


# --- toy humanoid -----------------------------------------------------------

_TOY_JOINT_POS = np.array([
    [0.00, 0.00, 0.00],    # pelvis
    [0.09, 0.00, -0.06],   # left_hip
    [-0.09, 0.00, -0.06],  # right_hip
    [0.00, 0.00, 0.10],    # spine1
    [0.10, 0.00, -0.48],   # left_knee
    [-0.10, 0.00, -0.48],  # right_knee
    [0.00, 0.00, 0.22],    # spine2
    [0.10, 0.00, -0.86],   # left_ankle
    [-0.10, 0.00, -0.86],  # right_ankle
    [0.00, 0.00, 0.34],    # spine3
    [0.10, 0.10, -0.93],   # left_foot
    [-0.10, 0.10, -0.93],  # right_foot
    [0.00, 0.00, 0.52],    # neck
    [0.06, 0.00, 0.46],    # left_collar
    [-0.06, 0.00, 0.46],   # right_collar
    [0.00, 0.00, 0.64],    # head
    [0.17, 0.00, 0.48],    # left_shoulder
    [-0.17, 0.00, 0.48],   # right_shoulder
    [0.43, 0.00, 0.48],    # left_elbow
    [-0.43, 0.00, 0.48],   # right_elbow
    [0.68, 0.00, 0.48],    # left_wrist
    [-0.68, 0.00, 0.48],   # right_wrist
    [0.76, 0.00, 0.48],    # left_hand
    [-0.76, 0.00, 0.48],   # right_hand
])

_TOY_RADII = {
    0: 0.110, 1: 0.080, 2: 0.080, 3: 0.115, 4: 0.058, 5: 0.058, 6: 0.115,
    7: 0.045, 8: 0.045, 9: 0.105, 10: 0.040, 11: 0.040, 12: 0.050,
    13: 0.050, 14: 0.050, 15: 0.085, 16: 0.055, 17: 0.055, 18: 0.045,
    19: 0.045, 20: 0.035, 21: 0.035, 22: 0.030, 23: 0.030,
}

_RING_SIZE = 6
_LEAF_JOINTS = (10, 11, 15, 22, 23)


def _ring_basis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([0.337, 0.715, 0.613])
    d = direction / np.linalg.norm(direction)
    e1 = np.cross(d, ref)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(d, e1)


def _ring_points(center, direction, radius, modulation=None) -> np.ndarray:
    e1, e2 = _ring_basis(direction)
    angles = 2.0 * np.pi * np.arange(_RING_SIZE) / _RING_SIZE
    r = radius if modulation is None else radius * modulation[:, None]
    return center + r * (np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2)


def make_toy_model(seed: int = 0, vertex_budget: int = 600) -> BodyModel:
    """Deterministic capsule-limb humanoid with the 24-joint tree.

    ~1.7 m tall, z-up, T-pose facing +y, pelvis at the origin. Vertex count
    lands within +-10% of the budget. Joint marker rings (centroid == joint)
    back both joint regressors, so `rest_joints` reproduces the rig exactly.
    Shape directions are smooth fields adjusted to keep the pelvis pinned at
    the origin for every shape coefficient.
    """
    if vertex_budget < 50:
        raise DimensionMismatch(f"vertex_budget {vertex_budget} < 50")
    rng = np.random.default_rng(seed)
    joints = _TOY_JOINT_POS.copy()
    radii = {k: r * (1.0 + 0.05 * rng.uniform(-1.0, 1.0)) for k, r in _TOY_RADII.items()}

    bones = [(SMPL_PARENTS[j], j) for j in range(1, NUM_JOINTS)]
    lengths = np.array([np.linalg.norm(joints[c] - joints[p]) for p, c in bones])

    n_joint_ring_verts = NUM_JOINTS * _RING_SIZE
    n_caps = len(_LEAF_JOINTS)
    n_fins = NUM_JOINTS - 1
    budget_interior = max(vertex_budget - n_joint_ring_verts - n_caps - n_fins, 0)
    total_rings = budget_interior // _RING_SIZE
    quota = lengths / lengths.sum() * total_rings
    counts = np.floor(quota).astype(int)
    remainder = quota - counts
    for k in np.argsort(-remainder)[: total_rings - counts.sum()]:
        counts[k] += 1

    # Ring direction at a joint: along the bone into it (root: toward spine1).
    ring_dirs = np.empty((NUM_JOINTS, 3))
    ring_dirs[0] = joints[3] - joints[0]
    for p, c in bones:
        ring_dirs[c] = joints[c] - joints[p]

    verts: list[np.ndarray] = []
    ring_of_joint: list[list[int]] = []
    for j in range(NUM_JOINTS):
        pts = _ring_points(joints[j], ring_dirs[j], radii[j])
        base = len(verts)
        verts.extend(pts)
        ring_of_joint.append(list(range(base, base + _RING_SIZE)))

    faces: list[tuple[int, int, int]] = []
    # vertex -> (driver joint a, joint b, weight on b); joint rings split
    # influence across the bend, interior tube vertices ramp toward the child.
    weight_spec: dict[int, tuple[int, int, float]] = {}
    for j in range(NUM_JOINTS):
        p = SMPL_PARENTS[j]
        a = p if p >= 0 else 0
        wb = 0.5 if p >= 0 else 0.0
        for idx in ring_of_joint[j]:
            weight_spec[idx] = (a, j, wb)

    def connect(ring_a: list[int], ring_b: list[int]):
        m = _RING_SIZE
        for i in range(m):
            a0, a1 = ring_a[i], ring_a[(i + 1) % m]
            b0, b1 = ring_b[i], ring_b[(i + 1) % m]
            faces.append((a0, b0, b1))
            faces.append((a0, b1, a1))

    for (p, c), n_mid in zip(bones, counts):
        chain = [ring_of_joint[p]]
        direction = joints[c] - joints[p]
        for k in range(1, n_mid + 1):
            s = k / (n_mid + 1)
            center = joints[p] + s * direction
            radius = (1.0 - s) * radii[p] + s * radii[c]
            # capsule taper: slightly slimmer mid-bone
            radius *= 1.0 - 0.15 * np.sin(np.pi * s) * 0.5
            # organic surface modulation keeps quadric collapse costs nonzero
            # everywhere, so subsampling retains vertices on every segment
            # (joint rings stay unmodulated: their centroid is the joint);
            # amplitude is absolute, not radius-relative, so thin limbs carry
            # as much collapse-resisting detail as the torso
            phases = 2.0 * np.pi * np.arange(_RING_SIZE) / _RING_SIZE
            amp = 0.008 / radius
            modulation = 1.0 + amp * np.sin(3.0 * phases + 11.0 * s + float(c)) \
                + 0.5 * amp * np.cos(2.0 * phases - 7.0 * s + 2.0 * float(c))
            pts = _ring_points(center, direction, radius, modulation)
            base = len(verts)
            verts.extend(pts)
            ring = list(range(base, base + _RING_SIZE))
            q = np.clip((s - 0.6) / 0.4, 0.0, 1.0)
            ramp = 0.5 * (3.0 * q * q - 2.0 * q * q * q)
            for idx in ring:
                weight_spec[idx] = (p, c, ramp)
            chain.append(ring)
        chain.append(ring_of_joint[c])
        for a, b in zip(chain[:-1], chain[1:]):
            connect(a, b)
        # one off-axis fin per bone: a distinctive high-relief feature that
        # subsampling keeps, giving every segment a long twist lever
        host = chain[len(chain) // 2]
        centroid = np.mean([verts[i] for i in host], axis=0)
        fin = centroid + (verts[host[0]] - centroid) * 2.2
        fin_idx = len(verts)
        verts.append(fin)
        weight_spec[fin_idx] = weight_spec[host[0]]
        faces.append((host[0], host[1], fin_idx))
        faces.append((host[0], fin_idx, host[_RING_SIZE - 1]))

    for leaf in _LEAF_JOINTS:
        direction = ring_dirs[leaf] / np.linalg.norm(ring_dirs[leaf])
        apex = joints[leaf] + direction * radii[leaf]
        apex_idx = len(verts)
        verts.append(apex)
        weight_spec[apex_idx] = (leaf, leaf, 0.0)
        ring = ring_of_joint[leaf]
        for i in range(_RING_SIZE):
            faces.append((ring[i], ring[(i + 1) % _RING_SIZE], apex_idx))

    template = np.asarray(verts)
    v = template.shape[0]

    skin = np.zeros((v, NUM_JOINTS))
    for idx, (a, b, wb) in weight_spec.items():
        skin[idx, a] += 1.0 - wb
        skin[idx, b] += wb

    rest_reg = np.zeros((NUM_JOINTS, v))
    for j in range(NUM_JOINTS):
        rest_reg[j, ring_of_joint[j]] = 1.0 / _RING_SIZE
    g = rest_reg[list(REGRESSED_JOINT_SUBSET)]

    # Smooth shape fields: girth, height, and seeded sinusoidal bumps.
    axis_dist = template.copy()
    axis_dist[:, 2] = 0.0
    dirs = np.zeros((v, 3, NUM_SHAPE))
    dirs[:, :, 0] = 0.03 * axis_dist
    dirs[:, 2, 1] = 0.04 * template[:, 2]
    for b in range(2, NUM_SHAPE):
        freq = rng.uniform(1.0, 4.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = 0.015
        profile = np.sin(freq * template[:, 2] * np.pi + phase)
        dirs[:, :, b] = amp * profile[:, None] * axis_dist
    # pin the regressed pelvis at the origin for every shape coefficient
    pelvis_row = rest_reg[0]
    for b in range(NUM_SHAPE):
        dirs[:, :, b] -= pelvis_row @ dirs[:, :, b]

    return BodyModel(
        template=template,
        faces=np.asarray(faces, dtype=np.int32),
        shape_dirs=dirs,
        skin_weights=skin,
        joint_regressor_g=g,
        rest_joint_regressor=rest_reg,
        parents=SMPL_PARENTS,
        hinge_dofs=TOY_HINGE_DOFS,
        wrist_joints=TOY_WRIST_JOINTS,
    )


# --- model container I/O ----------------------------------------------------

_ARRAY_FIELDS = (
    ("template", "<f8"),
    ("faces", "<i4"),
    ("shape_dirs", "<f8"),
    ("skin_weights", "<f8"),
    ("joint_regressor_g", "<f8"),
    ("rest_joint_regressor", "<f8"),
)


def save_model(model: BodyModel, path: str | Path) -> None:
    """Write a model as a JSON header plus a `.bin` sidecar blob."""
    from .serial import SCHEMA_VERSION, dump_json

    path = Path(path)
    blob_path = path.with_suffix(path.suffix + ".bin")
    arrays = {}
    chunks = []
    offset = 0
    for name, dtype in _ARRAY_FIELDS:
        arr = np.ascontiguousarray(getattr(model, name), dtype=dtype)
        raw = arr.tobytes()
        arrays[name] = {"offset": offset, "shape": list(arr.shape), "dtype": dtype}
        chunks.append(raw)
        offset += len(raw)
    header = {
        "schema_version": SCHEMA_VERSION,
        "V": model.num_vertices,
        "F": int(model.faces.shape[0]),
        "J": model.num_joints,
        "B": model.num_shape_dims,
        "parents": list(model.parents),
        "hinge_dofs": [list(h) for h in model.hinge_dofs],
        "wrist_joints": list(model.wrist_joints),
        "blob": blob_path.name,
        "arrays": arrays,
    }
    dump_json(header, path)
    blob_path.write_bytes(b"".join(chunks))


def load_model(path: str | Path) -> BodyModel:
    """Read a model container; raises ParseError / InvariantViolation."""
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    try:
        blob = (path.parent / header["blob"]).read_bytes()
        fields = {}
        for name, dtype in _ARRAY_FIELDS:
            meta = header["arrays"][name]
            shape = tuple(int(s) for s in meta["shape"])
            dt = np.dtype(meta["dtype"])
            start = int(meta["offset"])
            nbytes = int(np.prod(shape)) * dt.itemsize
            if start + nbytes > len(blob):
                raise ParseError(f"{path}: array {name} overruns blob ({start}+{nbytes} > {len(blob)})")
            fields[name] = np.frombuffer(blob[start : start + nbytes], dtype=dt).reshape(shape)
        parents = tuple(int(p) for p in header["parents"])
        hinges = tuple(tuple(int(x) for x in h) for h in header.get("hinge_dofs", []))
        wrists = tuple(int(w) for w in header.get("wrist_joints", []))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as e:
        raise ParseError(f"{path}: bad model container: {e}") from e
    return BodyModel(
        template=fields["template"],
        faces=fields["faces"],
        shape_dirs=fields["shape_dirs"],
        skin_weights=fields["skin_weights"],
        joint_regressor_g=fields["joint_regressor_g"],
        rest_joint_regressor=fields["rest_joint_regressor"],
        parents=parents,
        hinge_dofs=hinges,
        wrist_joints=wrists,
    )
