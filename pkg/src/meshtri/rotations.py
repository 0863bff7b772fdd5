"""Rotation representations: 3x3 matrices, axis-angle, and the 6D encoding.

The 6D encoding stores the first two columns of a rotation matrix; decoding
runs Gram-Schmidt (normalize a1; project a1 out of a2 and normalize; third
column by cross product). Axis-angle uses the standard rotation formula with
series-stabilized coefficients so the zero vector maps smoothly to identity.

Plain-numpy functions live next to tape-graph counterparts (``*_var``) that
build autodiff nodes for the fitting optimizer.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import DegenerateInput, InvalidRotation

ROT_TOL = 1e-9
_DEGENERATE_NORM = 1e-12


def check_rotation(r: np.ndarray, tol: float = ROT_TOL) -> np.ndarray:
    """Validate orthonormality and det +1; returns the matrix unchanged."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise InvalidRotation(f"rotation must be 3x3, got {r.shape}")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise InvalidRotation("matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise InvalidRotation("matrix determinant is not +1")
    return r


def rot6d_to_matrix(r6) -> np.ndarray:
    """Decode a 6-vector (two 3D columns) into a rotation matrix."""
    r6 = np.asarray(r6, dtype=float).reshape(6)
    a1, a2 = r6[:3], r6[3:]
    n1 = np.linalg.norm(a1)
    if n1 < _DEGENERATE_NORM:
        raise DegenerateInput("first 6D column is numerically zero")
    b1 = a1 / n1
    resid = a2 - np.dot(b1, a2) * b1
    n2 = np.linalg.norm(resid)
    if n2 < _DEGENERATE_NORM:
        raise DegenerateInput("second 6D column is parallel to the first")
    b2 = resid / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def matrix_to_rot6d(r: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix, flattened."""
    r = np.asarray(r, dtype=float)
    return np.concatenate([r[:, 0], r[:, 1]])


def axis_angle_to_matrix(aa) -> np.ndarray:
    """Rotation matrix of an axis-angle vector (angle = vector norm)."""
    aa = np.asarray(aa, dtype=float).reshape(3)
    s = float(aa @ aa)
    k = np.array([[0.0, -aa[2], aa[1]], [aa[2], 0.0, -aa[0]], [-aa[1], aa[0], 0.0]])
    return np.eye(3) + ad._coeff_a_value(np.asarray(s)) * k + ad._coeff_b_value(np.asarray(s)) * (k @ k)


def matrix_to_axis_angle(r: np.ndarray) -> np.ndarray:
    """Inverse of axis_angle_to_matrix; returned angle lies in [0, pi]."""
    r = check_rotation(r)
    cos_angle = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_angle)
    if angle < 1e-10:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # Near pi the off-diagonal sine term vanishes; recover the axis from
        # the symmetric part R + I = 2 axis axis^T (up to sign).
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(m), 0.0, None))
        k = int(np.argmax(axis))
        if axis[k] > 0:
            axis = m[:, k] / axis[k]
        n = np.linalg.norm(axis)
        if n < _DEGENERATE_NORM:
            raise DegenerateInput("cannot recover axis near angle pi")
        return axis / n * angle
    vec = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return vec / (2.0 * np.sin(angle)) * angle


def rot6d_to_matrix_var(r6: ad.Var) -> ad.Var:
    """Tape-graph Gram-Schmidt decode of a 6D rotation (for fitting)."""
    a1 = r6[slice(0, 3)]
    a2 = r6[slice(3, 6)]
    b1 = ad.normalize3(a1)
    resid = ad.sub(a2, ad.mul(ad.dot(b1, a2), b1))
    b2 = ad.normalize3(resid)
    b3 = ad.cross3(b1, b2)
    return ad.stack([b1, b2, b3], axis=1)


def axis_angle_to_matrix_var(aa: ad.Var) -> ad.Var:
    """Tape-graph axis-angle decode (for fitting)."""
    s = ad.sum_(ad.square(aa))
    k = ad.skew3(aa)
    kk = ad.matmul(k, k)
    term1 = ad.mul(ad.rot_coeff_a(s), k)
    term2 = ad.mul(ad.rot_coeff_b(s), kk)
    return ad.add(ad.add(ad.Var(np.eye(3)), term1), term2)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rotation by `angle` about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < _DEGENERATE_NORM:
        raise DegenerateInput("rotation axis is numerically zero")
    return axis_angle_to_matrix(axis / n * angle)
