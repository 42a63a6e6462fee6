"""Rigid-body poses and quaternion helpers.

Conventions used throughout the package:

* quaternions are (w, x, y, z), unit norm, canonicalized so w >= 0;
* positions are meters in a right-handed frame (x forward, y left, z up);
* all quaternion helpers broadcast over leading batch axes, so the same
  code path serves single poses and (B, ...) stacks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Rotations with |angle| below this are treated with the small-angle series.
_SMALL_ANGLE = 1e-8


def quat_normalize(q):
    """Normalize to unit length and flip sign so the scalar part is >= 0."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ValueError("degenerate quaternion (norm ~ 0)")
    q = q / norm
    flip = q[..., :1] < 0.0
    return np.where(flip, -q, q)


def quat_mul(a, b):
    """Hamilton product a*b, broadcasting over batch axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def quat_rotate(q, v):
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    # v + 2 w (u x v) + 2 u x (u x v)
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_axis_angle(axis, angle):
    """Unit quaternion for a rotation of `angle` rad about unit `axis`."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    w = np.cos(half)
    xyz = axis * np.sin(half)[..., None]
    return np.concatenate([w[..., None], xyz], axis=-1)


def quat_to_rotvec(q):
    """Axis-angle vector of q; magnitude in [0, pi] for canonical input."""
    q = np.asarray(q, dtype=float)
    w = q[..., 0]
    vec = q[..., 1:]
    s = np.linalg.norm(vec, axis=-1)
    angle = 2.0 * np.arctan2(s, np.abs(w))
    # angle/sin(angle/2), with the series limit 2/w near identity
    safe = np.where(s > _SMALL_ANGLE, s, 1.0)
    scale = np.where(s > _SMALL_ANGLE, angle / safe, 2.0 / np.maximum(np.abs(w), 1e-12))
    sign = np.where(w < 0.0, -1.0, 1.0)
    return vec * (scale * sign)[..., None]


def quat_angle(a, b=None):
    """Geodesic angle of a, or between a and b, in [0, pi]."""
    a = np.asarray(a, dtype=float)
    if b is not None:
        a = quat_mul(a, quat_conj(b))
    s = np.linalg.norm(a[..., 1:], axis=-1)
    return 2.0 * np.arctan2(s, np.abs(a[..., 0]))


def quat_slerp(qa, qb, u):
    """Spherical interpolation from qa (u=0) to qb (u=1), shortest arc."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-10:
        return quat_normalize(qa + u * (qb - qa))
    theta = np.arccos(min(dot, 1.0))
    s = np.sin(theta)
    return quat_normalize(np.sin((1.0 - u) * theta) / s * qa + np.sin(u * theta) / s * qb)


def yaw_quat(yaw):
    """Quaternion for a rotation of `yaw` rad about world z."""
    yaw = np.asarray(yaw, dtype=float)
    zeros = np.zeros_like(yaw)
    return np.stack([np.cos(0.5 * yaw), zeros, zeros, np.sin(0.5 * yaw)], axis=-1)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    wrapped = np.remainder(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


@dataclass(frozen=True, eq=False)
class Pose:
    """6D rigid transform: position (m) plus unit quaternion (w, x, y, z).

    Instances are immutable by convention; the arrays they hold must not be
    written to after construction.
    """

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("pose position must be finite")
        quat = quat_normalize(np.asarray(self.orientation, dtype=float).reshape(4))
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_flat(cls, flat) -> "Pose":
        flat = np.asarray(flat, dtype=float).reshape(7)
        return cls(flat[:3], flat[3:])

    def flat(self) -> np.ndarray:
        """[x, y, z, qw, qx, qy, qz]"""
        return np.concatenate([self.position, self.orientation])

    def __repr__(self):  # compact, round-trippable enough for logs
        p = ", ".join(f"{v:.6g}" for v in self.position)
        q = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Pose(({p}), ({q}))"


def compose(a: Pose, b: Pose) -> Pose:
    """Chain transforms: the result maps b's frame through a."""
    return Pose(a.position + quat_rotate(a.orientation, b.position),
                quat_mul(a.orientation, b.orientation))


def inverse(p: Pose) -> Pose:
    qc = quat_conj(p.orientation)
    return Pose(-quat_rotate(qc, p.position), qc)


def transform_point(p: Pose, v):
    return p.position + quat_rotate(p.orientation, np.asarray(v, dtype=float))


def pose_error(current: Pose, target: Pose) -> tuple[float, float]:
    """(Euclidean position error m, geodesic rotation error rad in [0, pi])."""
    pos_err = float(np.linalg.norm(current.position - target.position))
    rot_err = float(quat_angle(current.orientation, target.orientation))
    return pos_err, rot_err


def pose_slerp(a: Pose, b: Pose, u: float) -> Pose:
    """Linear position / slerp orientation blend, u in [0, 1]."""
    return Pose(a.position + u * (b.position - a.position),
                quat_slerp(a.orientation, b.orientation, u))
