"""Kinematic chains, forward kinematics, and damped-least-squares CLIK.

A chain is an ordered list of revolute joints. Each joint contributes a fixed
parent-frame offset followed by a rotation of q_i about its (unit) axis; a
fixed tool transform follows the last joint:

    T(q) = offset_1 * R(axis_1, q_1) * ... * offset_n * R(axis_n, q_n) * tool

All heavy math is vectorized over a batch axis so that many configurations
(parallel environments, IK restarts, both arms at once) are solved with the
same number of numpy calls as a single one.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np
import yaml

from .geometry import (
    Pose,
    quat_from_axis_angle,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_to_rotvec,
    quat_conj,
)

CHAIN_SCHEMA = "chain-config/v1"


@dataclass(frozen=True)
class Joint:
    name: str
    axis: np.ndarray        # unit rotation axis in the parent frame
    offset: Pose            # fixed transform from parent joint frame
    lo: float
    hi: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"joint {self.name}: axis must be unit norm, got |axis|={n:.6g}")
        object.__setattr__(self, "axis", axis / n)
        if not self.lo < self.hi:
            raise ValueError(f"joint {self.name}: limits must satisfy lo < hi")


@dataclass(frozen=True)
class KinematicChain:
    name: str
    joints: tuple[Joint, ...]
    tool: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValueError("chain needs at least one joint")
        object.__setattr__(self, "joints", tuple(self.joints))

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lo for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.hi for j in self.joints])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def params(self) -> "ChainParams":
        return ChainParams(
            off_pos=np.stack([j.offset.position for j in self.joints]),
            off_quat=np.stack([j.offset.orientation for j in self.joints]),
            axes=np.stack([j.axis for j in self.joints]),
            lower=self.lower,
            upper=self.upper,
            tool_pos=self.tool.position,
            tool_quat=self.tool.orientation,
        )


@dataclass(frozen=True)
class ChainParams:
    """Chain constants as stacked arrays.

    Every array may carry leading batch axes (broadcast against the joint
    batch), which is how a heterogeneous batch such as "left arm rows then
    right arm rows" is expressed: see `stack_params`.
    """

    off_pos: np.ndarray    # (..., n, 3)
    off_quat: np.ndarray   # (..., n, 4)
    axes: np.ndarray       # (..., n, 3)
    lower: np.ndarray      # (..., n)
    upper: np.ndarray      # (..., n)
    tool_pos: np.ndarray   # (..., 3)
    tool_quat: np.ndarray  # (..., 4)

    @property
    def dof(self) -> int:
        return self.off_pos.shape[-2]

    def clamp(self, q):
        return np.clip(q, self.lower, self.upper)


def stack_params(chains: list[KinematicChain], repeat: int = 1) -> ChainParams:
    """Row-stack several equal-dof chains (each repeated `repeat` times).

    The result drives one batched FK/IK call covering all rows; row order is
    chain-major: [c0 x repeat, c1 x repeat, ...].
    """
    parts = [c.params() for c in chains]
    if len({p.dof for p in parts}) != 1:
        raise ValueError("stacked chains must share dof")

    def cat(attr):
        return np.concatenate([np.repeat(getattr(p, attr)[None], repeat, axis=0) for p in parts])

    return ChainParams(
        off_pos=cat("off_pos"), off_quat=cat("off_quat"), axes=cat("axes"),
        lower=cat("lower"), upper=cat("upper"),
        tool_pos=cat("tool_pos"), tool_quat=cat("tool_quat"),
    )


def fk_batch(params: ChainParams, q: np.ndarray):
    """Batched forward kinematics.

    q: (..., n) joint values. Returns (pos (..., 3), quat (..., 4)).
    """
    q = np.asarray(q, dtype=float)
    n = params.dof
    if q.shape[-1] != n:
        raise ValueError(f"expected {n} joint values, got {q.shape[-1]}")
    batch = np.broadcast_shapes(q.shape[:-1], params.off_pos.shape[:-2])
    pos = np.zeros(batch + (3,))
    quat = np.zeros(batch + (4,))
    quat[..., 0] = 1.0
    for i in range(n):
        pos = pos + quat_rotate(quat, params.off_pos[..., i, :])
        quat = quat_mul(quat, params.off_quat[..., i, :])
        quat = quat_mul(quat, quat_from_axis_angle(params.axes[..., i, :], q[..., i]))
    pos = pos + quat_rotate(quat, params.tool_pos)
    quat = quat_normalize(quat_mul(quat, params.tool_quat))
    return pos, quat


def fk_with_jacobian(params: ChainParams, q: np.ndarray):
    """FK plus the geometric Jacobian (world-frame twist per joint).

    Returns (pos, quat, J) with J shaped (..., 6, n); rows 0:3 are linear,
    3:6 angular.
    """
    q = np.asarray(q, dtype=float)
    n = params.dof
    batch = np.broadcast_shapes(q.shape[:-1], params.off_pos.shape[:-2])
    pos = np.zeros(batch + (3,))
    quat = np.zeros(batch + (4,))
    quat[..., 0] = 1.0
    origins = np.zeros(batch + (n, 3))
    axes_w = np.zeros(batch + (n, 3))
    for i in range(n):
        pos = pos + quat_rotate(quat, params.off_pos[..., i, :])
        quat = quat_mul(quat, params.off_quat[..., i, :])
        origins[..., i, :] = pos
        axes_w[..., i, :] = quat_rotate(quat, params.axes[..., i, :])
        quat = quat_mul(quat, quat_from_axis_angle(params.axes[..., i, :], q[..., i]))
    pos = pos + quat_rotate(quat, params.tool_pos)
    quat = quat_normalize(quat_mul(quat, params.tool_quat))

    jac = np.empty(batch + (6, n))
    lever = pos[..., None, :] - origins           # (..., n, 3)
    jac[..., 0:3, :] = np.swapaxes(np.cross(axes_w, lever), -1, -2)
    jac[..., 3:6, :] = np.swapaxes(axes_w, -1, -2)
    return pos, quat, jac


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """End-effector pose in the chain base frame."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != chain.dof:
        raise ValueError(f"chain {chain.name} has {chain.dof} dof, got {q.shape[0]} values")
    pos, quat = fk_batch(chain.params(), q)
    return Pose(pos, quat)


@dataclass(frozen=True)
class IkConfig:
    damping: float = 1e-3       # DLS lambda
    step_scale: float = 0.5
    pos_tol: float = 1e-4       # m
    rot_tol: float = 1e-3       # rad
    rot_weight: float = 1.0     # weight of rotation rows vs position rows
    max_iters: int = 200
    pos_err_clamp: float = 0.1  # per-iteration error magnitude bounds
    rot_err_clamp: float = 0.5
    warm_iters: int = 30        # position-only iterations before full pose
    restarts: int = 4           # seeded random restarts for unconverged rows
    restart_seed: int = 0x1C21


@dataclass(frozen=True)
class IkResult:
    q: np.ndarray
    pos_err: float
    rot_err: float
    converged: bool
    iters: int


def _pose_error_batch(pos, quat, tpos, tquat):
    dp = tpos - pos
    dq = quat_mul(tquat, quat_conj(quat))
    rv = quat_to_rotvec(dq)
    return dp, rv


def _dls_update(params, q, tpos, tquat, cfg, rot_on, eye6):
    pos, quat, jac = fk_with_jacobian(params, q)
    dp, rv = _pose_error_batch(pos, quat, tpos, tquat)
    pe = np.linalg.norm(dp, axis=-1)
    re = np.linalg.norm(rv, axis=-1)
    ps = np.minimum(1.0, cfg.pos_err_clamp / np.maximum(pe, 1e-12))
    rs = np.minimum(1.0, cfg.rot_err_clamp / np.maximum(re, 1e-12))
    w = cfg.rot_weight if rot_on else 0.0
    err = np.concatenate([dp * ps[..., None], w * rv * rs[..., None]], axis=-1)
    jw = jac.copy()
    jw[..., 3:6, :] *= w
    # slight extra damping while the rotation rows are zeroed
    lam2 = cfg.damping * cfg.damping + (0.0 if rot_on else 1e-6)
    jjt = jw @ np.swapaxes(jw, -1, -2) + lam2 * eye6
    y = np.linalg.solve(jjt, err[..., None])
    dq = cfg.step_scale * (np.swapaxes(jw, -1, -2) @ y)[..., 0]
    return dq, pe, re


def clik_step_batch(params: ChainParams, tpos, tquat, q, cfg: IkConfig, iters: int):
    """Run a fixed number of damped-least-squares updates on a batch.

    This is the tracking form used once per control tick (warm-started from
    the previous tick's solution); `clik_solve_batch` adds the convergence
    loop and restarts. Returns (q, pos_err, rot_err).
    """
    q = params.clamp(np.asarray(q, dtype=float))
    eye6 = np.eye(6)
    for _ in range(iters):
        dq, _, _ = _dls_update(params, q, tpos, tquat, cfg, True, eye6)
        q = params.clamp(q + dq)
    pos, quat = fk_batch(params, q)
    dp, rv = _pose_error_batch(pos, quat, tpos, tquat)
    return q, np.linalg.norm(dp, axis=-1), np.linalg.norm(rv, axis=-1)


def _clik_single_start(params, tpos, tquat, q0, cfg):
    q = params.clamp(np.asarray(q0, dtype=float))
    eye6 = np.eye(6)
    pos_err = rot_err = None
    iters = 0
    for it in range(cfg.max_iters + 1):
        dq, pos_err, rot_err = _dls_update(
            params, q, tpos, tquat, cfg, it >= cfg.warm_iters, eye6
        )
        done = (pos_err <= cfg.pos_tol) & (rot_err <= cfg.rot_tol)
        if bool(np.all(done)) or it == cfg.max_iters:
            iters = it
            break
        # converged rows stay put so reported residuals match the returned q
        q = params.clamp(q + np.where(done[..., None], 0.0, dq))
    converged = (pos_err <= cfg.pos_tol) & (rot_err <= cfg.rot_tol)
    return q, pos_err, rot_err, converged, iters


def clik_solve_batch(params: ChainParams, tpos, tquat, q0, cfg: IkConfig | None = None):
    """Damped-least-squares IK to convergence, batched.

    Unconverged rows are retried from cfg.restarts seeded random in-limit
    configurations (deterministic). Targets that remain unreachable come back
    with converged=False and the best-effort clamped q; no exception.

    Returns (q, pos_err, rot_err, converged, iters) where iters counts the
    update sweeps of the first start.
    """
    cfg = cfg or IkConfig()
    tpos = np.asarray(tpos, dtype=float)
    tquat = np.asarray(tquat, dtype=float)
    q, pos_err, rot_err, converged, iters = _clik_single_start(params, tpos, tquat, q0, cfg)
    if cfg.restarts > 0 and not bool(np.all(converged)):
        rng = np.random.default_rng(cfg.restart_seed)
        lower = np.broadcast_to(params.lower, q.shape)
        upper = np.broadcast_to(params.upper, q.shape)
        for _ in range(cfg.restarts):
            bad = ~converged
            if not bad.any():
                break
            qr = rng.uniform(lower[bad], upper[bad])
            sub = _subset_params(params, bad)
            q2, pe2, re2, conv2, _ = _clik_single_start(sub, tpos[bad], tquat[bad], qr, cfg)
            better = (pe2 + re2) < (pos_err[bad] + rot_err[bad])
            take = conv2 | better
            idx = np.where(bad)[0][take]
            q[idx] = q2[take]
            pos_err[idx] = pe2[take]
            rot_err[idx] = re2[take]
            converged[idx] = conv2[take]
    return q, pos_err, rot_err, converged, iters


def _subset_params(params: ChainParams, mask) -> ChainParams:
    """Row-subset per-row params; broadcast (shared) params pass through."""
    def pick(a, core_ndim):
        a = np.asarray(a)
        return a[mask] if a.ndim > core_ndim else a

    return ChainParams(
        off_pos=pick(params.off_pos, 2), off_quat=pick(params.off_quat, 2),
        axes=pick(params.axes, 2), lower=pick(params.lower, 1),
        upper=pick(params.upper, 1), tool_pos=pick(params.tool_pos, 1),
        tool_quat=pick(params.tool_quat, 1),
    )


def clik_solve(chain: KinematicChain, target: Pose, q0, cfg: IkConfig | None = None) -> IkResult:
    """Solve chain IK for a single target pose."""
    params = chain.params()
    q0 = np.asarray(q0, dtype=float).reshape(1, chain.dof)
    q, pe, re, conv, iters = clik_solve_batch(
        params, target.position[None], target.orientation[None], q0, cfg
    )
    return IkResult(q[0], float(pe[0]), float(re[0]), bool(conv[0]), iters)


# ---------------------------------------------------------------------------
# chain config files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualArm:
    left: KinematicChain
    right: KinematicChain
    home_left: np.ndarray
    home_right: np.ndarray


def _pose_from_cfg(node) -> Pose:
    if node is None:
        return Pose.identity()
    pos = np.asarray(node.get("pos", [0.0, 0.0, 0.0]), dtype=float)
    rpy = np.asarray(node.get("rpy", [0.0, 0.0, 0.0]), dtype=float)
    qx = quat_from_axis_angle(np.array([1.0, 0, 0]), rpy[0])
    qy = quat_from_axis_angle(np.array([0, 1.0, 0]), rpy[1])
    qz = quat_from_axis_angle(np.array([0, 0, 1.0]), rpy[2])
    return Pose(pos, quat_mul(qz, quat_mul(qy, qx)))


def _chain_from_cfg(name: str, node) -> tuple[KinematicChain, np.ndarray]:
    joints = []
    for jn in node["joints"]:
        joints.append(
            Joint(
                name=jn["name"],
                axis=np.asarray(jn["axis"], dtype=float),
                offset=_pose_from_cfg(jn.get("offset")),
                lo=float(jn["limits"][0]),
                hi=float(jn["limits"][1]),
            )
        )
    chain = KinematicChain(name=name, joints=tuple(joints), tool=_pose_from_cfg(node.get("tool")))
    home = np.asarray(node.get("home", [0.0] * chain.dof), dtype=float)
    if home.shape[0] != chain.dof:
        raise ValueError(f"chain {name}: home length {home.shape[0]} != dof {chain.dof}")
    return chain, chain.clamp(home)


def load_dual_arm(path=None) -> DualArm:
    """Load the dual-arm model from a YAML chain config.

    With no path, the packaged default humanoid arms are used.
    """
    if path is None:
        text = importlib.resources.files("wbretarget.data").joinpath("dual_arm.yaml").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    cfg = yaml.safe_load(text)
    if cfg.get("schema") != CHAIN_SCHEMA:
        raise ValueError(f"unsupported chain config schema: {cfg.get('schema')!r}")
    left, home_l = _chain_from_cfg("left_arm", cfg["arms"]["left"])
    right, home_r = _chain_from_cfg("right_arm", cfg["arms"]["right"])
    return DualArm(left=left, right=right, home_left=home_l, home_right=home_r)
