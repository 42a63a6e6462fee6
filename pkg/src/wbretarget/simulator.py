"""Kinematic humanoid simulator.

A floating torso (planar position, yaw, height) driven by lower-body
commands (v_x, v_y, v_yaw, h) through a first-order-lag base model stands in
for a learned whole-body controller; arms track wrist goals with damped
least-squares IK. Environments expose privileged information (goal torso
height and base displacement from the episode-initial frame) from which
heuristic expert commands are generated over a 1-second horizon.

Conventions: velocity commands act in the current body frame; yaw is wrapped
to (-pi, pi]; commands are clipped at exactly one ingestion point
(`clip_command_array` / `heuristic_commands`), and `worker_step` rejects
out-of-range commands rather than silently fixing them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .episodes import Episode
from .geometry import Pose, quat_mul, wrap_angle, yaw_quat
from .kinematics import DualArm, IkConfig, clik_step_batch, fk_batch, stack_params

log = logging.getLogger(__name__)

# command clip ranges: v_x, v_y (m/s), v_yaw (rad/s), torso height h (m)
VX_RANGE = (-0.8, 1.2)
VY_RANGE = (-0.5, 0.5)
VYAW_RANGE = (-1.0, 1.0)
H_RANGE = (0.15, 1.25)
H_HARD_RANGE = (0.10, 1.30)   # mechanical bounds enforced by the worker

CMD_LO = np.array([VX_RANGE[0], VY_RANGE[0], VYAW_RANGE[0], H_RANGE[0]])
CMD_HI = np.array([VX_RANGE[1], VY_RANGE[1], VYAW_RANGE[1], H_RANGE[1]])

MANAGER_STATE_DIM = 15  # two wrist goal poses in the base frame + torso height


@dataclass(frozen=True)
class LowerBodyCommand:
    v_x: float
    v_y: float
    v_yaw: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.v_yaw, self.h])

    @classmethod
    def from_array(cls, a) -> "LowerBodyCommand":
        a = np.asarray(a, dtype=float).reshape(4)
        return cls(*a.tolist())

    def clipped(self) -> "LowerBodyCommand":
        return LowerBodyCommand.from_array(np.clip(self.as_array(), CMD_LO, CMD_HI))


def clip_command_array(c: np.ndarray) -> np.ndarray:
    """The single enforcement point for command ranges (batched)."""
    return np.clip(c, CMD_LO, CMD_HI)


def command_in_range(c: np.ndarray, atol=0.0) -> bool:
    c = np.asarray(c, dtype=float)
    return bool(np.all(c >= CMD_LO - atol) and np.all(c <= CMD_HI + atol))


@dataclass(frozen=True)
class BaseState:
    """Floating-base state: planar pose, torso height, realized rates."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    h: float = 0.75
    v_x: float = 0.0
    v_y: float = 0.0
    v_yaw: float = 0.0
    h_rate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw, self.h,
                         self.v_x, self.v_y, self.v_yaw, self.h_rate])

    @classmethod
    def from_array(cls, a) -> "BaseState":
        a = np.asarray(a, dtype=float).reshape(8)
        return cls(*a.tolist())

    def pose(self) -> Pose:
        """Torso frame pose in the world: origin (x, y, h), rotation yaw."""
        return Pose(np.array([self.x, self.y, self.h]), yaw_quat(self.yaw))


@dataclass(frozen=True)
class WorkerModel:
    tau_v: float = 0.2        # velocity lag time constant, s
    height_rate: float = 0.5  # max |dh/dt|, m/s
    noise_std: float = 0.02   # Gaussian command noise per velocity channel
    dt: float = 0.05          # control period, s (20 Hz)

    def __post_init__(self):
        if self.tau_v <= 0 or self.dt <= 0:
            raise ValueError("tau_v and dt must be > 0")
        if self.height_rate <= 0:
            raise ValueError("height_rate must be > 0")


def worker_step_arrays(states: np.ndarray, cmds: np.ndarray, model: WorkerModel,
                       rng=None) -> np.ndarray:
    """Advance N base states one tick. states (N, 8), cmds (N, 4) pre-clipped."""
    states = np.asarray(states, dtype=float)
    cmds = np.asarray(cmds, dtype=float)
    if not command_in_range(cmds, atol=1e-12):
        raise ValueError("worker_step requires pre-clipped commands")
    v_cmd = cmds[:, :3]
    if rng is not None and model.noise_std > 0:
        v_cmd = v_cmd + rng.normal(0.0, model.noise_std, size=v_cmd.shape)
    alpha = 1.0 - np.exp(-model.dt / model.tau_v)
    v_new = states[:, 4:7] + alpha * (v_cmd - states[:, 4:7])

    yaw = states[:, 2]
    c, s = np.cos(yaw), np.sin(yaw)
    out = states.copy()
    out[:, 0] = states[:, 0] + (c * v_new[:, 0] - s * v_new[:, 1]) * model.dt
    out[:, 1] = states[:, 1] + (s * v_new[:, 0] + c * v_new[:, 1]) * model.dt
    out[:, 2] = wrap_angle(yaw + v_new[:, 2] * model.dt)
    dh = np.clip(cmds[:, 3] - states[:, 3],
                 -model.height_rate * model.dt, model.height_rate * model.dt)
    h = np.clip(states[:, 3] + dh, H_HARD_RANGE[0], H_HARD_RANGE[1])
    out[:, 3] = h
    out[:, 4:7] = v_new
    out[:, 7] = (h - states[:, 3]) / model.dt
    return out


def worker_step(state: BaseState, cmd: LowerBodyCommand, model: WorkerModel,
                rng=None) -> BaseState:
    """Single-environment form of `worker_step_arrays`."""
    out = worker_step_arrays(state.as_array()[None], cmd.as_array()[None], model, rng)
    return BaseState.from_array(out[0])


# ---------------------------------------------------------------------------
# privileged information and heuristic expert
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrivilegedInfo:
    """Simulator-only quantities behind the heuristic expert.

    delta_p is the base displacement from the episode-initial position,
    expressed in the current base frame; delta_theta the yaw displacement;
    goal_height the per-step target torso height h*(t).
    """

    goal_height: float
    delta_p: np.ndarray     # (2,)
    delta_theta: float


def heuristic_commands(priv: PrivilegedInfo) -> LowerBodyCommand:
    """Expert command: undo the displacement over a 1 s horizon, track h*."""
    raw = np.array([-priv.delta_p[0], -priv.delta_p[1], -priv.delta_theta,
                    priv.goal_height])
    return LowerBodyCommand.from_array(clip_command_array(raw))


def heuristic_commands_arrays(delta_p: np.ndarray, delta_theta: np.ndarray,
                              goal_height: np.ndarray) -> np.ndarray:
    raw = np.concatenate(
        [-delta_p, -delta_theta[:, None], goal_height[:, None]], axis=1
    )
    return clip_command_array(raw)


def privileged_arrays(states: np.ndarray, init_xy: np.ndarray, init_yaw: np.ndarray):
    """(delta_p in current base frame, delta_theta) for a state batch."""
    dxy = states[:, 0:2] - init_xy
    yaw = states[:, 2]
    c, s = np.cos(yaw), np.sin(yaw)
    dp = np.stack([c * dxy[:, 0] + s * dxy[:, 1],
                   -s * dxy[:, 0] + c * dxy[:, 1]], axis=1)
    return dp, wrap_angle(yaw - init_yaw)


# ---------------------------------------------------------------------------
# manager state featurization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManagerState:
    """Wrist goals in the current base frame plus torso height."""

    left_goal: Pose
    right_goal: Pose
    h: float

    def features(self) -> np.ndarray:
        return np.concatenate([self.left_goal.flat(), self.right_goal.flat(), [self.h]])


def goals_to_base_frame(goals: np.ndarray, states: np.ndarray):
    """Express world wrist goals (N, 2, 7) in each env's base frame.

    Returns (pos (N, 2, 3), quat (N, 2, 4)); quats are sign-canonicalized.
    """
    yaw = states[:, 2]
    c, s = np.cos(yaw)[:, None], np.sin(yaw)[:, None]
    dx = goals[:, :, 0] - states[:, None, 0]
    dy = goals[:, :, 1] - states[:, None, 1]
    dz = goals[:, :, 2] - states[:, None, 3]
    pos = np.stack([c * dx + s * dy, -s * dx + c * dy, dz], axis=-1)
    inv_yaw = yaw_quat(-yaw)[:, None, :]
    quat = quat_mul(inv_yaw, goals[:, :, 3:7])
    quat = np.where(quat[..., :1] < 0, -quat, quat)
    return pos, quat


def manager_features(goals: np.ndarray, states: np.ndarray) -> np.ndarray:
    """(N, 15) feature matrix: [left pos+quat, right pos+quat, h]."""
    pos, quat = goals_to_base_frame(goals, states)
    flat = np.concatenate([pos, quat], axis=-1).reshape(states.shape[0], 14)
    return np.concatenate([flat, states[:, 3:4]], axis=1)


def make_manager_state(left_goal: Pose, right_goal: Pose, base: BaseState) -> ManagerState:
    goals = np.stack([left_goal.flat(), right_goal.flat()])[None]
    pos, quat = goals_to_base_frame(goals, base.as_array()[None])
    return ManagerState(
        left_goal=Pose(pos[0, 0], quat[0, 0]),
        right_goal=Pose(pos[0, 1], quat[0, 1]),
        h=base.h,
    )


def wrists_to_world(states: np.ndarray, pos_local: np.ndarray, quat_local: np.ndarray):
    """Torso-frame wrist poses (N, 2, ...) to world frame."""
    yaw = states[:, 2]
    c, s = np.cos(yaw)[:, None], np.sin(yaw)[:, None]
    px = c * pos_local[:, :, 0] - s * pos_local[:, :, 1] + states[:, None, 0]
    py = s * pos_local[:, :, 0] + c * pos_local[:, :, 1] + states[:, None, 1]
    pz = pos_local[:, :, 2] + states[:, None, 3]
    pos = np.stack([px, py, pz], axis=-1)
    quat = quat_mul(yaw_quat(yaw)[:, None, :], quat_local)
    quat = np.where(quat[..., :1] < 0, -quat, quat)
    return pos, quat


# ---------------------------------------------------------------------------
# parallel environments
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    worker: WorkerModel
    ik: IkConfig
    ik_iters_per_tick: int = 2
    start_height: float = 0.75


def default_sim_config() -> SimConfig:
    return SimConfig(worker=WorkerModel(), ik=IkConfig(step_scale=1.0, restarts=0))


@dataclass
class RolloutBatch:
    """Env-major record of a rollout: arrays indexed (env, step, ...)."""

    states: np.ndarray     # (N, T, 15) manager features s_t
    targets: np.ndarray    # (N, T, 4) heuristic expert commands a*_t
    commands: np.ndarray   # (N, T, 4) commands actually executed
    executed: np.ndarray   # (N, T, 2, 7) realized wrist world poses
    goals: np.ndarray      # (N, T, 2, 7) goal wrist world poses
    resets: int = 0

    def pairs(self):
        """Flattened (s_t, a*_t) pairs, env-major, step-minor."""
        n, t, d = self.states.shape
        return self.states.reshape(n * t, d), self.targets.reshape(n * t, 4)


class EnvBatch:
    """N parallel goal-tracking environments over a pool of augmented episodes.

    Each env is bound to an (episode, start offset); on exhaustion it wraps
    to a freshly sampled segment (logged) so rollout batches stay
    rectangular. All stepping is vectorized across envs; given identical
    seeds the produced batches are bit-identical.
    """

    def __init__(self, episodes: list[Episode], n_envs: int, arms: DualArm,
                 sim: SimConfig, seed: int):
        if not episodes:
            raise ValueError("need at least one episode")
        self.episodes = list(episodes)
        goal_heights = [ep.goal_heights() for ep in self.episodes]
        if any(g is None for g in goal_heights):
            bad = [ep.episode_id for ep, g in zip(self.episodes, goal_heights) if g is None]
            raise ValueError(
                f"episodes without per-step goal heights (augment first): {bad[:3]}"
            )
        self.n = int(n_envs)
        self.arms = arms
        self.sim = sim
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE17)))

        # flat goal storage: row index = episode offset + step
        self.goal_flat = np.concatenate([ep.wrist_flat() for ep in self.episodes])
        self.hstar_flat = np.concatenate(goal_heights)
        lengths = np.array([len(ep) for ep in self.episodes])
        self.ep_offset = np.concatenate([[0], np.cumsum(lengths)])[:-1]
        self.ep_length = lengths

        self.params = stack_params([arms.left, arms.right], repeat=self.n)
        self.home = np.concatenate(
            [np.repeat(arms.home_left[None], self.n, axis=0),
             np.repeat(arms.home_right[None], self.n, axis=0)]
        )

        self.states = np.zeros((self.n, 8))
        self.q = self.home.copy()
        self.ep_idx = np.zeros(self.n, dtype=int)
        self.ptr = np.zeros(self.n, dtype=int)
        self.end = np.zeros(self.n, dtype=int)
        self.init_xy = np.zeros((self.n, 2))
        self.init_yaw = np.zeros(self.n)
        self.reset_count = 0
        for i in range(self.n):
            self._reset_env(i)

    def _reset_env(self, i: int):
        k = int(self.rng.integers(len(self.episodes)))
        length = int(self.ep_length[k])
        max_start = max(0, length - 2)
        start = int(self.rng.integers(max_start + 1))
        self.ep_idx[i] = k
        self.ptr[i] = self.ep_offset[k] + start
        self.end[i] = self.ep_offset[k] + length
        self.states[i] = 0.0
        self.states[i, 3] = self.sim.start_height
        self.q[i] = self.home[i]
        self.q[self.n + i] = self.home[self.n + i]
        self.init_xy[i] = self.states[i, 0:2]
        self.init_yaw[i] = self.states[i, 2]

    def rollout(self, policy, t_steps: int, rng=None) -> RolloutBatch:
        """Run T steps under `policy`; record (s_t, a*_t) plus executed poses."""
        n, T = self.n, int(t_steps)
        out_s = np.empty((n, T, MANAGER_STATE_DIM))
        out_t = np.empty((n, T, 4))
        out_c = np.empty((n, T, 4))
        out_e = np.empty((n, T, 2, 7))
        out_g = np.empty((n, T, 2, 7))
        resets_before = self.reset_count

        for t in range(T):
            goals = self.goal_flat[self.ptr]           # (N, 2, 7)
            hstar = self.hstar_flat[self.ptr]
            feats = manager_features(goals, self.states)
            dp, dth = privileged_arrays(self.states, self.init_xy, self.init_yaw)
            a_star = heuristic_commands_arrays(dp, dth, hstar)

            cmds = clip_command_array(np.asarray(policy(feats), dtype=float))
            self.states = worker_step_arrays(self.states, cmds, self.sim.worker, rng)

            gpos, gquat = goals_to_base_frame(goals, self.states)
            tp = np.concatenate([gpos[:, 0], gpos[:, 1]])
            tq = np.concatenate([gquat[:, 0], gquat[:, 1]])
            self.q, _, _ = clik_step_batch(
                self.params, tp, tq, self.q, self.sim.ik, self.sim.ik_iters_per_tick
            )
            wpos, wquat = fk_batch(self.params, self.q)
            wpos = np.stack([wpos[: n], wpos[n:]], axis=1)
            wquat = np.stack([wquat[: n], wquat[n:]], axis=1)
            epos, equat = wrists_to_world(self.states, wpos, wquat)

            out_s[:, t] = feats
            out_t[:, t] = a_star
            out_c[:, t] = cmds
            out_e[:, t] = np.concatenate([epos, equat], axis=-1)
            out_g[:, t] = goals

            self.ptr += 1
            for i in np.nonzero(self.ptr >= self.end)[0]:
                self.reset_count += 1
                self._reset_env(int(i))
        if self.reset_count > resets_before:
            log.debug("rollout wrapped %d exhausted envs", self.reset_count - resets_before)
        return RolloutBatch(states=out_s, targets=out_t, commands=out_c,
                            executed=out_e, goals=out_g,
                            resets=self.reset_count - resets_before)


def replay_episodes(episodes: list[Episode], policy, arms: DualArm, sim: SimConfig,
                    rng=None):
    """Replay full episodes from reset under `policy` (no wrapping).

    Returns a list of per-episode dicts with executed/goal wrist streams,
    commands, arm joints, and base states; inputs of equal length are
    processed as one vectorized batch. Used for validation tracking metrics
    and offline retargeting.
    """
    order = np.argsort([len(ep) for ep in episodes], kind="stable")
    results: list[dict | None] = [None] * len(episodes)
    groups: dict[int, list[int]] = {}
    for i in order:
        groups.setdefault(len(episodes[int(i)]), []).append(int(i))

    for length, idxs in sorted(groups.items()):
        batch = [episodes[i] for i in idxs]
        n = len(batch)
        goals_all = np.stack([ep.wrist_flat() for ep in batch])      # (n, T, 2, 7)
        hstar_all = np.stack([ep.goal_heights() if ep.goal_heights() is not None
                              else np.full(length, np.nan) for ep in batch])
        params = stack_params([arms.left, arms.right], repeat=n)
        q = np.concatenate([np.repeat(arms.home_left[None], n, axis=0),
                            np.repeat(arms.home_right[None], n, axis=0)])
        states = np.zeros((n, 8))
        states[:, 3] = sim.start_height

        rec_e = np.empty((n, length, 2, 7))
        rec_c = np.empty((n, length, 4))
        rec_q = np.empty((n, length, 2, arms.left.dof))
        rec_b = np.empty((n, length, 8))
        for t in range(length):
            goals = goals_all[:, t]
            feats = manager_features(goals, states)
            cmds = clip_command_array(np.asarray(policy(feats), dtype=float))
            states = worker_step_arrays(states, cmds, sim.worker, rng)
            gpos, gquat = goals_to_base_frame(goals, states)
            tp = np.concatenate([gpos[:, 0], gpos[:, 1]])
            tq = np.concatenate([gquat[:, 0], gquat[:, 1]])
            q, _, _ = clik_step_batch(params, tp, tq, q, sim.ik, sim.ik_iters_per_tick)
            wpos, wquat = fk_batch(params, q)
            wpos = np.stack([wpos[:n], wpos[n:]], axis=1)
            wquat = np.stack([wquat[:n], wquat[n:]], axis=1)
            epos, equat = wrists_to_world(states, wpos, wquat)
            rec_e[:, t] = np.concatenate([epos, equat], axis=-1)
            rec_c[:, t] = cmds
            rec_q[:, t, 0] = q[:n]
            rec_q[:, t, 1] = q[n:]
            rec_b[:, t] = states

        for j, i in enumerate(idxs):
            results[i] = {
                "episode": episodes[i],
                "executed": rec_e[j],
                "goals": goals_all[j],
                "commands": rec_c[j],
                "arm_joints": rec_q[j],
                "base_states": rec_b[j],
                "goal_heights": hstar_all[j],
            }
    return results
