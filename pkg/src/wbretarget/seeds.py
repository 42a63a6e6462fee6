"""Synthetic dual-arm seed episodes.

Stands in for a real upper-limb demonstration corpus: smooth wrist goal
trajectories inside a workspace box, three motion families (reach, transfer,
circular wipe), smooth gripper profiles, and opaque vision reference ids.
Generation is fully deterministic given the spec and seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .episodes import Episode, Step
from .geometry import Pose, quat_from_axis_angle, quat_mul

FAMILIES = ("reach", "transfer", "wipe")

# natural wrist orientations at the default arm home posture, left and right
HOME_WRIST_QUAT_LEFT = (0.05170775, 0.08816257, -0.99470695, -0.0105711)
HOME_WRIST_QUAT_RIGHT = (0.05170775, -0.08816257, -0.99470695, 0.0105711)

_LANGUAGE = {
    "reach": ("reach to the shelf and grab the box", "reach out and take the cup"),
    "transfer": ("move the bottle to the tray", "carry the bowl across the table"),
    "wipe": ("wipe the counter in circles", "polish the panel surface"),
}


@dataclass(frozen=True)
class SeedSpec:
    count: int = 50
    duration_s: float = 5.0
    frequency_hz: float = 20.0
    box_min: tuple[float, float, float] = (0.20, -0.45, 0.55)
    box_max: tuple[float, float, float] = (0.70, 0.45, 0.95)
    v_max: float = 0.8                      # per-hand speed bound, m/s
    families: tuple[str, ...] = FAMILIES
    gripper_fraction: float = 0.85          # remainder tagged as dexterous-hand source
    orient_wobble_rad: float = 0.25         # max smooth orientation deviation from home

    def __post_init__(self):
        lo, hi = np.asarray(self.box_min), np.asarray(self.box_max)
        if not np.all(lo < hi):
            raise ValueError("workspace box must satisfy min < max per axis")
        if self.count < 1 or self.duration_s <= 0 or self.frequency_hz <= 0:
            raise ValueError("count, duration and frequency must be positive")
        if self.v_max <= 0:
            raise ValueError("v_max must be > 0")
        bad = [f for f in self.families if f not in FAMILIES]
        if bad:
            raise ValueError(f"unknown motion families: {bad}")


def _minjerk(u):
    """Minimum-jerk time scaling on [0, 1]."""
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _segments(waypoints, n_steps):
    """Min-jerk position profile through waypoints, durations ~ distance."""
    wp = np.asarray(waypoints, dtype=float)
    dists = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    dists = np.maximum(dists, 1e-6)
    bounds = np.concatenate([[0.0], np.cumsum(dists / dists.sum())])
    u = np.linspace(0.0, 1.0, n_steps)
    out = np.empty((n_steps, wp.shape[1]))
    for k in range(len(wp) - 1):
        mask = (u >= bounds[k]) & (u <= bounds[k + 1] + 1e-12)
        local = (u[mask] - bounds[k]) / (bounds[k + 1] - bounds[k])
        out[mask] = wp[k] + _minjerk(local)[:, None] * (wp[k + 1] - wp[k])
    return out


def _hand_box(spec: SeedSpec, hand: str):
    """Left hand works the upper-y half of the box, right hand the lower."""
    lo = np.array(spec.box_min, dtype=float)
    hi = np.array(spec.box_max, dtype=float)
    mid = 0.5 * (lo[1] + hi[1])
    if hand == "left":
        lo = lo.copy()
        lo[1] = mid
    else:
        hi = hi.copy()
        hi[1] = mid
    return lo, hi


def _positions(family, spec, rng, hand, n_steps):
    lo, hi = _hand_box(spec, hand)
    if family == "reach":
        wp = rng.uniform(lo, hi, size=(2, 3))
    elif family == "transfer":
        wp = rng.uniform(lo, hi, size=(3, 3))
    else:  # wipe: circle in a horizontal plane, 1.5 turns
        center = rng.uniform(lo + 0.12, hi - 0.12)
        center = np.clip(center, lo, hi)
        radius = rng.uniform(0.06, 0.12)
        theta0 = rng.uniform(0, 2 * np.pi)
        u = np.linspace(0.0, 1.0, n_steps)
        theta = theta0 + 3.0 * np.pi * _minjerk(u)
        pts = center[None, :] + radius * np.stack(
            [np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1
        )
        return pts
    return _segments(wp, n_steps)


def _smooth_orientations(base_quat, spec, rng, n_steps):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    amp = rng.uniform(0.2, 1.0) * spec.orient_wobble_rad
    phase = rng.uniform(0, 2 * np.pi)
    u = np.linspace(0.0, 1.0, n_steps)
    angles = amp * np.sin(2 * np.pi * u + phase) * _minjerk(np.minimum(1.0, 4 * u))
    return [quat_mul(base_quat, quat_from_axis_angle(axis, a)) for a in angles]


def _grip_profile(rng, n_steps):
    """Open -> close around a grasp instant -> reopen near the end."""
    u = np.linspace(0.0, 1.0, n_steps)
    t_close = rng.uniform(0.2, 0.4)
    t_open = rng.uniform(0.7, 0.9)
    width = 0.08
    closing = _minjerk(np.clip((u - t_close) / width, 0.0, 1.0))
    opening = _minjerk(np.clip((u - t_open) / width, 0.0, 1.0))
    return np.clip(1.0 - closing + opening, 0.0, 1.0)


def _enforce_speed_and_box(pts, spec, dt):
    """Clamp per-step displacement to v_max*dt, then clamp into the box.

    Both projections are 1-Lipschitz, so the speed bound survives the box
    clamp and containment is exact.
    """
    limit = spec.v_max * dt
    out = pts.copy()
    for i in range(1, out.shape[0]):
        d = out[i] - out[i - 1]
        n = np.linalg.norm(d)
        if n > limit:
            out[i] = out[i - 1] + d * (limit / n)
    return np.clip(out, spec.box_min, spec.box_max)


def generate_synthetic_seeds(spec: SeedSpec, rng_seed: int) -> list[Episode]:
    rng = np.random.default_rng(rng_seed)
    n_steps = max(2, int(round(spec.duration_s * spec.frequency_hz)))
    dt = 1.0 / spec.frequency_hz
    times = np.arange(n_steps) * dt

    episodes = []
    for i in range(spec.count):
        family = spec.families[int(rng.integers(len(spec.families)))]
        eid = f"seed-{i:04d}"
        lang_pool = _LANGUAGE[family]
        language = lang_pool[int(rng.integers(len(lang_pool)))]
        end_effector = "gripper" if rng.random() < spec.gripper_fraction else "dex_hand"

        hands = {}
        for hand, base in (("left", HOME_WRIST_QUAT_LEFT), ("right", HOME_WRIST_QUAT_RIGHT)):
            pts = _positions(family, spec, rng, hand, n_steps)
            pts = _enforce_speed_and_box(pts, spec, dt)
            quats = _smooth_orientations(np.array(base), spec, rng, n_steps)
            grips = _grip_profile(rng, n_steps)
            hands[hand] = (pts, quats, grips)

        steps = tuple(
            Step(
                t=float(times[k]),
                left_wrist=Pose(hands["left"][0][k], hands["left"][1][k]),
                right_wrist=Pose(hands["right"][0][k], hands["right"][1][k]),
                left_grip=float(hands["left"][2][k]),
                right_grip=float(hands["right"][2][k]),
            )
            for k in range(n_steps)
        )
        episodes.append(
            Episode(
                episode_id=eid,
                task_id=family,
                language=language,
                frequency_hz=spec.frequency_hz,
                steps=steps,
                source="synthetic-dualarm-v1",
                vision_refs=(
                    f"synthetic://{eid}/head",
                    f"synthetic://{eid}/left_wrist",
                    f"synthetic://{eid}/right_wrist",
                ),
                meta={"family": family, "end_effector": end_effector},
            )
        )
    return episodes
