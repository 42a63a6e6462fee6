"""Height augmentation of seed episodes.

Each variant draws a sparse random height-offset profile, smooths it with
PCHIP, shifts both wrists' z goals by the same smooth offset (torso height
is one scalar, so differential hand heights stay as authored), and records
the per-step goal torso height h*(t) as the wrist-z midline minus a fixed
wrist-to-torso offset. Variant 0 is always the identity profile.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from .episodes import Episode
from .pchip import pchip_eval, pchip_fit


@dataclass(frozen=True)
class HeightAugmentSpec:
    h_range: tuple[float, float] = (0.15, 1.25)
    variants: int = 4                 # per episode, including the identity
    profile_knots: int = 4
    offset_limit: float = 0.35        # knot values drawn uniform in +-limit
    wrist_torso_offset: float = 0.10  # wrist midline sits this far above the torso frame
    rng_seed: int = 0

    def __post_init__(self):
        if not self.h_range[0] < self.h_range[1]:
            raise ValueError("h_range must satisfy lo < hi")
        if self.variants < 1:
            raise ValueError("variants must be >= 1")
        if self.profile_knots < 2:
            raise ValueError("profile_knots must be >= 2")


def _variant_rng(spec: HeightAugmentSpec, episode_id: str, variant: int):
    tag = zlib.crc32(episode_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence((spec.rng_seed, tag, variant)))


def augment_heights(ep: Episode, spec: HeightAugmentSpec):
    """Return [(episode, height_profile), ...], one pair per variant.

    The height profile is the recorded per-step h*(t); the same values are
    embedded in each returned episode's steps as goal_height.
    """
    lo, hi = spec.h_range
    times = ep.times()
    z = ep.wrist_positions()[..., 2]
    if np.any(z < lo - 1e-9) or np.any(z > hi + 1e-9):
        raise ValueError(
            f"episode {ep.episode_id}: wrist z outside [{lo}, {hi}]; "
            "augment expects preprocessed input"
        )

    out = []
    for v in range(spec.variants):
        if v == 0:
            offsets = np.zeros(len(ep))
        else:
            rng = _variant_rng(spec, ep.episode_id, v)
            knot_t = np.linspace(times[0], times[-1], spec.profile_knots)
            knot_y = rng.uniform(-spec.offset_limit, spec.offset_limit, spec.profile_knots)
            curve = pchip_fit(np.stack([knot_t, knot_y], axis=1))
            offsets = pchip_eval(curve, times)

        steps = []
        profile = np.empty(len(ep))
        for k, s in enumerate(ep.steps):
            lw = s.left_wrist
            rw = s.right_wrist
            lz = min(max(lw.position[2] + offsets[k], lo), hi)
            rz = min(max(rw.position[2] + offsets[k], lo), hi)
            h_star = min(max(0.5 * (lz + rz) - spec.wrist_torso_offset, lo), hi)
            profile[k] = h_star
            steps.append(
                replace(
                    s,
                    left_wrist=replace(lw, position=np.array([lw.position[0], lw.position[1], lz])),
                    right_wrist=replace(rw, position=np.array([rw.position[0], rw.position[1], rz])),
                    goal_height=h_star,
                )
            )
        aug = replace(ep, episode_id=f"{ep.episode_id}#v{v}", steps=tuple(steps)).with_meta(
            augment={"source": ep.episode_id, "variant": v, "seed": spec.rng_seed}
        )
        out.append((aug, profile))
    return out


def augment_episodes(episodes, spec: HeightAugmentSpec) -> list[Episode]:
    """Augment a corpus; output ordered by (source episode id, variant)."""
    out = []
    for ep in sorted(episodes, key=lambda e: e.episode_id):
        out.extend(aug for aug, _ in augment_heights(ep, spec))
    return out
