"""Source-to-target episode normalization and workspace statistics.

The normalization maps source wrist trajectories into the target humanoid's
workspace: the x axis is aligned by z-score transfer onto the target's x
statistics, the y axis is rescaled by a fixed arm-length ratio, and the z
axis is clipped to the target's safe height band. Orientations, gripper
openings and timestamps pass through unchanged.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .episodes import Episode, Step

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class AxisStats:
    """Per-axis mean/std (population) of wrist positions, in meters."""

    mean: np.ndarray   # (3,)
    std: np.ndarray    # (3,)
    count: int

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(3))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=float).reshape(3))
        if np.any(self.std < 0):
            raise ValueError("std must be >= 0")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class PreprocessConfig:
    beta: float = 0.6667                    # y rescale, arm-length ratio
    z_clip: tuple[float, float] = (0.15, 1.25)
    target_x: AxisStats | None = None       # only the x components are used

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not self.z_clip[0] < self.z_clip[1]:
            raise ValueError("z_clip must satisfy lo < hi")


def compute_axis_stats(episodes, per_hand: bool = False):
    """Population mean/std of wrist positions over all steps.

    Default pools both hands; per_hand=True returns {"left": ..., "right": ...}.
    """
    eps = list(episodes)
    if not eps:
        raise ValueError("no episodes given")
    pts = np.concatenate([ep.wrist_positions() for ep in eps], axis=0)  # (T, 2, 3)
    if per_hand:
        return {
            "left": _stats_of(pts[:, 0, :]),
            "right": _stats_of(pts[:, 1, :]),
        }
    return _stats_of(pts.reshape(-1, 3))


def _stats_of(pts: np.ndarray) -> AxisStats:
    return AxisStats(mean=pts.mean(axis=0), std=pts.std(axis=0), count=pts.shape[0])


def _pos_map(src_stats: AxisStats, cfg: PreprocessConfig):
    if src_stats.std[0] <= 0:
        raise ValueError("source x std is zero; x z-score transfer undefined")
    sm, ss = src_stats.mean[0], src_stats.std[0]
    tm, ts = cfg.target_x.mean[0], cfg.target_x.std[0]
    z_lo, z_hi = cfg.z_clip

    def map_pos(p):
        x = (p[0] - sm) / ss * ts + tm
        y = cfg.beta * p[1]
        z = min(max(p[2], z_lo), z_hi)
        return np.array([x, y, z])

    return map_pos


def preprocess_episode(ep: Episode, src_stats: AxisStats, cfg: PreprocessConfig,
                       src_stats_right: AxisStats | None = None) -> Episode:
    """Normalize one episode into the target workspace.

    x' = zscore(x | source) * tgt_std_x + tgt_mean_x; y' = beta * y;
    z' = clip(z, z_clip). Both hands share src_stats unless a separate
    src_stats_right is given (per-hand mode). The returned episode carries
    meta preprocessed=True.
    """
    if cfg.target_x is None:
        raise ValueError("PreprocessConfig.target_x is required")
    map_left = _pos_map(src_stats, cfg)
    map_right = _pos_map(src_stats_right, cfg) if src_stats_right is not None else map_left

    steps = tuple(
        replace(
            s,
            left_wrist=replace(s.left_wrist, position=map_left(s.left_wrist.position)),
            right_wrist=replace(s.right_wrist, position=map_right(s.right_wrist.position)),
        )
        for s in ep.steps
    )
    return replace(ep, steps=steps).with_meta(preprocessed=True)


def preprocess_episodes(episodes, cfg: PreprocessConfig, per_hand: bool = False):
    """Preprocess a corpus with source stats computed from the corpus itself.

    Returns (episodes sorted by id, source stats). Pooled stats by default;
    per_hand=True z-scores each hand's x with its own source statistics.
    """
    eps = sorted(episodes, key=lambda e: e.episode_id)
    if per_hand:
        stats = compute_axis_stats(eps, per_hand=True)
        out = [preprocess_episode(ep, stats["left"], cfg, stats["right"]) for ep in eps]
        return out, stats
    src = compute_axis_stats(eps)
    return [preprocess_episode(ep, src, cfg) for ep in eps], src


@dataclass(frozen=True)
class Heatmap:
    """Gaussian-KDE hand-position density over a 2D plane, one grid per hand."""

    plane: tuple[str, str]
    coords_a: np.ndarray       # axis 0 cell centers (first plane axis)
    coords_b: np.ndarray       # axis 1 cell centers
    left: np.ndarray           # (na, nb) density, integrates to ~1
    right: np.ndarray


def workspace_heatmap(episodes, plane=("x", "z"), grid=(64, 64), bandwidth=0.05,
                      extent=None) -> Heatmap:
    """KDE of wrist positions projected onto an axis pair.

    `extent` is ((a_lo, a_hi), (b_lo, b_hi)); by default the data bounds are
    padded by 4 bandwidths so the grid captures essentially all density mass.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    na, nb = grid
    if na < 2 or nb < 2:
        raise ValueError("grid dims must be >= 2")
    eps = list(episodes)
    if not eps:
        raise ValueError("no episodes given")
    ia, ib = AXES[plane[0]], AXES[plane[1]]
    pts = np.concatenate([ep.wrist_positions() for ep in eps], axis=0)  # (T, 2, 3)
    proj = pts[:, :, [ia, ib]]

    if extent is None:
        pad = 4.0 * bandwidth
        lo = proj.reshape(-1, 2).min(axis=0) - pad
        hi = proj.reshape(-1, 2).max(axis=0) + pad
    else:
        (a0, a1), (b0, b1) = extent
        lo = np.array([a0, b0], dtype=float)
        hi = np.array([a1, b1], dtype=float)
    ca = np.linspace(lo[0], hi[0], na)
    cb = np.linspace(lo[1], hi[1], nb)

    def kde(samples):
        # mean of isotropic Gaussian kernels evaluated on the cell centers
        da = (ca[:, None] - samples[None, :, 0]) / bandwidth
        db = (cb[:, None] - samples[None, :, 1]) / bandwidth
        ka = np.exp(-0.5 * da * da)
        kb = np.exp(-0.5 * db * db)
        dens = ka @ kb.T / (2.0 * np.pi * bandwidth * bandwidth * samples.shape[0])
        return dens

    return Heatmap(plane=tuple(plane), coords_a=ca, coords_b=cb,
                   left=kde(proj[:, 0, :]), right=kde(proj[:, 1, :]))


def heatmap_mass(hm: Heatmap, hand: str = "left") -> float:
    """Grid integral of the density (should be ~1 when the extent covers it)."""
    da = hm.coords_a[1] - hm.coords_a[0]
    db = hm.coords_b[1] - hm.coords_b[0]
    grid = hm.left if hand == "left" else hm.right
    return float(grid.sum() * da * db)


def heatmap_to_csv(hm: Heatmap, path, hand: str = "left") -> None:
    """Dense grid CSV: header row holds axis-1 coordinates, first column axis-0."""
    grid = hm.left if hand == "left" else hm.right
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"{hm.plane[0]}\\{hm.plane[1]}"] + [repr(float(v)) for v in hm.coords_b])
        for i, a in enumerate(hm.coords_a):
            w.writerow([repr(float(a))] + [repr(float(v)) for v in grid[i]])
