import numpy as np
import pytest

from wbretarget.episodes import Episode, Step
from wbretarget.geometry import Pose
from wbretarget.preprocess import (
    AxisStats,
    PreprocessConfig,
    compute_axis_stats,
    heatmap_mass,
    heatmap_to_csv,
    preprocess_episode,
    preprocess_episodes,
    workspace_heatmap,
)

IDQ = np.array([1.0, 0, 0, 0])


def episode_from_points(points_left, points_right=None, eid="p-0"):
    points_right = points_left if points_right is None else points_right
    steps = tuple(
        Step(t=0.05 * i,
             left_wrist=Pose(np.asarray(pl, float), IDQ),
             right_wrist=Pose(np.asarray(pr, float), IDQ),
             left_grip=0.5, right_grip=0.5)
        for i, (pl, pr) in enumerate(zip(points_left, points_right))
    )
    return Episode(episode_id=eid, task_id="t", language="l", frequency_hz=20.0,
                   steps=steps)


TARGET = AxisStats(mean=[0.38, 0.0, 0.7], std=[0.14, 1.0, 1.0], count=10)


def test_stats_singleton():
    # a single step still has two hands pooled at the same point
    ep = episode_from_points([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    st = compute_axis_stats([ep])
    np.testing.assert_array_equal(st.mean, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(st.std, [0.0, 0.0, 0.0])
    assert st.count == 4


def test_stats_two_point():
    ep = episode_from_points([[0.0, 0, 0], [2.0, 0, 0]])
    st = compute_axis_stats([ep])
    assert st.mean[0] == pytest.approx(1.0)
    assert st.std[0] == pytest.approx(1.0)  # population std


def test_stats_matches_two_pass_oracle():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(100, 3))
    ep = episode_from_points(pts[:50], pts[50:])
    st = compute_axis_stats([ep])
    # oracle: two-pass mean/std over the pooled hand positions
    pooled = np.concatenate([pts[:50], pts[50:]])
    mean = pooled.sum(axis=0) / len(pooled)
    std = np.sqrt(((pooled - mean) ** 2).sum(axis=0) / len(pooled))
    np.testing.assert_allclose(st.mean, mean, atol=1e-12)
    np.testing.assert_allclose(st.std, std, atol=1e-12)


def test_stats_per_hand():
    ep = episode_from_points([[0.0, 0, 0], [0.0, 0, 0]], [[2.0, 0, 0], [4.0, 0, 0]])
    st = compute_axis_stats([ep], per_hand=True)
    assert st["left"].mean[0] == 0.0
    assert st["right"].mean[0] == 3.0


def test_stats_empty():
    with pytest.raises(ValueError):
        compute_axis_stats([])


def test_preprocess_mean_maps_to_mean():
    pts = [[0.2, 0.1, 0.7], [0.6, -0.1, 0.8]]
    ep = episode_from_points(pts)
    src = compute_axis_stats([ep])
    out = preprocess_episode(ep, src, PreprocessConfig(target_x=TARGET))
    x_in = ep.wrist_positions()[..., 0]
    x_out = out.wrist_positions()[..., 0]
    # a source point at the source mean lands on the target mean
    mid = (x_in - src.mean[0]) / src.std[0] * TARGET.std[0] + TARGET.mean[0]
    np.testing.assert_allclose(x_out, mid, atol=1e-15)


def test_preprocess_z_clip():
    ep = episode_from_points([[0.3, 0.0, 1.40], [0.4, 0.0, 0.05]])
    src = compute_axis_stats([ep])
    out = preprocess_episode(ep, src, PreprocessConfig(target_x=TARGET))
    z = out.wrist_positions()[..., 2]
    assert z[0, 0] == 1.25
    assert z[1, 0] == 0.15


def test_preprocess_y_scale_exact():
    ep = episode_from_points([[0.3, 0.30, 0.7], [0.4, -0.2, 0.7]])
    src = compute_axis_stats([ep])
    out = preprocess_episode(ep, src, PreprocessConfig(target_x=TARGET))
    y = out.wrist_positions()[..., 1]
    assert y[0, 0] == 0.6667 * 0.30
    assert y[0, 0] == pytest.approx(0.20001)
    assert y[1, 0] == 0.6667 * -0.2


def test_preprocess_leaves_orientation_grip_time():
    q = np.array([0.9, 0.1, 0.3, 0.1])
    steps = tuple(
        Step(t=0.05 * i, left_wrist=Pose([0.2 + 0.1 * i, 0, 0.7], q),
             right_wrist=Pose([0.3, 0.1, 0.8], q), left_grip=0.3, right_grip=0.9)
        for i in range(3)
    )
    ep = Episode(episode_id="o-0", task_id="t", language="l", frequency_hz=20.0, steps=steps)
    out = preprocess_episode(ep, compute_axis_stats([ep]), PreprocessConfig(target_x=TARGET))
    for a, b in zip(ep.steps, out.steps):
        assert a.t == b.t
        assert a.left_grip == b.left_grip
        np.testing.assert_array_equal(a.left_wrist.orientation, b.left_wrist.orientation)
    assert out.meta["preprocessed"] is True


def test_preprocess_exact_stats_transfer():
    rng = np.random.default_rng(1)
    eps = [
        episode_from_points(rng.uniform([0.2, -0.4, 0.5], [0.7, 0.4, 1.0], size=(20, 3)),
                            rng.uniform([0.2, -0.4, 0.5], [0.7, 0.4, 1.0], size=(20, 3)),
                            eid=f"s-{i}")
        for i in range(5)
    ]
    out, src = preprocess_episodes(eps, PreprocessConfig(target_x=TARGET))
    st = compute_axis_stats(out)
    assert st.mean[0] == pytest.approx(TARGET.mean[0], abs=1e-9)
    assert st.std[0] == pytest.approx(TARGET.std[0], abs=1e-9)


def test_preprocess_z_idempotent():
    rng = np.random.default_rng(2)
    eps = [episode_from_points(rng.uniform([0.2, -0.4, 0.0], [0.7, 0.4, 1.5], size=(20, 3)),
                               eid=f"z-{i}") for i in range(3)]
    cfg = PreprocessConfig(target_x=TARGET)
    once, _ = preprocess_episodes(eps, cfg)
    twice, _ = preprocess_episodes(once, cfg)
    for a, b in zip(once, twice):
        np.testing.assert_array_equal(a.wrist_positions()[..., 2], b.wrist_positions()[..., 2])


def test_preprocess_zero_std_rejected():
    ep = episode_from_points([[0.3, 0, 0.7], [0.3, 0.1, 0.8]])
    with pytest.raises(ValueError):
        preprocess_episode(ep, compute_axis_stats([ep]), PreprocessConfig(target_x=TARGET))


def test_preprocess_per_hand_mode():
    left = [[0.2, 0, 0.7], [0.4, 0, 0.7]]
    right = [[0.5, 0, 0.7], [0.9, 0, 0.7]]
    eps = [episode_from_points(left, right)]
    out, stats = preprocess_episodes(eps, PreprocessConfig(target_x=TARGET), per_hand=True)
    pos = out[0].wrist_positions()
    # each hand is centered with its own stats, so both midpoints map to target mean
    assert pos[:, 0, 0].mean() == pytest.approx(TARGET.mean[0], abs=1e-12)
    assert pos[:, 1, 0].mean() == pytest.approx(TARGET.mean[0], abs=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        PreprocessConfig(beta=-1.0, target_x=TARGET)
    with pytest.raises(ValueError):
        PreprocessConfig(z_clip=(1.3, 1.2), target_x=TARGET)
    with pytest.raises(ValueError):
        AxisStats(mean=[0, 0, 0], std=[-1, 0, 0], count=1)


# --- workspace heatmap ----------------------------------------------------

def test_heatmap_single_point_unimodal():
    ep = episode_from_points([[0.4, 0.0, 0.8], [0.4, 0.0, 0.8]])
    hm = workspace_heatmap([ep], grid=(41, 41), bandwidth=0.05)
    ia = np.abs(hm.coords_a - 0.4).argmin()
    ib = np.abs(hm.coords_b - 0.8).argmin()
    assert hm.left.argmax() == ia * 41 + ib
    assert np.all(hm.left >= 0)


def test_heatmap_mass_near_one():
    rng = np.random.default_rng(3)
    ep = episode_from_points(rng.uniform([0.2, -0.3, 0.5], [0.6, 0.3, 1.0], size=(50, 3)),
                             rng.uniform([0.2, -0.3, 0.5], [0.6, 0.3, 1.0], size=(50, 3)))
    hm = workspace_heatmap([ep], grid=(80, 80), bandwidth=0.05)
    assert heatmap_mass(hm, "left") == pytest.approx(1.0, abs=0.02)
    assert heatmap_mass(hm, "right") == pytest.approx(1.0, abs=0.02)


def test_heatmap_two_clusters_kernel_sum_oracle():
    rng = np.random.default_rng(4)
    c1, c2 = np.array([0.25, 0.0, 0.55]), np.array([0.6, 0.0, 1.0])
    pts = np.concatenate([
        c1 + rng.normal(scale=0.01, size=(30, 3)),
        c2 + rng.normal(scale=0.01, size=(30, 3)),
    ])
    ep = episode_from_points(pts)
    h = 0.05
    hm = workspace_heatmap([ep], grid=(61, 61), bandwidth=h)

    proj = pts[:, [0, 2]]

    def oracle(a, b):
        d2 = ((np.array([a, b]) - proj) ** 2).sum(axis=1)
        return np.exp(-0.5 * d2 / h**2).sum() / (2 * np.pi * h**2 * len(proj))

    for c in (c1, c2):
        ia = np.abs(hm.coords_a - c[0]).argmin()
        ib = np.abs(hm.coords_b - c[2]).argmin()
        val = hm.left[ia, ib]
        assert val == pytest.approx(oracle(hm.coords_a[ia], hm.coords_b[ib]), abs=1e-12)
        # a local peak sits within two cells of each cluster center
        patch = hm.left[max(ia - 2, 0):ia + 3, max(ib - 2, 0):ib + 3]
        outside = hm.left.copy()
        outside[max(ia - 2, 0):ia + 3, max(ib - 2, 0):ib + 3] = -np.inf
        ring = outside[max(ia - 6, 0):ia + 7, max(ib - 6, 0):ib + 7]
        assert patch.max() > ring.max()


def test_heatmap_validation():
    ep = episode_from_points([[0.3, 0, 0.7], [0.4, 0, 0.8]])
    with pytest.raises(ValueError):
        workspace_heatmap([ep], bandwidth=0.0)
    with pytest.raises(ValueError):
        workspace_heatmap([ep], grid=(1, 10))
    with pytest.raises(ValueError):
        workspace_heatmap([])


def test_heatmap_csv(tmp_path):
    ep = episode_from_points([[0.3, 0, 0.7], [0.4, 0, 0.8]])
    hm = workspace_heatmap([ep], grid=(8, 6))
    path = tmp_path / "hm.csv"
    heatmap_to_csv(hm, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 9
    header = lines[0].split(",")
    assert header[0] == "x\\z"
    assert len(header) == 7
    np.testing.assert_allclose([float(v) for v in header[1:]], hm.coords_b)
