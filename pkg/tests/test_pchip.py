import numpy as np
import pytest

from wbretarget.pchip import PchipCurve, pchip_eval, pchip_fit


def hermite_eval_oracle(t, y, m, x):
    """Independent Hermite-basis evaluation from the raw basis polynomials."""
    k = int(np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2))
    h = t[k + 1] - t[k]
    u = (x - t[k]) / h
    b0 = (1 + 2 * u) * (1 - u) ** 2
    b1 = u * (1 - u) ** 2
    b2 = u * u * (3 - 2 * u)
    b3 = u * u * (u - 1)
    return b0 * y[k] + b1 * h * m[k] + b2 * y[k + 1] + b3 * h * m[k + 1]


def test_linear_data_reproduced_exactly():
    t = np.array([0.0, 1.0, 2.5, 4.0])
    y = 2.0 * t - 1.0
    curve = pchip_fit(np.stack([t, y], axis=1))
    x = np.linspace(0, 4, 500)
    np.testing.assert_allclose(pchip_eval(curve, x), 2.0 * x - 1.0, atol=1e-12)


def test_knot_interpolation_exact():
    rng = np.random.default_rng(0)
    t = np.cumsum(rng.uniform(0.2, 1.0, size=10))
    y = rng.normal(size=10)
    curve = pchip_fit(np.stack([t, y], axis=1))
    got = pchip_eval(curve, t)
    assert np.array_equal(got, y)


def test_monotone_data_monotone_output():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = rng.integers(3, 12)
        t = np.cumsum(rng.uniform(0.1, 1.0, size=n))
        y = np.cumsum(rng.uniform(0.0, 1.0, size=n))  # nondecreasing
        curve = pchip_fit(np.stack([t, y], axis=1))
        x = np.arange(t[0], t[-1], 1e-3)
        vals = pchip_eval(curve, x)
        assert np.all(np.diff(vals) >= -1e-12)


def test_no_overshoot_between_monotone_knots():
    t = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    y = np.array([0.0, 0.1, 2.0, 2.1, 2.2])  # sharp rise tempts overshoot
    curve = pchip_fit(np.stack([t, y], axis=1))
    for k in range(4):
        x = np.linspace(t[k], t[k + 1], 200)
        vals = pchip_eval(curve, x)
        assert np.all(vals >= min(y[k], y[k + 1]) - 1e-12)
        assert np.all(vals <= max(y[k], y[k + 1]) + 1e-12)


def test_flat_segment_stays_flat():
    curve = pchip_fit(np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 3.0]]))
    assert pchip_eval(curve, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_endpoints():
    curve = pchip_fit(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]))
    assert pchip_eval(curve, 0.0) == 0.0
    assert pchip_eval(curve, 2.0) == 0.0
    assert pchip_eval(curve, 1.0) == 1.0


def test_matches_hermite_basis_oracle():
    rng = np.random.default_rng(2)
    t = np.cumsum(rng.uniform(0.2, 1.0, size=8))
    y = rng.normal(size=8)
    curve = pchip_fit(np.stack([t, y], axis=1))
    for x in rng.uniform(t[0], t[-1], size=50):
        expect = hermite_eval_oracle(curve.t, curve.y, curve.slopes, x)
        assert pchip_eval(curve, float(x)) == pytest.approx(expect, abs=1e-12)


def test_c1_continuity_at_interior_knots():
    rng = np.random.default_rng(3)
    t = np.cumsum(rng.uniform(0.3, 1.0, size=7))
    y = rng.normal(size=7)
    curve = pchip_fit(np.stack([t, y], axis=1))
    span = t[-1] - t[0]
    for k in range(1, 6):
        left = pchip_eval(curve, t[k] - 1e-12 * span, deriv=True)
        right = pchip_eval(curve, t[k], deriv=True)
        assert left == pytest.approx(right, abs=1e-9)
        assert right == pytest.approx(curve.slopes[k], abs=1e-9)


def test_extrapolation_rejected():
    curve = pchip_fit(np.array([[0.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        pchip_eval(curve, -0.1)
    with pytest.raises(ValueError):
        pchip_eval(curve, np.array([0.5, 1.2]))


def test_bad_knots_rejected():
    with pytest.raises(ValueError):
        pchip_fit(np.array([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        pchip_fit(np.array([[0.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        pchip_fit(np.array([[1.0, 0.0], [0.5, 1.0]]))


def test_slope_limiting_keeps_circle_bound():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = rng.integers(3, 10)
        t = np.cumsum(rng.uniform(0.05, 1.0, size=n))
        y = rng.normal(size=n) * rng.uniform(0.1, 5.0)
        curve = pchip_fit(np.stack([t, y], axis=1))
        d = np.diff(curve.y) / np.diff(curve.t)
        for k in range(n - 1):
            if d[k] == 0.0:
                assert curve.slopes[k] == 0.0 and curve.slopes[k + 1] == 0.0
            else:
                a = curve.slopes[k] / d[k]
                b = curve.slopes[k + 1] / d[k]
                assert a >= -1e-12 and b >= -1e-12
                assert a * a + b * b <= 9.0 + 1e-9
