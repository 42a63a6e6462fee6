"""Monotone piecewise cubic Hermite interpolation (PCHIP).

Knot slopes follow the Fritsch-Carlson construction: interior slopes start
as the mean of adjacent secants (zero across sign changes), endpoint slopes
equal the boundary secants, and each interval's slope pair is pulled back
into the circle alpha^2 + beta^2 <= 9 that guarantees monotonicity. The
interpolant passes through every knot exactly, is C1, and never overshoots
between monotone knots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PchipCurve:
    t: np.ndarray        # strictly increasing knot times
    y: np.ndarray
    slopes: np.ndarray   # Fritsch-Carlson limited derivative at each knot


def pchip_fit(knots) -> PchipCurve:
    """Fit from an iterable of (t, y) pairs or a pair of arrays."""
    arr = np.asarray(knots, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        t, y = arr[:, 0].copy(), arr[:, 1].copy()
    elif arr.ndim == 2 and arr.shape[0] == 2:
        t, y = arr[0].copy(), arr[1].copy()
    else:
        raise ValueError("knots must be (n, 2) pairs or (t, y) arrays")
    if t.shape[0] < 2:
        raise ValueError("need at least 2 knots")
    if not np.all(np.diff(t) > 0):
        raise ValueError("knot times must be strictly increasing")

    n = t.shape[0]
    h = np.diff(t)
    d = np.diff(y) / h

    m = np.empty(n)
    m[0] = d[0]
    m[-1] = d[-1]
    for k in range(1, n - 1):
        m[k] = 0.0 if d[k - 1] * d[k] <= 0.0 else 0.5 * (d[k - 1] + d[k])

    for k in range(n - 1):
        if d[k] == 0.0:
            m[k] = 0.0
            m[k + 1] = 0.0
            continue
        a = m[k] / d[k]
        b = m[k + 1] / d[k]
        if a < 0.0:       # defensive; the init above keeps signs consistent
            m[k] = 0.0
            a = 0.0
        if b < 0.0:
            m[k + 1] = 0.0
            b = 0.0
        r = a * a + b * b
        if r > 9.0:
            tau = 3.0 / np.sqrt(r)
            m[k] = tau * a * d[k]
            m[k + 1] = tau * b * d[k]
    return PchipCurve(t=t, y=y, slopes=m)


def pchip_eval(curve: PchipCurve, x, deriv: bool = False):
    """Evaluate the interpolant (or its derivative) at x within the knot span.

    Extrapolation is an error; the height augmentation never needs it.
    """
    t, y, m = curve.t, curve.y, curve.slopes
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    if np.any(xv < t[0]) or np.any(xv > t[-1]):
        raise ValueError(
            f"evaluation outside knot span [{t[0]}, {t[-1]}] requested (extrapolation)"
        )
    idx = np.clip(np.searchsorted(t, xv, side="right") - 1, 0, t.shape[0] - 2)
    h = t[idx + 1] - t[idx]
    u = (xv - t[idx]) / h
    u2 = u * u
    u3 = u2 * u
    if not deriv:
        h00 = 2 * u3 - 3 * u2 + 1
        h10 = u3 - 2 * u2 + u
        h01 = -2 * u3 + 3 * u2
        h11 = u3 - u2
        out = h00 * y[idx] + h10 * h * m[idx] + h01 * y[idx + 1] + h11 * h * m[idx + 1]
    else:
        g00 = (6 * u2 - 6 * u) / h
        g10 = (3 * u2 - 4 * u + 1)
        g01 = (-6 * u2 + 6 * u) / h
        g11 = (3 * u2 - 2 * u)
        out = g00 * y[idx] + g10 * m[idx] + g01 * y[idx + 1] + g11 * m[idx + 1]
    return float(out[0]) if scalar else out
