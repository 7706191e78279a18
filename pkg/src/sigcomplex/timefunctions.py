"""The 21 local time functions computed from a preprocessed trajectory.

Channel numbering is 1-based and fixed:

==  =========  =====================================================
 1  x          x coordinate
 2  y          y coordinate
 3  theta      path-tangent angle, atan2(dy, dx), unwrapped
 4  v          path velocity magnitude
 5  rho        log curvature radius, ln(v / |dtheta|)
 6  a          total acceleration magnitude
 7  dx         first derivatives of channels 1-6
 8  dy
 9  dtheta
10  dv
11  drho
12  da
13  ddx        second derivatives of x and y
14  ddy
15  vr         min/max speed ratio over a centered 5-sample window
16  alpha      angle between consecutive samples, unwrapped
17  dalpha
18  sin_alpha
19  cos_alpha
20  r5         path length over bounding-box width, 5-sample window
21  r7         same over a 7-sample window
==  =========  =====================================================
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptySubset, IndexOutOfRange, SignatureTooShort
from .preprocess import ProcessedSignature

CHANNEL_NAMES = (
    "x", "y", "theta", "v", "rho", "a",
    "dx", "dy", "dtheta", "dv", "drho", "da",
    "ddx", "ddy", "vr", "alpha", "dalpha", "sin_alpha", "cos_alpha", "r5", "r7",
)
N_CHANNELS = len(CHANNEL_NAMES)
EPS = 1e-6
MIN_LENGTH = 8


@dataclass(frozen=True, eq=False)
class TimeFunctionMatrix:
    """``values`` is channels x samples; ``channel_ids`` are 1-based."""

    values: np.ndarray
    channel_ids: tuple[int, ...] = tuple(range(1, N_CHANNELS + 1))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != len(self.channel_ids):
            raise ValueError("one row per channel id expected")
        object.__setattr__(self, "values", v)

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def channel(self, k: int) -> np.ndarray:
        return self.values[self.channel_ids.index(k)]


class FeatureSubset(tuple):
    """Sorted, duplicate-free tuple of 1-based channel indices."""

    def __new__(cls, indices):
        idx = [int(i) for i in indices]
        if not idx:
            raise EmptySubset("feature subset is empty")
        if len(set(idx)) != len(idx):
            raise IndexOutOfRange(f"duplicate indices in {idx}")
        bad = [i for i in idx if not 1 <= i <= N_CHANNELS]
        if bad:
            raise IndexOutOfRange(f"indices {bad} outside 1..{N_CHANNELS}")
        return super().__new__(cls, sorted(idx))

    def __repr__(self):
        return f"FeatureSubset({list(self)})"

    def csv(self) -> str:
        return ",".join(str(i) for i in self)

    @classmethod
    def parse(cls, text: str) -> "FeatureSubset":
        return cls(int(tok) for tok in text.split(",") if tok.strip())


ALL_CHANNELS = FeatureSubset(range(1, N_CHANNELS + 1))


def derivative(f: np.ndarray, dt: float) -> np.ndarray:
    """Central differences inside, one-sided differences at both ends."""
    return np.gradient(f, dt)


def _heading(dx, dy):
    # atan2(0, 0) is undefined; hold the previous heading (0 at the start)
    theta = np.arctan2(dy, dx)
    still = (dx == 0) & (dy == 0)
    if still.any():
        theta = theta.copy()
        prev = 0.0
        for n in range(theta.size):
            if still[n]:
                theta[n] = prev
            prev = theta[n]
    return np.unwrap(theta)


def _padded_windows(v: np.ndarray, w: int) -> np.ndarray:
    # edge padding only repeats samples already inside the clamped window,
    # so min/max/path length equal those of the clamped window
    h = w // 2
    return sliding_window_view(np.pad(v, h, mode="edge"), w)


def speed_ratio(v: np.ndarray, window: int = 5) -> np.ndarray:
    win = _padded_windows(v, window)
    return win.min(axis=1) / np.maximum(win.max(axis=1), EPS)


def length_width_ratio(x: np.ndarray, y: np.ndarray, window: int) -> np.ndarray:
    wx = _padded_windows(x, window)
    wy = _padded_windows(y, window)
    path = np.hypot(np.diff(wx, axis=1), np.diff(wy, axis=1)).sum(axis=1)
    width = wx.max(axis=1) - wx.min(axis=1)
    return path / np.maximum(width, EPS)


def raw_time_functions(x: np.ndarray, y: np.ndarray, dt: float) -> np.ndarray:
    """All 21 channels before per-channel normalization (21 x L)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < MIN_LENGTH:
        raise SignatureTooShort(f"{x.size} samples, need at least {MIN_LENGTH}")
    dx, dy = derivative(x, dt), derivative(y, dt)
    theta = _heading(dx, dy)
    v = np.hypot(dx, dy)
    dtheta = derivative(theta, dt)
    rho = np.log(np.maximum(v, EPS) / np.maximum(np.abs(dtheta), EPS))
    dv = derivative(v, dt)
    a = np.hypot(dv, v * dtheta)
    drho = derivative(rho, dt)
    da = derivative(a, dt)
    ddx, ddy = derivative(dx, dt), derivative(dy, dt)
    vr = speed_ratio(v, 5)
    ax = np.append(np.diff(x), np.nan)
    ay = np.append(np.diff(y), np.nan)
    ax[-1], ay[-1] = ax[-2], ay[-2]
    alpha = _heading(ax, ay)
    dalpha = derivative(alpha, dt)
    sin_a, cos_a = np.sin(alpha), np.cos(alpha)
    r5 = length_width_ratio(x, y, 5)
    r7 = length_width_ratio(x, y, 7)
    return np.vstack([x, y, theta, v, rho, a, dx, dy, dtheta, dv, drho, da,
                      ddx, ddy, vr, alpha, dalpha, sin_a, cos_a, r5, r7])


def _zscore_rows(m: np.ndarray) -> np.ndarray:
    out = m - m.mean(axis=1, keepdims=True)
    sd = out.std(axis=1, keepdims=True)
    # rounding noise on a constant channel must not be blown up to unit scale
    floor = 1e-9 * np.maximum(1.0, np.abs(m).max(axis=1, keepdims=True))
    scale = np.where(sd > floor, sd, 1.0)
    return out / scale


def compute_time_functions(sig: ProcessedSignature,
                           normalize: bool = True) -> TimeFunctionMatrix:
    """Compute the 21-channel matrix, z-scored per channel by default."""
    m = raw_time_functions(sig.x, sig.y, sig.dt)
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite time function values")
    if normalize:
        m = _zscore_rows(m)
    return TimeFunctionMatrix(m)


def select_channels(m: TimeFunctionMatrix, subset) -> TimeFunctionMatrix:
    """Rows for ``subset`` in ascending channel order."""
    subset = FeatureSubset(subset)
    missing = [k for k in subset if k not in m.channel_ids]
    if missing:
        raise IndexOutOfRange(f"channels {missing} not present in matrix")
    rows = [m.channel_ids.index(k) for k in subset]
    return TimeFunctionMatrix(m.values[rows], tuple(subset))
