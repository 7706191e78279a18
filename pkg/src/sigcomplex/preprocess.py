"""Modality-neutral preprocessing: pen-down only, 200 Hz spline grid, z-scores."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonMonotonicTime, TooFewSamples
from .signal_io import Label, Modality, RawSignature

RATE_HZ = 200.0


@dataclass(frozen=True)
class Origin:
    user_id: str
    session: int
    label: Label
    modality: Modality


@dataclass(frozen=True, eq=False)
class ProcessedSignature:
    """Uniformly sampled, z-scored pen-down trajectory.

    ``zero_variance`` lists the axes ("x", "y") that were constant; those
    are centered but left unscaled.
    """

    x: np.ndarray
    y: np.ndarray
    dt: float = 1.0 / RATE_HZ
    origin: Origin | None = None
    zero_variance: tuple[str, ...] = ()

    def __len__(self):
        return self.x.size

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt


def uniform_grid(t0: float, t_end: float, rate: float) -> np.ndarray:
    # the small slack keeps exact multiples (1.0 s * 200 Hz) from losing a point
    n = int(math.floor((t_end - t0) * rate + 1e-9)) + 1
    return t0 + np.arange(n) / rate


def resample_uniform(t, v, rate: float = RATE_HZ) -> np.ndarray:
    """Natural cubic spline through (t, v) evaluated on a uniform grid.

    Falls back to linear interpolation for fewer than four points.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise TooFewSamples("need at least two samples of matching length")
    if np.any(np.diff(t) <= 0):
        raise NonMonotonicTime("timestamps must be strictly increasing")
    grid = uniform_grid(t[0], t[-1], rate)
    if t.size < 4:
        return np.interp(grid, t, v)
    return CubicSpline(t, v, bc_type="natural")(grid)


def zscore(v: np.ndarray) -> tuple[np.ndarray, bool]:
    """Population z-score. Returns (values, was_constant)."""
    centered = v - v.mean()
    sd = centered.std()
    if sd <= 1e-12 * max(1.0, float(np.abs(v).max())):
        return centered, True
    out = centered / sd
    # second pass removes the residual rounding in the mean
    return out - out.mean(), False


def preprocess(sig: RawSignature, rate: float = RATE_HZ,
               normalize_first: bool = False) -> ProcessedSignature:
    """Drop pressure and pen-ups, resample to ``rate`` and z-score x and y.

    With ``normalize_first`` the raw pen-down coordinates are z-scored before
    resampling instead of after (experimental; the output then only
    approximately has unit variance).
    """
    down = np.asarray(sig.pen_down, dtype=bool)
    if down.sum() < 2:
        raise TooFewSamples(f"{int(down.sum())} pen-down samples, need at least 2")
    t, x, y = sig.t[down], sig.x[down], sig.y[down]
    flags = []
    if normalize_first:
        x, fx = zscore(x)
        y, fy = zscore(y)
        xs, ys = resample_uniform(t, x, rate), resample_uniform(t, y, rate)
    else:
        xs, fx = zscore(resample_uniform(t, x, rate))
        ys, fy = zscore(resample_uniform(t, y, rate))
    if fx:
        flags.append("x")
    if fy:
        flags.append("y")
    for a in (xs, ys):
        a.flags.writeable = False
    origin = Origin(sig.user_id, sig.session, sig.label, sig.modality)
    return ProcessedSignature(xs, ys, 1.0 / rate, origin, tuple(flags))


def as_raw(p: ProcessedSignature) -> RawSignature:
    """Reinterpret a processed signature as a pen-down raw recording."""
    meta = {}
    if p.origin is not None:
        meta = dict(user_id=p.origin.user_id, session=p.origin.session,
                    label=p.origin.label, modality=p.origin.modality)
    return RawSignature(t=p.t, x=p.x, y=p.y, pen_down=np.ones(len(p), bool), **meta)
