"""Sigma-lognormal velocity model: evaluation, synthesis and decomposition.

A stroke contributes a speed bump

    |v(t)| = D / (sigma (t - t0) sqrt(2 pi)) * exp(-(ln(t - t0) - mu)^2 / (2 sigma^2))

for t > t0, and the speed profile of a signature is the sum of its strokes.
In log time the bump is a Gaussian centred on ``mu - sigma**2`` with width
``sigma``, which gives closed-form initial guesses from the peak and the two
half-height crossings.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erfc

from .errors import EmptyStrokeList, ProfileTooShort
from .preprocess import RATE_HZ, ProcessedSignature, resample_uniform, uniform_grid
from .signal_io import Modality, RawSignature

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)
HALF_WIDTH = math.sqrt(2.0 * math.log(2.0))  # half-height offset, in sigmas

SNR_TARGET_DB = 25.0
MAX_STROKES = 60
AMP_THRESHOLD = 0.025
SMOOTH_WINDOW = 7
MAX_SOLVER_ITER = 200
SIGMA_BOUNDS = (0.05, 1.5)
MU_BOUNDS = (-4.0, 2.0)


@dataclass(frozen=True)
class LogNormalStroke:
    D: float
    t0: float
    mu: float
    sigma: float
    theta_s: float = 0.0
    theta_e: float = 0.0

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"stroke length must be positive, got {self.D}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def peak_time(self) -> float:
        return self.t0 + math.exp(self.mu - self.sigma ** 2)

    @property
    def peak_speed(self) -> float:
        tau = math.exp(self.mu - self.sigma ** 2)
        return self.D / (self.sigma * SQRT_2PI * tau) * math.exp(-0.5 * self.sigma ** 2)

    def support_end(self, n_sigma: float = 5.0) -> float:
        return self.t0 + math.exp(self.mu + n_sigma * self.sigma)


def _lognormal(t, D, t0, mu, sigma):
    t = np.asarray(t, dtype=float)
    tau = t - t0
    out = np.zeros_like(tau)
    pos = tau > 0
    lt = np.log(tau[pos])
    out[pos] = D / (sigma * SQRT_2PI * tau[pos]) * np.exp(-((lt - mu) ** 2) / (2 * sigma ** 2))
    return out


def lognormal_velocity(stroke: LogNormalStroke, t):
    """Speed of a single stroke at time(s) ``t``; zero for t <= t0."""
    out = _lognormal(np.atleast_1d(t), stroke.D, stroke.t0, stroke.mu, stroke.sigma)
    return float(out[0]) if np.ndim(t) == 0 else out


def lognormal_cdf(stroke: LogNormalStroke, t) -> np.ndarray:
    """Fraction of the stroke length covered by time ``t``."""
    tau = np.asarray(t, dtype=float) - stroke.t0
    out = np.zeros_like(tau)
    pos = tau > 0
    out[pos] = 0.5 * erfc(-(np.log(tau[pos]) - stroke.mu) / (stroke.sigma * math.sqrt(2)))
    return out


def synthesize_profile(strokes, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    v = np.zeros_like(grid)
    for s in strokes:
        v += _lognormal(grid, s.D, s.t0, s.mu, s.sigma)
    return v


def stroke_displacement(stroke: LogNormalStroke, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (dx, dy) travelled by one stroke up to time ``t``.

    The heading sweeps linearly with the covered-distance fraction F from
    theta_s to theta_e, so the path is a circular arc of length D.
    """
    F = lognormal_cdf(stroke, t)
    dth = stroke.theta_e - stroke.theta_s
    if abs(dth) < 1e-12:
        return (stroke.D * F * math.cos(stroke.theta_s),
                stroke.D * F * math.sin(stroke.theta_s))
    phi = stroke.theta_s + dth * F
    r = stroke.D / dth
    return (r * (np.sin(phi) - math.sin(stroke.theta_s)),
            -r * (np.cos(phi) - math.cos(stroke.theta_s)))


def synthesize_signature(strokes, rate: float = RATE_HZ, start=None,
                         origin=(0.0, 0.0), **meta) -> RawSignature:
    """Render strokes as a pen-down trajectory sampled at ``rate``."""
    strokes = sorted(strokes, key=lambda s: s.t0)
    if not strokes:
        raise EmptyStrokeList("cannot synthesize a signature without strokes")
    if start is None:
        start = max(0.0, strokes[0].t0)
    end = max(s.support_end() for s in strokes)
    t = uniform_grid(start, end, rate)
    x = np.full_like(t, origin[0])
    y = np.full_like(t, origin[1])
    for s in strokes:
        dx, dy = stroke_displacement(s, t)
        x += dx
        y += dy
    meta.setdefault("modality", Modality.PEN)
    pressure = np.ones_like(t) if Modality(meta["modality"]) is Modality.PEN else None
    return RawSignature(t=t, x=x, y=y, pen_down=np.ones(t.size, bool),
                        pressure=pressure, **meta)


# -- analysis --------------------------------------------------------------

@dataclass
class LogNormalDecomposition:
    strokes: list[LogNormalStroke]
    snr_db: float
    residual_energy: float
    profile_peak: float = 0.0
    snr_trace: list[float] = field(default_factory=list)
    failures: list[float] = field(default_factory=list)  # peak times of skipped fits

    def __post_init__(self):
        self.strokes = sorted(self.strokes, key=lambda s: s.t0)

    @property
    def clean(self) -> bool:
        return math.isinf(self.snr_db)

    def to_text(self) -> str:
        lines = [f"SLN1 {len(self.strokes)} {self.snr_db!r}"]
        for s in self.strokes:
            lines.append(" ".join(repr(float(v)) for v in
                                  (s.D, s.t0, s.mu, s.sigma, s.theta_s, s.theta_e)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LogNormalDecomposition":
        rows = text.strip("\n").split("\n")
        head = rows[0].split()
        if len(head) != 3 or head[0] != "SLN1":
            raise ValueError("expected 'SLN1 <count> <snr_db>' header")
        n = int(head[1])
        if len(rows) - 1 != n:
            raise ValueError(f"header declares {n} strokes, found {len(rows) - 1}")
        strokes = [LogNormalStroke(*map(float, r.split())) for r in rows[1:]]
        return cls(strokes, float(head[2]), float("nan"))


def snr_db(v: np.ndarray, v_hat: np.ndarray) -> float:
    signal = float(np.sum(v ** 2))
    noise = float(np.sum((v - v_hat) ** 2))
    if noise == 0.0:
        return math.inf
    if signal == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal / noise)


def smooth(v: np.ndarray, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Centered moving average; edges average over the available samples."""
    if window <= 1:
        return v.copy()
    kernel = np.ones(window)
    num = np.convolve(v, kernel, mode="same")
    den = np.convolve(np.ones_like(v), kernel, mode="same")
    return num / den


def _crossing(t, r, p, level, step):
    """Interpolated time where r falls below ``level`` walking from p by step."""
    i = p
    n = r.size
    while 0 <= i + step < n and r[i + step] > level:
        i += step
    j = i + step
    if not 0 <= j < n:
        return t[i], i
    # r[i] > level >= r[j]
    frac = (r[i] - level) / (r[i] - r[j])
    return t[i] + frac * (t[j] - t[i]), j


def characteristic_init(t_peak, v_peak, t_a, t_b):
    """(D, t0, mu, sigma) from the peak and the half-height crossings.

    Uses (t_p - t0)^2 = (t_a - t0)(t_b - t0) and
    ln(t_b - t0) - ln(t_a - t0) = 2 sigma sqrt(2 ln 2); returns None when the
    points are not right-skewed enough to pin t0.
    """
    denom = t_a + t_b - 2.0 * t_peak
    if denom <= 1e-12 * max(1.0, t_b - t_a):
        return None
    t0 = (t_a * t_b - t_peak ** 2) / denom
    if not t0 < t_a:
        return None
    sigma = (math.log(t_b - t0) - math.log(t_a - t0)) / (2.0 * HALF_WIDTH)
    if not sigma > 0:
        return None
    tau_p = t_peak - t0
    mu = math.log(tau_p) + sigma ** 2
    D = v_peak * sigma * SQRT_2PI * tau_p * math.exp(0.5 * sigma ** 2)
    return D, t0, mu, sigma


def _symmetric_init(t_peak, v_peak, t_a, t_b, sigma=0.3):
    # fallback for near-symmetric bumps: place t0 so the half-width matches
    # a lognormal of the given sigma
    width = max(t_b - t_a, 1e-6)
    tau_p = width / (math.exp(sigma * HALF_WIDTH) - math.exp(-sigma * HALF_WIDTH))
    t0 = t_peak - tau_p
    mu = math.log(tau_p) + sigma ** 2
    D = v_peak * sigma * SQRT_2PI * tau_p * math.exp(0.5 * sigma ** 2)
    return D, t0, mu, sigma


def fit_stroke(t, r, init, lo_t0=None):
    """Bounded least-squares refinement of one lognormal on a window."""
    D, t0, mu, sigma = init
    sigma = min(max(sigma, SIGMA_BOUNDS[0]), SIGMA_BOUNDS[1])
    mu = min(max(mu, MU_BOUNDS[0]), MU_BOUNDS[1])
    t_first = float(t[0])
    hi_t0 = t_first + (t[-1] - t_first) * 0.5
    if lo_t0 is None:
        lo_t0 = t_first - math.exp(MU_BOUNDS[1])
    t0 = min(max(t0, lo_t0 + 1e-9), hi_t0 - 1e-9)
    lower = [1e-12, lo_t0, MU_BOUNDS[0], SIGMA_BOUNDS[0]]
    upper = [np.inf, hi_t0, MU_BOUNDS[1], SIGMA_BOUNDS[1]]
    x0 = np.array([max(D, 2e-12), t0, mu, sigma])

    def resid(p):
        return _lognormal(t, *p) - r

    sol = least_squares(resid, x0, bounds=(lower, upper), method="trf",
                        max_nfev=MAX_SOLVER_ITER, x_scale="jac")
    if not np.all(np.isfinite(sol.x)) or sol.status < 0:
        return None
    return tuple(float(v) for v in sol.x)


def decompose(profile, dt: float | None = None, t_start: float = 0.0,
              snr_target: float = SNR_TARGET_DB, max_strokes: int = MAX_STROKES,
              amp_threshold: float = AMP_THRESHOLD,
              smooth_window: int = SMOOTH_WINDOW) -> LogNormalDecomposition:
    """Greedy peak-by-peak extraction of lognormal strokes from a speed profile.

    ``profile`` is a 1-D speed array sampled every ``dt`` seconds starting at
    ``t_start``, or a :class:`ProcessedSignature` (its speed is used).
    Extraction stops once the reconstruction reaches ``snr_target`` dB or
    ``max_strokes`` strokes were extracted. Strokes whose peak speed is below
    ``amp_threshold`` times the profile peak are dropped from the result.
    """
    if isinstance(profile, ProcessedSignature):
        dt = profile.dt
        profile = np.hypot(np.gradient(profile.x, dt), np.gradient(profile.y, dt))
    v = np.asarray(profile, dtype=float)
    if dt is None:
        dt = 1.0 / RATE_HZ
    if v.ndim != 1 or v.size < 8:
        raise ProfileTooShort(f"profile has {v.size} samples, need at least 8")
    t = t_start + np.arange(v.size) * dt
    peak = float(v.max()) if v.size else 0.0
    if peak <= 0:
        return LogNormalDecomposition([], math.inf, 0.0, 0.0, [math.inf])

    recon = np.zeros_like(v)
    strokes: list[tuple] = []
    masked = np.zeros(v.size, dtype=bool)
    failures = []
    trace = [snr_db(v, recon)]
    floor = 1e-3 * peak
    while trace[-1] < snr_target and len(strokes) < max_strokes:
        r = v - recon
        rs = smooth(r, smooth_window)
        rs[masked] = -np.inf
        p = int(np.argmax(rs))
        vp = rs[p]
        if not vp > floor:
            break
        t_a, ia = _crossing(t, rs, p, vp / 2, -1)
        t_b, ib = _crossing(t, rs, p, vp / 2, +1)
        # sub-sample peak location from a parabola through the top three points
        tp = t[p]
        if 0 < p < v.size - 1 and np.isfinite(rs[p - 1]) and np.isfinite(rs[p + 1]):
            den = rs[p - 1] - 2 * rs[p] + rs[p + 1]
            if den < 0:
                tp = t[p] + 0.5 * dt * (rs[p - 1] - rs[p + 1]) / den
        init = characteristic_init(tp, vp, t_a, t_b) or _symmetric_init(tp, vp, t_a, t_b)
        width = max(ib - ia, 4)
        lo = max(0, ia - width // 2)
        hi = min(v.size, ib + width // 2 + 1)
        fitted = None
        if hi - lo >= 5:
            try:
                fitted = fit_stroke(t[lo:hi], r[lo:hi], init)
            except (ValueError, FloatingPointError) as exc:
                logger.debug("fit failed near t=%.3f: %s", tp, exc)
        accepted = False
        if fitted is not None:
            contrib = _lognormal(t, *fitted)
            new_r = r - contrib
            if np.sum(new_r ** 2) < np.sum(r ** 2):
                recon = recon + contrib
                strokes.append(fitted)
                trace.append(snr_db(v, recon))
                accepted = True
        if not accepted:
            failures.append(float(tp))
            masked[max(0, ia):min(v.size, ib + 1)] = True
            if masked.all():
                break

    kept = [LogNormalStroke(D, t0, mu, sg) for D, t0, mu, sg in strokes]
    kept = [s for s in kept if s.peak_speed >= amp_threshold * peak]
    v_hat = synthesize_profile(kept, t)
    return LogNormalDecomposition(
        kept, snr_db(v, v_hat), float(np.sum((v - v_hat) ** 2)), peak, trace, failures)


def count_strokes(dec: LogNormalDecomposition, amp_threshold: float = AMP_THRESHOLD) -> int:
    """Number of strokes whose peak speed reaches ``amp_threshold`` of the profile peak."""
    if not dec.strokes:
        return 0
    ref = dec.profile_peak or max(s.peak_speed for s in dec.strokes)
    return sum(1 for s in dec.strokes if s.peak_speed >= amp_threshold * ref)


# -- signatures ------------------------------------------------------------

def speed_profile(sig: RawSignature, rate: float = RATE_HZ):
    """Resampled tangential speed of the whole recording.

    Returns (t_start, dt, speed, x, y); pen-up samples are kept because the
    movement continues in the air.
    """
    x = resample_uniform(sig.t, sig.x, rate)
    y = resample_uniform(sig.t, sig.y, rate)
    dt = 1.0 / rate
    v = np.hypot(np.gradient(x, dt), np.gradient(y, dt))
    return float(sig.t[0]), dt, v, x, y


def decompose_signature(sig: RawSignature, rate: float = RATE_HZ,
                        **kwargs) -> LogNormalDecomposition:
    """Decompose a recording and estimate each stroke's start/end headings."""
    t_start, dt, v, x, y = speed_profile(sig, rate)
    dec = decompose(v, dt=dt, t_start=t_start, **kwargs)
    if not dec.strokes:
        return dec
    hx, hy = np.gradient(x, dt), np.gradient(y, dt)
    n = v.size

    def heading(at):
        i = int(round((at - t_start) / dt))
        i = min(max(i, 0), n - 1)
        return math.atan2(hy[i], hx[i])

    strokes = []
    for s in dec.strokes:
        tau_p = math.exp(s.mu - s.sigma ** 2)
        off = s.sigma * HALF_WIDTH
        ta = s.t0 + tau_p * math.exp(-off)
        tb = s.t0 + tau_p * math.exp(off)
        strokes.append(replace(s, theta_s=heading(ta), theta_e=heading(tb)))
    dec.strokes = strokes
    return dec
