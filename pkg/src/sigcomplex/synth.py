"""Synthetic signature cohorts built from lognormal strokes.

Each user gets a base stroke sequence. Genuine signatures are small parameter
jitters of the base; "skilled forgeries" apply the same jitter scaled up. The
forgeries are a stand-in that gives the error-rate machinery non-degenerate
inputs, not a model of human forgers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .complexity import ComplexityLevel
from .lognormal import LogNormalStroke, synthesize_signature
from .signal_io import Label, Modality, save_signature, write_manifest

LEVEL_STROKES = {
    ComplexityLevel.LOW: (10, 15),
    ComplexityLevel.MEDIUM: (19, 25),
    ComplexityLevel.HIGH: (30, 38),
}
MU_RANGE = (-2.0, -1.5)
SIGMA_RANGE = (0.18, 0.32)
D_RANGE = (0.6, 1.4)
GAP_RANGE = (1.05, 1.4)   # multiples of exp(mu + sigma)
MIN_GAP = 1.0


@dataclass(frozen=True)
class Jitter:
    """Relative (D, sigma, gap) and absolute (mu, angle) standard deviations."""

    D: float = 0.04
    mu: float = 0.04
    sigma: float = 0.04
    gap: float = 0.04
    angle: float = 0.05

    def scaled(self, k: float) -> "Jitter":
        return Jitter(self.D * k, self.mu * k, self.sigma * k, self.gap * k, self.angle * k)


GENUINE_JITTER = Jitter()
FORGERY_SCALE = 3.0
FINGER_SCALE = 1.5


def random_strokes(rng: np.random.Generator, k: int, gap_range=GAP_RANGE,
                   mu_range=MU_RANGE, sigma_range=SIGMA_RANGE, d_range=D_RANGE,
                   t_start: float = 0.05) -> list[LogNormalStroke]:
    """``k`` strokes whose onsets are spaced by ``gap_range`` x exp(mu + sigma)."""
    strokes = []
    t0 = t_start
    for _ in range(k):
        mu = rng.uniform(*mu_range)
        sigma = rng.uniform(*sigma_range)
        D = rng.uniform(*d_range)
        th_s = rng.uniform(-math.pi, math.pi)
        th_e = th_s + rng.uniform(-2.5, 2.5)
        strokes.append(LogNormalStroke(D, t0, mu, sigma, th_s, th_e))
        t0 += math.exp(mu + sigma) * rng.uniform(*gap_range)
    return strokes


def jitter_strokes(rng: np.random.Generator, base, j: Jitter) -> list[LogNormalStroke]:
    """Perturb every stroke of ``base``; onset gaps never shrink below exp(mu+sigma)."""
    out = []
    t0 = base[0].t0
    for i, s in enumerate(base):
        D = s.D * math.exp(j.D * rng.standard_normal())
        mu = s.mu + j.mu * rng.standard_normal()
        sigma = s.sigma * math.exp(j.sigma * rng.standard_normal())
        th_s = s.theta_s + j.angle * rng.standard_normal()
        th_e = s.theta_e + j.angle * rng.standard_normal()
        if i > 0:
            prev = base[i - 1]
            gap = (s.t0 - prev.t0) * math.exp(j.gap * rng.standard_normal())
            last = out[-1]
            t0 = out[-1].t0 + max(gap, MIN_GAP * math.exp(last.mu + last.sigma))
        out.append(LogNormalStroke(D, t0, mu, sigma, th_s, th_e))
    return out


@dataclass(frozen=True)
class DatabaseShape:
    name: str
    genuine_per_session: tuple[int, ...]
    skilled_per_session: tuple[int, ...]


SHAPES = {
    # 8 genuine over 2 sessions + 6 skilled, per writing input
    "ebiosign": DatabaseShape("ebiosign", (4, 4), (0, 6)),
    # 16 genuine over 4 sessions + 12 skilled
    "biosecurid": DatabaseShape("biosecurid", (4, 4, 4, 4), (3, 3, 3, 3)),
}


def _levels_for(n_users: int) -> list[ComplexityLevel]:
    order = (ComplexityLevel.LOW, ComplexityLevel.MEDIUM, ComplexityLevel.HIGH)
    return [order[i % 3] for i in range(n_users)]


def generate_dataset(out_dir, seed: int, n_users: int, shape: str = "ebiosign",
                     modalities=(Modality.PEN,), level_strokes=None,
                     genuine_jitter: Jitter = GENUINE_JITTER,
                     forgery_scale: float = FORGERY_SCALE, dev_fraction: float = 0.4,
                     rate: float = 200.0) -> Path:
    """Write a synthetic dataset (signature files, manifest, ground truth).

    Users cycle through low/medium/high complexity; the first ``dev_fraction``
    of them form the development split. Everything derives from ``seed``.
    """
    if n_users < 1:
        raise ValueError("need at least one user")
    level_strokes = {**LEVEL_STROKES, **(level_strokes or {})}
    db = SHAPES[shape]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_dev = int(round(dev_fraction * n_users))
    rows, truth = [], []
    children = np.random.SeedSequence(seed).spawn(n_users)
    for u, (level, child) in enumerate(zip(_levels_for(n_users), children)):
        rng = np.random.default_rng(child)
        user_id = f"u{u + 1:03d}"
        split = "dev" if u < n_dev else "eval"
        lo, hi = level_strokes[level]
        base = random_strokes(rng, int(rng.integers(lo, hi + 1)))
        udir = out / user_id
        udir.mkdir(exist_ok=True)
        for modality in modalities:
            modality = Modality(modality)
            gj = genuine_jitter.scaled(FINGER_SCALE if modality is Modality.FINGER else 1.0)
            plan = []
            for sess, n in enumerate(db.genuine_per_session, 1):
                plan += [(Label.GENUINE, sess, gj)] * n
            for sess, n in enumerate(db.skilled_per_session, 1):
                plan += [(Label.SKILLED, sess, gj.scaled(forgery_scale))] * n
            counters = {}
            for label, sess, jit in plan:
                key = (label, sess)
                counters[key] = counters.get(key, 0) + 1
                strokes = jitter_strokes(rng, base, jit)
                sig = synthesize_signature(strokes, rate, modality=modality,
                                           user_id=user_id, session=sess, label=label)
                name = (f"{modality.value}_s{sess}_{label.value[0]}"
                        f"{counters[key]:02d}.sig")
                save_signature(sig, udir / name)
                rel = f"{user_id}/{name}"
                rows.append((user_id, split, rel, modality, sess, label))
                truth.append((rel, len(strokes), level.value))
    write_manifest(out, rows)
    lines = ["path\tn_strokes\tlevel"] + [f"{p}\t{n}\t{lv}" for p, n, lv in truth]
    (out / "ground_truth.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    params = {
        "seed": seed, "n_users": n_users, "shape": shape, "rate": rate,
        "modalities": [Modality(m).value for m in modalities],
        "level_strokes": {lv.value: list(r) for lv, r in level_strokes.items()},
        "genuine_jitter": vars(genuine_jitter), "forgery_scale": forgery_scale,
        "dev_fraction": dev_fraction,
    }
    (out / "synth.json").write_text(json.dumps(params, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    return out
