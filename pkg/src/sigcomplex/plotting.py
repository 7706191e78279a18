"""Figures rendered next to the evaluation report."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .complexity import LEVELS  # noqa: E402

LEVEL_COLORS = {"low": "#d95f02", "medium": "#7570b3", "high": "#1b9e77"}
KIND_STYLE = {"skilled": "-", "random": "--"}

_RC = {
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.6),
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # no timestamp/software metadata, so reruns give identical files
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_far_frr(rep, path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for kind, c in rep.curves.items():
            thr = c["threshold"][:-1]  # drop the +inf sentinel
            ax.plot(thr, c["far"][:-1], KIND_STYLE[kind], color="C3", label=f"FAR ({kind})")
            if kind == "skilled":
                ax.plot(thr, c["frr"][:-1], "-", color="C0", label="FRR")
        ax.set_xlabel("threshold on s = exp(-D)")
        ax.set_ylabel("error rate")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def plot_det(rep, path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for kind, c in rep.curves.items():
            ax.plot([100 * v for v in c["far"]], [100 * v for v in c["frr"]],
                    KIND_STYLE[kind], color="k", label=f"{kind} forgeries")
        ax.plot([0, 100], [0, 100], ":", color="0.6", lw=0.8)
        ax.set_xlabel("FAR (%)")
        ax.set_ylabel("FRR (%)")
        ax.set_xlim(0, 100)
        ax.set_ylim(0, 100)
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def plot_eer_by_level(rep, path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        names = [lv.value for lv in LEVELS if lv in rep.per_level]
        width = 0.38
        for k, kind in enumerate(("skilled", "random")):
            vals = [getattr(rep.per_level[lv], f"eer_{kind}") for lv in LEVELS
                    if lv in rep.per_level]
            xs = [i + (k - 0.5) * width for i in range(len(names))]
            ax.bar(xs, [100 * (v or 0.0) for v in vals], width,
                   color=[LEVEL_COLORS[n] for n in names], alpha=1.0 if k == 0 else 0.45,
                   label=f"{kind} forgeries")
        ax.set_xticks(range(len(names)), names)
        ax.set_ylabel("EER (%)")
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def plot_stroke_counts(scores, thresholds, path) -> Path:
    """Distribution of enrollment stroke counts per assigned level."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        all_counts = [n for c in scores.stroke_counts.values() for n in c]
        lo, hi = (min(all_counts), max(all_counts)) if all_counts else (0, 1)
        bins = range(lo, hi + 2)
        for lv in LEVELS:
            counts = [n for u, c in sorted(scores.stroke_counts.items())
                      if scores.levels[u] is lv for n in c]
            if counts:
                ax.hist(counts, bins=bins, color=LEVEL_COLORS[lv.value], alpha=0.6,
                        label=lv.value, align="left")
        for edge in (thresholds.get("low_max"), thresholds.get("high_min_exclusive")):
            if edge is not None:
                ax.axvline(edge + 0.5, ls="--", color="k", lw=0.8)
        ax.set_xlabel("number of lognormals")
        ax.set_ylabel("enrollment signatures")
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def render_report_figures(rep, out_dir, scores=None) -> list[Path]:
    out = Path(out_dir)
    paths = []
    if rep.curves:
        paths.append(plot_far_frr(rep, out / "far_frr.png"))
        paths.append(plot_det(rep, out / "det.png"))
    if rep.per_level:
        paths.append(plot_eer_by_level(rep, out / "eer_by_level.png"))
    if scores is not None and scores.stroke_counts:
        th = rep.config_echo.get("thresholds", {})
        paths.append(plot_stroke_counts(scores, th, out / "lognormal_counts.png"))
    return paths
