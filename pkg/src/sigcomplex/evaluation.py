"""Verification protocol over a manifest and error-rate reporting."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .complexity import (
    DEFAULT_THRESHOLDS,
    LEVELS,
    ComplexityLevel,
    ComplexityThresholds,
    classify_user,
    enrollment_stability,
)
from .errors import EmptyEvaluationSplit, EmptyScoreList, InsufficientEnrollment, MissingLevel
from .lognormal import AMP_THRESHOLD, SNR_TARGET_DB, count_strokes, decompose_signature
from .matcher import ENROLLMENT_SIZE, UserTemplate, verify
from .preprocess import preprocess
from .selection import Profile, default_subsets
from .signal_io import DatasetManifest, Label, ManifestEntry, Modality, UserEntries
from .timefunctions import FeatureSubset, TimeFunctionMatrix, compute_time_functions

logger = logging.getLogger(__name__)

SCENARIOS = ("pen-pen", "finger-finger", "pen-finger", "finger-pen")
DEFAULT_FAR_GRID = (0.01, 0.05, 0.10, 0.20)


# -- error rates -----------------------------------------------------------

def _rates(genuine: np.ndarray, impostor: np.ndarray, thresholds: np.ndarray):
    g = np.sort(genuine)
    i = np.sort(impostor)
    far = 1.0 - np.searchsorted(i, thresholds, side="left") / i.size
    frr = np.searchsorted(g, thresholds, side="left") / g.size
    return far, frr


def _prepare(genuine, impostor):
    g = np.asarray(genuine, dtype=float).ravel()
    i = np.asarray(impostor, dtype=float).ravel()
    if g.size == 0 or i.size == 0:
        raise EmptyScoreList("genuine and impostor score lists must be non-empty")
    return g, i


def error_curve(genuine, impostor):
    """(thresholds, FAR, FRR) at every distinct score plus +inf.

    Accept means score >= threshold: FAR counts impostors at or above the
    threshold, FRR counts genuine scores below it.
    """
    g, i = _prepare(genuine, impostor)
    thr = np.append(np.unique(np.concatenate([g, i])), np.inf)
    far, frr = _rates(g, i, thr)
    return thr, far, frr


def compute_eer(genuine, impostor) -> tuple[float, float]:
    """Equal error rate and the threshold where FAR and FRR meet.

    When the curves cross between two adjacent thresholds both rates are
    interpolated linearly in the threshold.
    """
    thr, far, frr = error_curve(genuine, impostor)
    d = far - frr
    k = int(np.argmax(d <= 0))  # d[0] = 1 and d[-1] = -1, so k >= 1
    if d[k] == 0:
        return float(far[k]), float(thr[k])
    a = d[k - 1] / (d[k - 1] - d[k])
    eer = far[k - 1] + a * (far[k] - far[k - 1])
    t = thr[k - 1] if not np.isfinite(thr[k]) else thr[k - 1] + a * (thr[k] - thr[k - 1])
    return float(eer), float(t)


def far_frr_curve(genuine, impostor, far_grid=DEFAULT_FAR_GRID) -> list[tuple[float, float]]:
    """FRR at the smallest threshold whose FAR does not exceed each target."""
    thr, far, frr = error_curve(genuine, impostor)
    out = []
    for target in far_grid:
        if not 0 <= target <= 1:
            raise ValueError(f"FAR target {target} outside [0, 1]")
        ok = np.nonzero(far <= target + 1e-12)[0]
        out.append((float(target), float(frr[ok[0]])))
    return out


# -- protocol --------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    thresholds: ComplexityThresholds = DEFAULT_THRESHOLDS
    profile: Profile = Profile.OFFICE
    scenario: str = "pen-pen"
    subset_override: FeatureSubset | None = None
    level_subsets: dict | None = None
    dtw_band: int | None = None
    dtw_norm: str = "nodes"
    ln_amp_threshold: float = AMP_THRESHOLD
    ln_snr_target: float = SNR_TARGET_DB
    normalize_first: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {', '.join(SCENARIOS)}")
        object.__setattr__(self, "profile", Profile(self.profile))

    @property
    def modalities(self) -> tuple[Modality, Modality]:
        train, test = self.scenario.split("-")
        return Modality(train), Modality(test)

    def subset_for(self, level: ComplexityLevel) -> FeatureSubset:
        if self.subset_override is not None:
            return FeatureSubset(self.subset_override)
        if self.level_subsets and level in self.level_subsets:
            return FeatureSubset(self.level_subsets[level])
        return default_subsets(self.profile, level)

    def echo(self) -> dict:
        d = asdict(self)
        d["thresholds"] = {"low_max": self.thresholds.low_max,
                           "high_min_exclusive": self.thresholds.high_min_exclusive}
        d["profile"] = self.profile.value
        d["subset_override"] = (None if self.subset_override is None
                                else list(self.subset_override))
        d["level_subsets"] = (None if not self.level_subsets else
                              {str(k): list(v) for k, v in sorted(
                                  self.level_subsets.items(), key=lambda kv: kv[0].rank)})
        return d


@dataclass(frozen=True)
class ScoreRecord:
    user_id: str      # claimed identity (template owner)
    score: float
    probe: str        # probe path relative to the dataset root


@dataclass
class ScoreSet:
    genuine: list[ScoreRecord] = field(default_factory=list)
    skilled: list[ScoreRecord] = field(default_factory=list)
    random: list[ScoreRecord] = field(default_factory=list)
    levels: dict[str, ComplexityLevel] = field(default_factory=dict)
    stroke_counts: dict[str, list[int]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def per_user_counts(self) -> dict[str, tuple[int, int, int]]:
        out = {u: [0, 0, 0] for u in self.levels}
        for k, recs in enumerate((self.genuine, self.skilled, self.random)):
            for r in recs:
                out[r.user_id][k] += 1
        return {u: tuple(v) for u, v in out.items()}


def _rel(entry: ManifestEntry, root: Path) -> str:
    try:
        return entry.path.relative_to(root).as_posix()
    except ValueError:
        return entry.path.as_posix()


def time_functions_for(entry: ManifestEntry, cfg: RunConfig) -> TimeFunctionMatrix:
    return compute_time_functions(preprocess(entry.load(), normalize_first=cfg.normalize_first))


def enrollment_for(user: UserEntries, modality: Modality) -> list[ManifestEntry]:
    return user.select(modality=modality, label=Label.GENUINE, session=1)[:ENROLLMENT_SIZE]


def stroke_count(entry: ManifestEntry, cfg: RunConfig) -> int:
    dec = decompose_signature(entry.load(), snr_target=cfg.ln_snr_target,
                              amp_threshold=cfg.ln_amp_threshold)
    return count_strokes(dec, cfg.ln_amp_threshold)


def user_level(enroll, cfg: RunConfig) -> tuple[ComplexityLevel, list[int]]:
    counts = [stroke_count(e, cfg) for e in enroll]
    return classify_user(counts, cfg.thresholds), counts


def build_template(user_id: str, enroll, cfg: RunConfig, level=None, counts=None,
                   features=None) -> tuple[UserTemplate, list[int]]:
    if len(enroll) != ENROLLMENT_SIZE:
        raise InsufficientEnrollment(
            f"user {user_id}: {len(enroll)} enrollment signatures, need {ENROLLMENT_SIZE}")
    if level is None:
        level, counts = user_level(enroll, cfg)
    subset = cfg.subset_for(level)
    refs = tuple(features(e) if features else time_functions_for(e, cfg) for e in enroll)
    return UserTemplate(user_id, refs, level, subset, cfg.profile), counts


def _random_probe(user: UserEntries, modality: Modality) -> ManifestEntry | None:
    cands = user.select(modality=modality, label=Label.GENUINE)
    return cands[0] if cands else None


def _score_user(args):
    """Worker: every comparison against one claimed user's template."""
    user, random_probes, cfg, root = args
    train, test = cfg.modalities
    enroll = enrollment_for(user, train)
    if len(enroll) < ENROLLMENT_SIZE:
        return user.user_id, None, None, [], [], []
    template, counts = build_template(user.user_id, enroll, cfg)

    def score(feats, rel):
        s, _ = verify(template, feats, cfg.dtw_band, cfg.dtw_norm)
        return ScoreRecord(user.user_id, s, rel)

    genuine = [score(time_functions_for(e, cfg), _rel(e, root))
               for e in user.select(modality=test, label=Label.GENUINE, min_session=2)]
    skilled = [score(time_functions_for(e, cfg), _rel(e, root))
               for e in user.select(modality=test, label=Label.SKILLED)]
    rnd = [score(feats, rel) for owner, rel, feats in random_probes
           if owner != user.user_id]
    return user.user_id, template.complexity, counts, genuine, skilled, rnd


def run_protocol(manifest: DatasetManifest, cfg: RunConfig = RunConfig(),
                 split: str = "eval", workers: int = 1) -> ScoreSet:
    """Score every evaluation user against genuine, skilled and random probes.

    The template uses the first four session-1 genuine signatures in the
    training modality; genuine probes are later-session genuines in the test
    modality; random probes are the first test-modality genuine of every other
    user in the split. Results are ordered by user id regardless of
    ``workers``.
    """
    users = manifest.split(split)
    if not users:
        raise EmptyEvaluationSplit(f"no users in the {split} split")
    _, test = cfg.modalities
    if not any(u.select(modality=test) for u in users):
        raise EmptyEvaluationSplit(
            f"no {test.value} signatures in the {split} split (scenario {cfg.scenario})")
    random_probes = []
    for u in users:
        p = _random_probe(u, test)
        if p is not None:
            random_probes.append((u.user_id, _rel(p, manifest.root), time_functions_for(p, cfg)))
    jobs = [(u, random_probes, cfg, manifest.root) for u in users]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_score_user, jobs))
    else:
        results = [_score_user(j) for j in jobs]

    out = ScoreSet()
    for user_id, level, counts, g, s, r in sorted(results, key=lambda x: x[0]):
        if level is None:
            logger.warning("skipping %s: fewer than %d enrollment signatures",
                           user_id, ENROLLMENT_SIZE)
            out.skipped.append(user_id)
            continue
        out.levels[user_id] = level
        out.stroke_counts[user_id] = counts
        out.genuine += g
        out.skilled += s
        out.random += r
    if not (out.genuine or out.skilled or out.random):
        raise EmptyEvaluationSplit(f"no comparisons possible for scenario {cfg.scenario}")
    return out


# -- development-set selection ---------------------------------------------

@dataclass
class DevUser:
    user_id: str
    level: ComplexityLevel
    references: list[TimeFunctionMatrix]
    genuine: list[TimeFunctionMatrix]
    skilled: list[TimeFunctionMatrix]


def prepare_dev_users(manifest: DatasetManifest, cfg: RunConfig,
                      split: str = "dev") -> list[DevUser]:
    """Full 21-channel features for every usable user of ``split``."""
    train, test = cfg.modalities
    out = []
    for user in manifest.split(split):
        enroll = enrollment_for(user, train)
        if len(enroll) < ENROLLMENT_SIZE:
            logger.warning("dev user %s skipped: too few enrollment signatures", user.user_id)
            continue
        level, _ = user_level(enroll, cfg)
        out.append(DevUser(
            user.user_id, level, [time_functions_for(e, cfg) for e in enroll],
            [time_functions_for(e, cfg) for e in user.select(
                modality=test, label=Label.GENUINE, min_session=2)],
            [time_functions_for(e, cfg) for e in user.select(
                modality=test, label=Label.SKILLED)]))
    return out


def subset_evaluator(dev_users: list[DevUser], cfg: RunConfig):
    """Skilled-forgery EER of a channel subset over ``dev_users``."""
    from .matcher import score
    from .timefunctions import select_channels

    def evaluate(subset) -> float:
        g, s = [], []
        for u in dev_users:
            refs = [select_channels(r, subset) for r in u.references]
            for probes, sink in ((u.genuine, g), (u.skilled, s)):
                for p in probes:
                    q = select_channels(p, subset)
                    sink.append(math.fsum(score(r, q, cfg.dtw_band, cfg.dtw_norm).s
                                          for r in refs) / len(refs))
        return compute_eer(g, s)[0]

    return evaluate


def select_level_subsets(manifest: DatasetManifest, cfg: RunConfig, max_size: int = 10,
                         candidates=None, dev_users=None) -> dict:
    """Run floating selection per complexity level on the development split.

    Levels without usable development users (or without both genuine and
    skilled probes) are absent from the result and fall back to defaults.
    """
    from .selection import sffs
    from .timefunctions import ALL_CHANNELS

    if dev_users is None:
        dev_users = prepare_dev_users(manifest, cfg)
    pool = ALL_CHANNELS if candidates is None else FeatureSubset(candidates)
    out = {}
    for lv in LEVELS:
        members = [u for u in dev_users if u.level is lv]
        if not any(u.genuine for u in members) or not any(u.skilled for u in members):
            logger.info("no development data for %s complexity; keeping defaults", lv.value)
            continue
        out[lv] = sffs(pool, subset_evaluator(members, cfg), max_size)
    return out


# -- reporting -------------------------------------------------------------

@dataclass
class LevelSummary:
    n_users: int
    n_genuine: int
    n_skilled: int
    n_random: int
    eer_skilled: float | None
    eer_random: float | None
    lognormals_mean: float | None
    lognormals_std: float | None

    @property
    def n_comparisons(self) -> int:
        return self.n_genuine + self.n_skilled + self.n_random


@dataclass
class EvaluationReport:
    per_level: dict[ComplexityLevel, LevelSummary]
    pooled: LevelSummary
    curves: dict[str, dict[str, list[float]]]       # kind -> threshold/far/frr
    frr_at_far: dict[str, list[tuple[float, float]]]
    config_echo: dict

    def to_dict(self) -> dict:
        def summ(s: LevelSummary):
            d = asdict(s)
            d["n_comparisons"] = s.n_comparisons
            return d
        return {
            "config": self.config_echo,
            "per_level": {lv.value: summ(s) for lv, s in sorted(
                self.per_level.items(), key=lambda kv: kv[0].rank)},
            "pooled": summ(self.pooled),
            "frr_at_far": {k: [list(p) for p in v] for k, v in self.frr_at_far.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_text(self) -> str:
        def pct(v):
            return "-" if v is None else f"{100 * v:.2f}"

        def num(v):
            return "-" if v is None else f"{v:.2f}"

        lines = ["# complexity-adapted verification report", "", "[config]"]
        for k, v in sorted(self.config_echo.items()):
            lines.append(f"{k} = {json.dumps(v, sort_keys=True)}")
        lines += ["", "[eer]",
                  "level\tusers\tgenuine\tskilled\trandom\teer_skilled_%\teer_random_%"
                  "\tlognormals_mean\tlognormals_std"]
        rows = [(lv.value, s) for lv, s in sorted(self.per_level.items(),
                                                  key=lambda kv: kv[0].rank)]
        rows.append(("pooled", self.pooled))
        for name, s in rows:
            lines.append("\t".join([name, str(s.n_users), str(s.n_genuine), str(s.n_skilled),
                                    str(s.n_random), pct(s.eer_skilled), pct(s.eer_random),
                                    num(s.lognormals_mean), num(s.lognormals_std)]))
        lines += ["", "[frr_at_far]", "impostors\tfar_%\tfrr_%"]
        for kind, pts in self.frr_at_far.items():
            for far, frr in pts:
                lines.append(f"{kind}\t{100 * far:.2f}\t{100 * frr:.2f}")
        return "\n".join(lines) + "\n"

    def curve_csv(self, kind: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "far", "frr"])
        c = self.curves[kind]
        for t, a, r in zip(c["threshold"], c["far"], c["frr"]):
            w.writerow([repr(t), repr(a), repr(r)])
        return buf.getvalue()


def _eer_or_none(g, imp):
    if not g or not imp:
        return None
    return compute_eer(g, imp)[0]


def _summary(users, scores: ScoreSet) -> LevelSummary:
    users = set(users)
    g = [r.score for r in scores.genuine if r.user_id in users]
    s = [r.score for r in scores.skilled if r.user_id in users]
    r = [x.score for x in scores.random if x.user_id in users]
    counts = [n for u in sorted(users) for n in scores.stroke_counts.get(u, [])]
    mean, std = enrollment_stability(counts) if counts else (None, None)
    return LevelSummary(len(users), len(g), len(s), len(r),
                        _eer_or_none(g, s), _eer_or_none(g, r), mean, std)


def report(scores: ScoreSet, levels: dict | None = None, config_echo: dict | None = None,
           far_grid=DEFAULT_FAR_GRID) -> EvaluationReport:
    """Per-level and pooled EERs, FAR/FRR curves and FRR at fixed FARs.

    A level with no users is left out; an EER whose impostor list is empty is
    reported as absent (None), never as zero.
    """
    levels = scores.levels if levels is None else levels
    scored = {r.user_id for r in scores.genuine + scores.skilled + scores.random}
    missing = sorted(scored - set(levels))
    if missing:
        raise MissingLevel(f"no complexity level for users {missing}")
    per_level = {}
    for lv in LEVELS:
        users = [u for u in scored if ComplexityLevel(levels[u]) is lv]
        if users:
            per_level[lv] = _summary(users, scores)
    pooled = _summary(scored, scores)
    curves, frr_at = {}, {}
    g = [r.score for r in scores.genuine]
    for kind, recs in (("skilled", scores.skilled), ("random", scores.random)):
        imp = [r.score for r in recs]
        if g and imp:
            thr, far, frr = error_curve(g, imp)
            curves[kind] = {"threshold": [float(x) for x in thr],
                            "far": [float(x) for x in far], "frr": [float(x) for x in frr]}
            frr_at[kind] = far_frr_curve(g, imp, far_grid)
    return EvaluationReport(per_level, pooled, curves, frr_at, config_echo or {})


def write_report(rep: EvaluationReport, out_dir, figures: bool = True,
                 scores: ScoreSet | None = None) -> list[Path]:
    """Write report.txt, report.json, per-impostor curve CSVs and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (("report.txt", rep.to_text()), ("report.json", rep.to_json())):
        (out / name).write_text(text, encoding="utf-8")
        written.append(out / name)
    for kind in rep.curves:
        p = out / f"curve_{kind}.csv"
        p.write_text(rep.curve_csv(kind), encoding="utf-8")
        written.append(p)
    if scores is not None:
        p = out / "scores.tsv"
        lines = ["kind\tclaimed_user\tprobe\tscore"]
        for kind in ("genuine", "skilled", "random"):
            for r in getattr(scores, kind):
                lines.append(f"{kind}\t{r.user_id}\t{r.probe}\t{r.score!r}")
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(p)
    if figures:
        from .plotting import render_report_figures
        written += render_report_figures(rep, out, scores)
    return written
