"""Command-line entry point: ``sigcomplex <command> [options]``.

Exit codes: 0 on success, 1 for usage or contract errors, 2 for I/O and data
errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import errors
from .complexity import ComplexityLevel, ComplexityThresholds, classify_signature
from .evaluation import (
    SCENARIOS,
    RunConfig,
    build_template,
    report,
    run_protocol,
    select_level_subsets,
    write_report,
)
from .lognormal import count_strokes, decompose_signature
from .matcher import ENROLLMENT_SIZE, UserTemplate, verify
from .preprocess import preprocess
from .selection import Profile
from .signal_io import Label, ManifestEntry, Modality, load_manifest, read_signature
from .synth import FORGERY_SCALE, LEVEL_STROKES, SHAPES, generate_dataset
from .timefunctions import FeatureSubset, compute_time_functions

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

logger = logging.getLogger("sigcomplex")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; usage errors here are 1
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _stroke_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO-HI, got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"invalid stroke range {text!r}")
    return lo, hi


def _subset(text: str) -> FeatureSubset:
    try:
        return FeatureSubset.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    """Shared options; on subcommands they only override when given."""
    def d(v):
        return argparse.SUPPRESS if suppress else v

    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="seed for all randomness")
    g.add_argument("--profile", choices=[x.value for x in Profile], default=d(None),
                   help="capture profile selecting the default subsets (default office)")
    g.add_argument("--cx-low-max", type=int, default=d(17),
                   help="largest lognormal count classified low")
    g.add_argument("--cx-high-min", type=int, default=d(27),
                   help="counts above this are classified high")
    g.add_argument("--dtw-norm", choices=["nodes", "steps"], default=d("nodes"))
    g.add_argument("--dtw-band", type=int, default=d(None),
                   help="warping band half-width in samples (default unconstrained)")
    g.add_argument("--ln-amp-threshold", type=float, default=d(0.025),
                   help="stroke peak relative to profile peak needed to count")
    g.add_argument("--ln-snr-target", type=float, default=d(25.0),
                   help="decomposition stops at this reconstruction SNR (dB)")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sigcomplex",
                     description="Complexity-adapted on-line signature verification.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_globals(p, suppress=True)
        return p

    p = cmd("synth", "generate a synthetic lognormal signature dataset")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--users", type=int, default=12)
    p.add_argument("--shape", choices=sorted(SHAPES), default="ebiosign",
                   help="sessions and samples per user, after the named database")
    p.add_argument("--finger", action="store_true", help="also write finger signatures")
    for lv in ComplexityLevel:
        lo, hi = LEVEL_STROKES[lv]
        p.add_argument(f"--{lv.value}-strokes", type=_stroke_range, default=None,
                       metavar="LO-HI", help=f"strokes for {lv.value} users (default {lo}-{hi})")
    p.add_argument("--forgery-scale", type=float, default=FORGERY_SCALE,
                   help="forgery jitter as a multiple of genuine jitter")
    p.add_argument("--dev-fraction", type=float, default=0.4)

    p = cmd("decompose", "fit a sum of lognormal strokes to a signature's speed")
    p.add_argument("signature", type=Path)
    p.add_argument("-o", "--out", type=Path, help="write the stroke table here")

    p = cmd("complexity", "print lognormal count and complexity level per file")
    p.add_argument("signatures", type=Path, nargs="+")

    p = cmd("enroll", "build a user template from four genuine signatures")
    p.add_argument("user_id")
    p.add_argument("signatures", type=Path, nargs="+")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--subset", type=_subset, help="channel subset overriding the defaults")
    p.add_argument("--normalize-first", action="store_true",
                   help="z-score coordinates before resampling")

    p = cmd("verify", "score a probe signature against a template")
    p.add_argument("template", type=Path)
    p.add_argument("probe", type=Path)
    p.add_argument("--threshold", type=float, required=True,
                   help="accept when the score is at least this value")
    p.add_argument("--normalize-first", action="store_true")

    p = cmd("select", "floating forward channel selection per complexity level")
    p.add_argument("dataset", type=Path, help="directory holding manifest.tsv")
    p.add_argument("--scenario", choices=SCENARIOS, default="pen-pen")
    p.add_argument("--max-size", type=int, default=10)
    p.add_argument("-o", "--out", type=Path, help="write one selection trace per level")

    p = cmd("evaluate", "run the verification protocol and write the report")
    p.add_argument("dataset", type=Path, help="directory holding manifest.tsv")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--scenario", choices=SCENARIOS, default="pen-pen")
    p.add_argument("--split", default="eval")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--subset", type=_subset, help="one channel subset for every level")
    p.add_argument("--select", action="store_true",
                   help="pick per-level subsets on the dev split first")
    p.add_argument("--max-size", type=int, default=10)
    p.add_argument("--normalize-first", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _thresholds(a) -> ComplexityThresholds:
    try:
        return ComplexityThresholds(a.cx_low_max, a.cx_high_min)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(a, **extra) -> RunConfig:
    return RunConfig(
        thresholds=_thresholds(a), profile=Profile(a.profile or "office"),
        dtw_band=a.dtw_band, dtw_norm=a.dtw_norm, ln_amp_threshold=a.ln_amp_threshold,
        ln_snr_target=a.ln_snr_target, seed=a.seed,
        normalize_first=getattr(a, "normalize_first", False), **extra)


def _entry(path: Path) -> ManifestEntry:
    # single files outside a manifest: canonical files carry their own
    # metadata, headerless tablet files are taken as session-1 pen genuines
    return ManifestEntry("-", "-", path, Modality.PEN, 1, Label.GENUINE, 0)


# -- commands --------------------------------------------------------------

def cmd_synth(a, out) -> int:
    if a.users < 1:
        raise UsageError("--users must be at least 1")
    if not 0 <= a.dev_fraction < 1:
        raise UsageError("--dev-fraction must lie in [0, 1)")
    levels = {lv: getattr(a, f"{lv.value}_strokes") for lv in ComplexityLevel}
    mods = ("pen", "finger") if a.finger else ("pen",)
    root = generate_dataset(a.out_dir, a.seed, a.users, a.shape, mods,
                            {k: v for k, v in levels.items() if v},
                            forgery_scale=a.forgery_scale, dev_fraction=a.dev_fraction)
    print(f"wrote {a.users} users to {root} (seed {a.seed})", file=out)
    return EXIT_OK


def cmd_decompose(a, out) -> int:
    dec = decompose_signature(read_signature(a.signature), snr_target=a.ln_snr_target,
                              amp_threshold=a.ln_amp_threshold)
    text = dec.to_text()
    if a.out:
        a.out.write_text(text, encoding="utf-8")
        print(f"{a.signature}\t{count_strokes(dec, a.ln_amp_threshold)} strokes\t"
              f"snr {dec.snr_db:.2f} dB", file=out)
    else:
        out.write(text)
    return EXIT_OK


def cmd_complexity(a, out) -> int:
    th = _thresholds(a)
    for path in a.signatures:
        dec = decompose_signature(read_signature(path), snr_target=a.ln_snr_target,
                                  amp_threshold=a.ln_amp_threshold)
        n = count_strokes(dec, a.ln_amp_threshold)
        print(f"{path} {n} {classify_signature(n, th).value}", file=out)
    return EXIT_OK


def cmd_enroll(a, out) -> int:
    if len(a.signatures) != ENROLLMENT_SIZE:
        raise UsageError(f"enrollment needs exactly {ENROLLMENT_SIZE} signatures, "
                         f"got {len(a.signatures)}")
    cfg = _config(a, subset_override=a.subset)
    template, counts = build_template(a.user_id, [_entry(p) for p in a.signatures], cfg)
    template.save(a.out)
    print(f"{a.user_id} {template.complexity.value} strokes={','.join(map(str, counts))} "
          f"subset={template.subset.csv()} -> {a.out}", file=out)
    return EXIT_OK


def cmd_verify(a, out) -> int:
    template = UserTemplate.load(a.template)
    probe = compute_time_functions(preprocess(read_signature(a.probe),
                                              normalize_first=a.normalize_first))
    s, _ = verify(template, probe, a.dtw_band, a.dtw_norm, profile=a.profile)
    decision = "accept" if s >= a.threshold else "reject"
    print(f"{template.user_id} {s!r} {decision} --threshold {a.threshold!r}", file=out)
    return EXIT_OK


def cmd_select(a, out) -> int:
    cfg = _config(a, scenario=a.scenario)
    manifest = load_manifest(a.dataset)
    results = select_level_subsets(manifest, cfg, max_size=a.max_size)
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
    for lv, res in sorted(results.items(), key=lambda kv: kv[0].rank):
        print(f"{lv.value} {res.subset.csv()} dev_eer={res.dev_eer!r}", file=out)
        if a.out:
            (a.out / f"selection_{lv.value}.txt").write_text(
                f"seed {a.seed}\n" + res.to_text(), encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(a, out) -> int:
    if a.workers < 1:
        raise UsageError("--workers must be at least 1")
    if a.subset is not None and a.select:
        raise UsageError("--subset and --select are mutually exclusive")
    manifest = load_manifest(a.dataset)
    cfg = _config(a, scenario=a.scenario, subset_override=a.subset)
    if a.select:
        chosen = select_level_subsets(manifest, cfg, max_size=a.max_size)
        cfg = _config(a, scenario=a.scenario,
                      level_subsets={lv: r.subset for lv, r in chosen.items()})
    scores = run_protocol(manifest, cfg, split=a.split, workers=a.workers)
    rep = report(scores, config_echo=cfg.echo())
    write_report(rep, a.out, figures=not a.no_figures, scores=scores)
    out.write(rep.to_text())
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "decompose": cmd_decompose, "complexity": cmd_complexity,
    "enroll": cmd_enroll, "verify": cmd_verify, "select": cmd_select,
    "evaluate": cmd_evaluate,
}

# contract violations map to exit 1; everything about files and their content to 2
_CONTRACT = (UsageError, errors.ProfileMismatch, errors.InsufficientEnrollment,
             errors.IndexOutOfRange)
_DATA = (OSError, errors.SigComplexError, ValueError)


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        a = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a, out)
    except _CONTRACT as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
