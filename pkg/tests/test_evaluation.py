import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigcomplex.complexity import ComplexityLevel
from sigcomplex.errors import EmptyEvaluationSplit, EmptyScoreList, MissingLevel
from sigcomplex.evaluation import (
    RunConfig,
    ScoreRecord,
    ScoreSet,
    compute_eer,
    error_curve,
    far_frr_curve,
    prepare_dev_users,
    report,
    run_protocol,
    select_level_subsets,
    subset_evaluator,
    write_report,
)
from sigcomplex.signal_io import load_manifest
from sigcomplex.synth import generate_dataset
from sigcomplex.timefunctions import ALL_CHANNELS


def test_eer_separated():
    assert compute_eer([0.9, 0.8, 0.7], [0.1, 0.2, 0.3])[0] == 0.0


def test_eer_three_by_three():
    eer, _ = compute_eer([0.9, 0.8, 0.3], [0.7, 0.2, 0.1])
    assert eer == pytest.approx(1 / 3, abs=1e-15)


def test_eer_identical_lists():
    scores = [0.1, 0.4, 0.4, 0.9]
    assert compute_eer(scores, scores)[0] == 0.5


def test_eer_empty():
    with pytest.raises(EmptyScoreList):
        compute_eer([], [0.1])


def test_frr_at_far_separated():
    pts = far_frr_curve([0.9, 0.8, 0.7], [0.1, 0.2, 0.3], [0.0, 0.01, 0.5, 1.0])
    assert [frr for _, frr in pts] == [0.0, 0.0, 0.0, 0.0]


def test_frr_at_far_three_by_three():
    # threshold 0.3 admits one impostor of three and rejects no genuine score
    pts = dict(far_frr_curve([0.9, 0.8, 0.3], [0.7, 0.2, 0.1], [1 / 3, 1.0, 0.0]))
    assert pts[1 / 3] == 0.0
    assert pts[1.0] == 0.0
    assert pts[0.0] == pytest.approx(1 / 3)


def test_frr_at_far_rejects_bad_target():
    with pytest.raises(ValueError):
        far_frr_curve([0.5], [0.4], [1.5])


score_lists = st.lists(st.floats(0, 1), min_size=1, max_size=60)


@settings(max_examples=100, deadline=None)
@given(score_lists, score_lists)
def test_curves_monotone_and_bounded(g, i):
    thr, far, frr = error_curve(g, i)
    assert np.all(np.diff(thr) > 0)
    assert np.all(np.diff(far) <= 0) and np.all(np.diff(frr) >= 0)
    assert far[0] == 1.0 and frr[-1] == 1.0 and far[-1] == 0.0
    eer, _ = compute_eer(g, i)
    assert 0.0 <= eer <= 1.0


@settings(max_examples=100, deadline=None)
@given(score_lists, score_lists)
def test_eer_invariant_to_rescaling(g, i):
    a, _ = compute_eer(g, i)
    b, _ = compute_eer(2 * np.array(g), 2 * np.array(i))
    assert a == pytest.approx(b, abs=1e-12)


def _scores(levels, genuine, skilled, rnd):
    s = ScoreSet(levels=levels, stroke_counts={u: [12] * 4 for u in levels})
    s.genuine = [ScoreRecord(u, v, f"{u}/g{k}") for k, (u, v) in enumerate(genuine)]
    s.skilled = [ScoreRecord(u, v, f"{u}/s{k}") for k, (u, v) in enumerate(skilled)]
    s.random = [ScoreRecord(u, v, f"{u}/r{k}") for k, (u, v) in enumerate(rnd)]
    return s


def test_single_level_report_equals_pooled():
    low = ComplexityLevel.LOW
    s = _scores({"a": low, "b": low}, [("a", .9), ("b", .8)], [("a", .5), ("b", .85)],
                [("a", .1), ("b", .2)])
    rep = report(s)
    assert list(rep.per_level) == [low]
    assert rep.per_level[low] == rep.pooled


def test_missing_skilled_reported_as_absent():
    s = _scores({"a": ComplexityLevel.LOW, "b": ComplexityLevel.HIGH},
                [("a", .9), ("b", .8)], [("a", .5)], [("a", .1), ("b", .2)])
    rep = report(s)
    assert rep.per_level[ComplexityLevel.HIGH].eer_skilled is None
    assert rep.per_level[ComplexityLevel.HIGH].eer_random == 0.0
    assert "\t-\t" in rep.to_text()
    assert rep.to_dict()["per_level"]["high"]["eer_skilled"] is None


def test_missing_level_for_scored_user():
    s = _scores({"a": ComplexityLevel.LOW}, [("a", .9), ("b", .8)], [], [])
    with pytest.raises(MissingLevel):
        report(s)


@pytest.fixture(scope="module")
def protocol_scores(small_dataset):
    return run_protocol(load_manifest(small_dataset), RunConfig())


def test_ebiosign_counts(protocol_scores):
    counts = protocol_scores.per_user_counts()
    assert len(counts) == 6
    assert set(counts.values()) == {(4, 6, 5)}


def test_random_probes_come_from_other_users(protocol_scores):
    for r in protocol_scores.random:
        assert not r.probe.startswith(r.user_id + "/")
    for r in protocol_scores.genuine:
        assert r.probe.startswith(r.user_id + "/pen_s2_g")


def test_same_user_scores_above_other_users(protocol_scores):
    wins = total = 0
    for u in protocol_scores.levels:
        g = [r.score for r in protocol_scores.genuine if r.user_id == u]
        r = [x.score for x in protocol_scores.random if x.user_id == u]
        wins += sum(gi > ri for gi in g for ri in r)
        total += len(g) * len(r)
    assert wins / total >= 0.95


def test_levels_match_generator(protocol_scores, small_dataset):
    truth = {}
    for line in (small_dataset / "ground_truth.tsv").read_text().splitlines()[1:]:
        path, _, level = line.split("\t")
        truth[path.split("/")[0]] = level
    assert {u: lv.value for u, lv in protocol_scores.levels.items()} == truth


def test_report_files(protocol_scores, tmp_path):
    rep = report(protocol_scores, config_echo=RunConfig().echo())
    written = write_report(rep, tmp_path, figures=True, scores=protocol_scores)
    names = {p.name for p in written}
    assert {"report.txt", "report.json", "curve_skilled.csv", "curve_random.csv",
            "scores.tsv", "far_frr.png", "det.png", "eer_by_level.png",
            "lognormal_counts.png"} <= names
    assert (tmp_path / "curve_skilled.csv").read_text().startswith("threshold,far,frr\n")
    for kind, c in rep.curves.items():
        assert all(b <= a for a, b in zip(c["far"], c["far"][1:]))
        assert all(b >= a for a, b in zip(c["frr"], c["frr"][1:]))


def test_biosecurid_counts(tmp_path):
    root = generate_dataset(tmp_path, seed=3, n_users=3, shape="biosecurid", dev_fraction=0.0,
                            level_strokes={ComplexityLevel.MEDIUM: (10, 12),
                                           ComplexityLevel.HIGH: (10, 12)})
    scores = run_protocol(load_manifest(root), RunConfig())
    assert set(scores.per_user_counts().values()) == {(12, 12, 2)}


def test_mixed_scenarios(mixed_dataset):
    m = load_manifest(mixed_dataset)
    pf = run_protocol(m, RunConfig(scenario="pen-finger"))
    assert all("/finger_" in r.probe for r in pf.genuine + pf.skilled + pf.random)
    fp = run_protocol(m, RunConfig(scenario="finger-pen"))
    assert all("/pen_" in r.probe for r in fp.genuine + fp.skilled + fp.random)
    assert set(pf.per_user_counts().values()) == {(4, 6, 3)}


def test_pen_only_manifest_has_no_finger_probes(small_dataset):
    with pytest.raises(EmptyEvaluationSplit):
        run_protocol(load_manifest(small_dataset), RunConfig(scenario="pen-finger"))
    with pytest.raises(EmptyEvaluationSplit):
        run_protocol(load_manifest(small_dataset), RunConfig(), split="dev")


def test_dev_selection_not_worse_than_all_channels(small_dataset):
    m = load_manifest(small_dataset)
    cfg = RunConfig(dtw_band=40)
    dev = prepare_dev_users(m, cfg, split="eval")
    chosen = select_level_subsets(m, cfg, max_size=2, dev_users=dev)
    assert chosen
    for level, res in chosen.items():
        members = [u for u in dev if u.level is level]
        assert res.dev_eer <= subset_evaluator(members, cfg)(ALL_CHANNELS)
        assert len(res.subset) <= 2
