import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigcomplex.complexity import ComplexityLevel
from sigcomplex.errors import (
    ChannelMismatch,
    EmptySequence,
    ProfileMismatch,
    SubsetMismatch,
    TemplateFormatError,
)
from sigcomplex.matcher import UserTemplate, dtw, dtw_distance, dtw_path, score, verify
from sigcomplex.timefunctions import TimeFunctionMatrix


def brute_force_dtw(a, b):
    """Minimum accumulated cost over every monotone path, by recursion."""
    la, lb = a.shape[1], b.shape[1]

    def cost(i, j):
        return math.sqrt(sum((a[c, i] - b[c, j]) ** 2 for c in range(a.shape[0])))

    @lru_cache(maxsize=None)
    def best(i, j):
        if i == 0 and j == 0:
            return cost(0, 0)
        prev = []
        if i > 0:
            prev.append(best(i - 1, j))
        if j > 0:
            prev.append(best(i, j - 1))
        if i > 0 and j > 0:
            prev.append(best(i - 1, j - 1))
        return cost(i, j) + min(prev)

    return best(la - 1, lb - 1)


def test_single_cell():
    r = dtw([[0.0]], [[3.0]])
    assert (r.accumulated, r.path_length, r.distance) == (3.0, 1, 3.0)
    assert r.score == pytest.approx(math.exp(-3), rel=1e-15)
    assert r.score == pytest.approx(0.0498, abs=1e-4)


def test_two_by_two():
    acc, path = dtw_path([[0.0, 0.0]], [[0.0, 1.0]])
    assert acc == 1.0 and path == [(0, 0), (1, 1)]
    d, nodes = dtw_distance([[0.0, 0.0]], [[0.0, 1.0]])
    assert (d, nodes) == (0.5, 2)
    assert score([[0.0, 0.0]], [[0.0, 1.0]]).s == pytest.approx(0.6065, abs=1e-4)


def test_step_normalization():
    r = dtw([[0.0, 0.0]], [[0.0, 1.0]], norm="steps")
    assert r.distance == 1.0
    assert dtw([[0.0]], [[3.0]], norm="steps").distance == 3.0


matrices = st.integers(1, 3).flatmap(lambda c: st.tuples(
    st.lists(st.lists(st.floats(-5, 5), min_size=c, max_size=c), min_size=1, max_size=6),
    st.lists(st.lists(st.floats(-5, 5), min_size=c, max_size=c), min_size=1, max_size=6)))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_matches_exhaustive_and_is_symmetric(pair):
    a, b = (np.array(m).T for m in pair)
    r = dtw(a, b)
    assert r.accumulated == pytest.approx(brute_force_dtw(a, b), rel=1e-12, abs=1e-12)
    back = dtw(b, a)
    assert abs(back.distance - r.distance) <= 1e-12
    assert back.path_length == r.path_length
    assert dtw(a, a).distance == 0.0


@settings(max_examples=50, deadline=None)
@given(matrices)
def test_path_is_valid_and_costs_add_up(pair):
    a, b = (np.array(m).T for m in pair)
    acc, path = dtw_path(a, b)
    assert path[0] == (0, 0) and path[-1] == (a.shape[1] - 1, b.shape[1] - 1)
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}
    local = sum(np.linalg.norm(a[:, i] - b[:, j]) for i, j in path)
    assert local == pytest.approx(acc, rel=1e-12, abs=1e-12)
    assert len(path) == dtw(a, b).path_length


def test_band_restricts_paths():
    a = np.array([[0.0, 0, 0, 0, 5, 5]])
    b = np.array([[0.0, 5, 5, 5, 5, 5]])
    free = dtw(a, b)
    banded = dtw(a, b, band=0)
    assert banded.path_length == 6
    assert banded.accumulated >= free.accumulated
    with pytest.raises(ValueError):
        dtw(np.zeros((1, 6)), np.zeros((1, 2)), band=0)


def test_input_errors():
    with pytest.raises(ChannelMismatch):
        dtw(np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(EmptySequence):
        dtw(np.zeros((1, 0)), np.zeros((1, 3)))


def _tfm(seed, length=20, channels=(1, 2, 3)):
    rng = np.random.default_rng(seed)
    return TimeFunctionMatrix(rng.normal(size=(len(channels), length)), tuple(channels))


def _template(refs, subset=(1, 2, 3), profile="office"):
    return UserTemplate("u1", tuple(refs), ComplexityLevel.MEDIUM, subset, profile)


def test_probe_equal_to_all_references_scores_one():
    ref = _tfm(0)
    s, per_ref = verify(_template([ref] * 4), ref)
    assert s == 1.0 and per_ref == [1.0] * 4


def test_own_reference_scores_one_against_itself():
    refs = [_tfm(k) for k in range(4)]
    _, per_ref = verify(_template(refs), refs[2])
    assert per_ref[2] == 1.0
    assert max(per_ref[:2] + per_ref[3:]) < 1.0


def test_final_score_is_mean():
    # references built so the per-reference scores are exactly 0.2, 0.4, 0.6, 0.8
    probe = TimeFunctionMatrix(np.zeros((1, 1)), (1,))
    refs = [TimeFunctionMatrix(np.array([[-math.log(p)]]), (1,)) for p in (0.2, 0.4, 0.6, 0.8)]
    s, per_ref = verify(_template(refs, subset=(1,)), probe)
    np.testing.assert_allclose(per_ref, [0.2, 0.4, 0.6, 0.8], rtol=1e-14)
    assert s == pytest.approx(0.5, abs=1e-15)


def test_mean_independent_of_reference_order():
    refs = [_tfm(k) for k in range(4)]
    probe = _tfm(9)
    a, _ = verify(_template(refs), probe)
    b, _ = verify(_template(refs[::-1]), probe)
    assert a == b


def test_profile_and_subset_checks():
    refs = [_tfm(k) for k in range(4)]
    t = _template(refs)
    with pytest.raises(ProfileMismatch):
        verify(t, refs[0], profile="mobile")
    with pytest.raises(SubsetMismatch):
        verify(t, _tfm(1, channels=(1, 2)))
    wide = _tfm(5, channels=tuple(range(1, 22)))
    s, _ = verify(t, wide)
    assert 0 < s <= 1


def test_template_text_round_trip_is_exact(tmp_path):
    refs = [_tfm(k, length=10 + k) for k in range(4)]
    t = _template(refs, profile="mobile")
    path = tmp_path / "u1.tpl"
    t.save(path)
    back = UserTemplate.load(path)
    assert back.to_text() == t.to_text()
    assert back.subset == t.subset and back.complexity is t.complexity
    for r0, r1 in zip(t.references, back.references):
        assert np.array_equal(r0.values, r1.values)


def test_template_needs_four_references():
    with pytest.raises(ValueError):
        _template([_tfm(0)] * 3)
    with pytest.raises(TemplateFormatError):
        UserTemplate.from_text("TPL1 u1 medium office\n")
