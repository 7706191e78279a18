from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigcomplex.errors import EvaluatorFailure
from sigcomplex.selection import default_subsets, exhaustive, greedy_forward, sffs

# best pair {2,3} is unreachable by plain forward selection from the best
# singleton {1}; every superset of {1} scores at least 0.22
FLOATING_TABLE = {
    (1,): .30, (2,): .35, (3,): .36, (4,): .40,
    (1, 2): .25, (1, 3): .27, (1, 4): .29, (2, 3): .10, (2, 4): .38, (3, 4): .39,
    (1, 2, 3): .22, (1, 2, 4): .24, (1, 3, 4): .26, (2, 3, 4): .15,
    (1, 2, 3, 4): .23,
}


def table_evaluator(table):
    return lambda subset: table[tuple(subset)]


def test_floating_step_recovers_best_pair():
    ev = table_evaluator(FLOATING_TABLE)
    res = sffs([1, 2, 3, 4], ev)
    assert tuple(res.subset) == (2, 3) and res.dev_eer == .10
    assert tuple(exhaustive([1, 2, 3, 4], ev).subset) == (2, 3)
    greedy = greedy_forward([1, 2, 3, 4], ev)
    assert tuple(greedy.subset) == (1, 2, 3) and greedy.dev_eer == .22
    assert any(action == "remove" for _, action, _, _ in res.trace)


def test_forced_singleton():
    def ev(subset):
        return 0.1 if tuple(subset) == (4,) else 0.2 + 0.01 * len(subset)
    assert tuple(sffs(range(1, 7), ev).subset) == (4,)


def random_table(seed, n):
    rng = np.random.default_rng(seed)
    pool = range(1, n + 1)
    return {c: float(rng.integers(0, 40)) / 100
            for k in range(1, n + 1) for c in combinations(pool, k)}


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_never_worse_than_greedy(seed, n):
    ev = table_evaluator(random_table(seed, n))
    pool = range(1, n + 1)
    s = sffs(pool, ev)
    assert s.dev_eer <= greedy_forward(pool, ev).dev_eer
    assert s.dev_eer >= exhaustive(pool, ev).dev_eer
    assert s.dev_eer == ev(tuple(s.subset))


def test_max_size_respected():
    res = sffs(range(1, 8), lambda s: 1.0 / (1 + len(s)), max_size=3)
    assert len(res.subset) == 3


def test_evaluator_failure_names_subset():
    def ev(subset):
        if 2 in subset:
            raise RuntimeError("boom")
        return 0.5
    with pytest.raises(EvaluatorFailure) as info:
        sffs([1, 2], ev)
    assert 2 in info.value.subset


@pytest.mark.parametrize("profile, level, expected", [
    ("office", "high", {10, 12, 14, 15, 17}),
    ("office", "medium", {10, 12, 14, 15, 17, 19}),
    ("office", "low", {12, 15, 19}),
    ("mobile", "low", {1, 2, 7, 18}),
    ("mobile", "medium", {1, 2, 7, 8, 9, 15, 18}),
    ("mobile", "high", {2, 7, 8, 9, 15}),
])
def test_default_subsets(profile, level, expected):
    assert set(default_subsets(profile, level)) == expected


def test_trace_text():
    res = sffs([1, 2, 3, 4], table_evaluator(FLOATING_TABLE))
    text = res.to_text()
    assert text.startswith("subset 2,3\ndev_eer 0.1\n")
