"""Time-function subset selection: floating forward search and shipped defaults."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

from .complexity import ComplexityLevel
from .errors import EvaluatorFailure
from .timefunctions import FeatureSubset

MAX_SIZE = 10


class Profile(str, enum.Enum):
    OFFICE = "office"   # pen tablet, office-like capture
    MOBILE = "mobile"   # general-purpose touch device, pen and finger


# Channel groups per profile: selected for every level, for medium+high only,
# and for low+medium only.
DEFAULT_GROUPS = {
    Profile.OFFICE: {"all": (12, 15), "high": (10, 14, 17), "low": (19,)},
    Profile.MOBILE: {"all": (2, 7), "high": (8, 9, 15), "low": (1, 18)},
}


def default_subsets(profile, level) -> FeatureSubset:
    """Shipped per-level subset: union of the groups that cover ``level``."""
    groups = DEFAULT_GROUPS[Profile(profile)]
    level = ComplexityLevel(level)
    chosen = set(groups["all"])
    if level in (ComplexityLevel.MEDIUM, ComplexityLevel.HIGH):
        chosen |= set(groups["high"])
    if level in (ComplexityLevel.LOW, ComplexityLevel.MEDIUM):
        chosen |= set(groups["low"])
    return FeatureSubset(chosen)


@dataclass
class SelectionResult:
    subset: FeatureSubset
    dev_eer: float
    trace: list[tuple[int, str, int, float]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"subset {self.subset.csv()}", f"dev_eer {self.dev_eer!r}",
                 "step\taction\tindex\teer"]
        lines += [f"{s}\t{a}\t{i}\t{e!r}" for s, a, i, e in self.trace]
        return "\n".join(lines) + "\n"


class _Cached:
    """Memoising wrapper; evaluator errors are re-raised with the subset."""

    def __init__(self, fn):
        self.fn = fn
        self.cache: dict[tuple[int, ...], float] = {}

    def __call__(self, subset) -> float:
        key = tuple(sorted(subset))
        if key not in self.cache:
            try:
                self.cache[key] = float(self.fn(FeatureSubset(key)))
            except Exception as exc:
                raise EvaluatorFailure(key, exc) from exc
        return self.cache[key]


def _better(a, b):
    """Order for (eer, size, indices): lower eer, then smaller, then lower indices."""
    return (a[0], len(a[1]), a[1]) < (b[0], len(b[1]), b[1])


def sffs(candidates, dev_eval: Callable[[FeatureSubset], float],
         max_size: int = MAX_SIZE) -> SelectionResult:
    """Sequential forward floating selection minimising ``dev_eval``.

    Each round adds the feature giving the lowest EER (lowest index on ties).
    After an addition, features are dropped one at a time while the reduced
    subset beats the best subset of that size seen so far; the feature just
    added is not eligible for the first drop. Inclusion keeps going until
    ``max_size`` or the pool is exhausted, even through non-improving
    additions, and the best subset visited is returned.
    """
    pool = sorted(set(int(c) for c in candidates))
    FeatureSubset(pool)  # validates
    J = _Cached(dev_eval)
    current: tuple[int, ...] = ()
    best_at: dict[int, tuple[float, tuple[int, ...]]] = {}
    trace = []
    step = 0

    def record(subset, eer):
        k = len(subset)
        if k not in best_at or _better((eer, subset), best_at[k]):
            best_at[k] = (eer, subset)

    while len(current) < max_size:
        options = [c for c in pool if c not in current]
        if not options:
            break
        eer, added = min((J(current + (c,)), c) for c in options)
        current = tuple(sorted(current + (added,)))
        step += 1
        trace.append((step, "add", added, eer))
        record(current, eer)

        last = added
        while len(current) > 1:
            drops = [(J(tuple(c for c in current if c != d)), d)
                     for d in current if d != last]
            if not drops:
                break
            eer, dropped = min(drops)
            reduced = tuple(c for c in current if c != dropped)
            if not eer < best_at[len(reduced)][0]:
                break
            current = reduced
            step += 1
            trace.append((step, "remove", dropped, eer))
            record(current, eer)
            last = None

    if not best_at:
        raise ValueError("no subset could be evaluated")
    best = min(best_at.values(), key=lambda r: (r[0], len(r[1]), r[1]))
    return SelectionResult(FeatureSubset(best[1]), best[0], trace)


def greedy_forward(candidates, dev_eval, max_size: int = MAX_SIZE) -> SelectionResult:
    """Plain sequential forward selection with the same stopping and tie rules."""
    pool = sorted(set(int(c) for c in candidates))
    J = _Cached(dev_eval)
    current: tuple[int, ...] = ()
    cur_eer = float("inf")
    trace = []
    while len(current) < max_size:
        options = [c for c in pool if c not in current]
        if not options:
            break
        eer, added = min((J(current + (c,)), c) for c in options)
        if not eer < cur_eer:
            break
        current = tuple(sorted(current + (added,)))
        cur_eer = eer
        trace.append((len(trace) + 1, "add", added, eer))
    return SelectionResult(FeatureSubset(current), cur_eer, trace)


def exhaustive(candidates, dev_eval, max_size: int | None = None) -> SelectionResult:
    """Best subset by brute force; only sensible for small pools."""
    from itertools import combinations

    pool = sorted(set(int(c) for c in candidates))
    J = _Cached(dev_eval)
    top = len(pool) if max_size is None else min(max_size, len(pool))
    best = None
    for k in range(1, top + 1):
        for combo in combinations(pool, k):
            cand = (J(combo), combo)
            if best is None or _better(cand, best):
                best = cand
    return SelectionResult(FeatureSubset(best[1]), best[0], [])
