"""DTW matching of time-function sequences and four-reference user templates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .complexity import ComplexityLevel
from .errors import (
    ChannelMismatch,
    EmptySequence,
    ProfileMismatch,
    SubsetMismatch,
    TemplateFormatError,
)
from .selection import Profile
from .timefunctions import FeatureSubset, TimeFunctionMatrix, select_channels

ENROLLMENT_SIZE = 4

# backtrack codes, also the tie preference order
_DIAG, _UP, _LEFT = 0, 1, 2


@numba.njit(cache=True)
def _local(a, b, i, j):
    s = 0.0
    for c in range(a.shape[0]):
        d = a[c, i] - b[c, j]
        s += d * d
    return math.sqrt(s)


@numba.njit(cache=True)
def _in_band(i, j, la, lb, band):
    if band < 0:
        return True
    if la == 1 or lb == 1:
        return True
    return abs(i * (lb - 1) / (la - 1) - j) <= band


@numba.njit(cache=True)
def _dtw_rows(a, b, band):
    """Accumulated cost and node count of the best (cost, length) path."""
    la, lb = a.shape[1], b.shape[1]
    inf = np.inf
    prev_c = np.full(lb, inf)
    prev_n = np.zeros(lb, np.int64)
    cur_c = np.full(lb, inf)
    cur_n = np.zeros(lb, np.int64)
    for i in range(la):
        for j in range(lb):
            if not _in_band(i, j, la, lb, band):
                cur_c[j] = inf
                cur_n[j] = 0
                continue
            if i == 0 and j == 0:
                cur_c[j] = _local(a, b, 0, 0)
                cur_n[j] = 1
                continue
            best_c = inf
            best_n = 0
            # candidates in tie-preference order: diagonal, vertical, horizontal
            if i > 0 and j > 0 and prev_c[j - 1] < inf:
                best_c = prev_c[j - 1]
                best_n = prev_n[j - 1]
            if i > 0 and prev_c[j] < inf:
                if prev_c[j] < best_c or (prev_c[j] == best_c and prev_n[j] < best_n):
                    best_c = prev_c[j]
                    best_n = prev_n[j]
            if j > 0 and cur_c[j - 1] < inf:
                if cur_c[j - 1] < best_c or (cur_c[j - 1] == best_c and cur_n[j - 1] < best_n):
                    best_c = cur_c[j - 1]
                    best_n = cur_n[j - 1]
            if best_c == inf:
                cur_c[j] = inf
                cur_n[j] = 0
            else:
                cur_c[j] = _local(a, b, i, j) + best_c
                cur_n[j] = best_n + 1
        prev_c, cur_c = cur_c, prev_c
        prev_n, cur_n = cur_n, prev_n
    return prev_c[lb - 1], prev_n[lb - 1]


@numba.njit(cache=True)
def _dtw_full(a, b, band):
    la, lb = a.shape[1], b.shape[1]
    inf = np.inf
    acc = np.full((la, lb), inf)
    nodes = np.zeros((la, lb), np.int64)
    move = np.full((la, lb), -1, np.int8)
    for i in range(la):
        for j in range(lb):
            if not _in_band(i, j, la, lb, band):
                continue
            if i == 0 and j == 0:
                acc[0, 0] = _local(a, b, 0, 0)
                nodes[0, 0] = 1
                continue
            best_c = inf
            best_n = 0
            best_m = -1
            if i > 0 and j > 0 and acc[i - 1, j - 1] < inf:
                best_c = acc[i - 1, j - 1]
                best_n = nodes[i - 1, j - 1]
                best_m = 0
            if i > 0 and acc[i - 1, j] < inf:
                c, n = acc[i - 1, j], nodes[i - 1, j]
                if c < best_c or (c == best_c and n < best_n):
                    best_c, best_n, best_m = c, n, 1
            if j > 0 and acc[i, j - 1] < inf:
                c, n = acc[i, j - 1], nodes[i, j - 1]
                if c < best_c or (c == best_c and n < best_n):
                    best_c, best_n, best_m = c, n, 2
            if best_m >= 0:
                acc[i, j] = _local(a, b, i, j) + best_c
                nodes[i, j] = best_n + 1
                move[i, j] = best_m
    return acc, nodes, move


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, TimeFunctionMatrix):
        m = m.values
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ChannelMismatch("expected a channels x samples matrix")
    return np.ascontiguousarray(arr)


def _check(a, b):
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape[0] != b.shape[0] or a.shape[0] < 1:
        raise ChannelMismatch(f"channel counts differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[1] < 1 or b.shape[1] < 1:
        raise EmptySequence("sequences must contain at least one sample")
    return a, b


@dataclass(frozen=True)
class DTWResult:
    distance: float      # accumulated cost / path normaliser
    accumulated: float
    path_length: int     # node count

    @property
    def score(self) -> float:
        return math.exp(-self.distance)


def _normalise(acc, nodes, norm):
    if norm == "nodes":
        return acc / nodes
    if norm == "steps":
        return acc / max(nodes - 1, 1)
    raise ValueError(f"unknown normalisation {norm!r}")


def dtw(a, b, band: int | None = None, norm: str = "nodes") -> DTWResult:
    """Full boundary-anchored DTW with unit-weight steps and Euclidean local cost.

    Among equal-cost optimal paths the one with fewest nodes is used; its node
    count (or step count with ``norm="steps"``) normalises the cost.
    ``band`` restricts |i*(Lb-1)/(La-1) - j| to at most ``band`` samples.
    """
    a, b = _check(a, b)
    acc, nodes = _dtw_rows(a, b, -1 if band is None else int(band))
    if not np.isfinite(acc):
        raise ValueError("band too narrow: no admissible path")
    return DTWResult(_normalise(float(acc), int(nodes), norm), float(acc), int(nodes))


def dtw_distance(a, b, band=None, norm="nodes") -> tuple[float, int]:
    r = dtw(a, b, band, norm)
    return r.distance, r.path_length


def dtw_path(a, b, band=None) -> tuple[float, list[tuple[int, int]]]:
    """Accumulated cost and the chosen warping path (0-based index pairs)."""
    a, b = _check(a, b)
    acc, _, move = _dtw_full(a, b, -1 if band is None else int(band))
    i, j = a.shape[1] - 1, b.shape[1] - 1
    if not np.isfinite(acc[i, j]):
        raise ValueError("band too narrow: no admissible path")
    path = [(i, j)]
    while (i, j) != (0, 0):
        m = move[i, j]
        if m == _DIAG:
            i, j = i - 1, j - 1
        elif m == _UP:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    return float(acc[-1, -1]), path[::-1]


@dataclass(frozen=True)
class ComparisonScore:
    s: float
    d_normalized: float


def score(a, b, band=None, norm="nodes") -> ComparisonScore:
    r = dtw(a, b, band, norm)
    return ComparisonScore(r.score, r.distance)


# -- templates -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UserTemplate:
    user_id: str
    references: tuple[TimeFunctionMatrix, ...]
    complexity: ComplexityLevel
    subset: FeatureSubset
    modality_profile: Profile

    def __post_init__(self):
        refs = tuple(self.references)
        if len(refs) != ENROLLMENT_SIZE:
            raise ValueError(f"a template holds exactly {ENROLLMENT_SIZE} references")
        subset = FeatureSubset(self.subset)
        refs = tuple(r if r.channel_ids == tuple(subset) else select_channels(r, subset)
                     for r in refs)
        object.__setattr__(self, "references", refs)
        object.__setattr__(self, "subset", subset)
        object.__setattr__(self, "complexity", ComplexityLevel(self.complexity))
        object.__setattr__(self, "modality_profile", Profile(self.modality_profile))
        if " " in self.user_id or not self.user_id:
            raise ValueError("user ids must be non-empty and contain no spaces")

    def to_text(self) -> str:
        out = [f"TPL1 {self.user_id} {self.complexity.value} "
               f"{self.modality_profile.value} {self.subset.csv()}"]
        for k, ref in enumerate(self.references):
            out.append(f"REF {k} {ref.length}")
            for row in ref.values:
                out.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "UserTemplate":
        lines = text.rstrip("\n").split("\n")
        head = lines[0].split(" ")
        if len(head) != 5 or head[0] != "TPL1":
            raise TemplateFormatError(
                "expected 'TPL1 <user_id> <complexity> <profile> <subset-csv>'")
        try:
            subset = FeatureSubset.parse(head[4])
            level = ComplexityLevel(head[2])
            profile = Profile(head[3])
        except ValueError as exc:
            raise TemplateFormatError(str(exc)) from None
        refs = []
        pos = 1
        c = len(subset)
        while pos < len(lines):
            tag = lines[pos].split(" ")
            if len(tag) != 3 or tag[0] != "REF" or int(tag[1]) != len(refs):
                raise TemplateFormatError(f"line {pos + 1}: expected 'REF {len(refs)} <length>'")
            n = int(tag[2])
            rows = lines[pos + 1:pos + 1 + c]
            if len(rows) != c:
                raise TemplateFormatError(f"line {pos + 1}: truncated reference block")
            values = np.array([[float(v) for v in r.split(" ")] for r in rows])
            if values.shape != (c, n):
                raise TemplateFormatError(f"line {pos + 1}: block shape {values.shape}")
            refs.append(TimeFunctionMatrix(values, tuple(subset)))
            pos += 1 + c
        try:
            return cls(head[1], tuple(refs), level, subset, profile)
        except ValueError as exc:
            raise TemplateFormatError(str(exc)) from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "UserTemplate":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def verify(template: UserTemplate, probe: TimeFunctionMatrix, band=None,
           norm="nodes", profile: Profile | str | None = None):
    """Mean of the four one-to-one scores, plus the individual scores.

    A probe carrying more channels than the template (e.g. all 21) is reduced
    to the template subset; a probe lacking any of them is rejected.
    """
    if profile is not None and Profile(profile) is not template.modality_profile:
        raise ProfileMismatch(
            f"template built for {template.modality_profile.value} profile, "
            f"verification requested with {Profile(profile).value}")
    if probe.channel_ids != tuple(template.subset):
        if not set(template.subset) <= set(probe.channel_ids):
            raise SubsetMismatch(
                f"probe channels {list(probe.channel_ids)} do not cover "
                f"template subset {list(template.subset)}")
        probe = select_channels(probe, template.subset)
    per_ref = [score(ref, probe, band, norm).s for ref in template.references]
    # fsum keeps the mean independent of reference order
    return math.fsum(per_ref) / len(per_ref), per_ref
