"""Complexity levels from lognormal stroke counts, with per-user majority voting."""
from __future__ import annotations

import enum
import functools
import statistics
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyEnrollment


@functools.total_ordering
class ComplexityLevel(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __lt__(self, other):
        if not isinstance(other, ComplexityLevel):
            return NotImplemented
        return self.rank < other.rank

    def __str__(self):
        return self.value


_RANK = {ComplexityLevel.LOW: 0, ComplexityLevel.MEDIUM: 1, ComplexityLevel.HIGH: 2}
LEVELS = (ComplexityLevel.LOW, ComplexityLevel.MEDIUM, ComplexityLevel.HIGH)


@dataclass(frozen=True)
class ComplexityThresholds:
    """``n <= low_max`` is low, ``n > high_min_exclusive`` is high."""

    low_max: int = 17
    high_min_exclusive: int = 27

    def __post_init__(self):
        if not 0 < self.low_max < self.high_min_exclusive:
            raise ValueError("thresholds must satisfy 0 < low_max < high_min_exclusive")


DEFAULT_THRESHOLDS = ComplexityThresholds()


def classify_signature(n_lognormals: int,
                       th: ComplexityThresholds = DEFAULT_THRESHOLDS) -> ComplexityLevel:
    if n_lognormals < 0:
        raise ValueError("stroke count cannot be negative")
    if n_lognormals <= th.low_max:
        return ComplexityLevel.LOW
    if n_lognormals > th.high_min_exclusive:
        return ComplexityLevel.HIGH
    return ComplexityLevel.MEDIUM


def classify_user(enrollment_counts, th: ComplexityThresholds = DEFAULT_THRESHOLDS
                  ) -> ComplexityLevel:
    """Majority vote over enrollment signatures; ties go to the lower level."""
    counts = list(enrollment_counts)
    if not counts:
        raise EmptyEnrollment("no enrollment signatures")
    votes = Counter(classify_signature(n, th) for n in counts)
    top = max(votes.values())
    return min(level for level, c in votes.items() if c == top)


def enrollment_stability(enrollment_counts) -> tuple[float, float]:
    """Mean and population standard deviation of a user's stroke counts."""
    counts = list(enrollment_counts)
    if not counts:
        raise EmptyEnrollment("no enrollment signatures")
    return float(statistics.fmean(counts)), float(statistics.pstdev(counts))
