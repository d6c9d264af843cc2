"""Forming and evaluating prediction sets from a calibrated cutoff.

A label enters the set when its conformity score is at or below the
cutoff. The comparison is non-strict so that coverage is monotone in
the cutoff and exact grid values behave predictably.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from dpcp.calibrate import Threshold
from dpcp.errors import InvalidArgumentError


@dataclass(frozen=True)
class PredictionSet:
    """Labels admitted for one example, with the cutoff that admitted them."""

    included_labels: tuple[int, ...]
    cutoff: float

    @property
    def size(self) -> int:
        return len(self.included_labels)


@dataclass(frozen=True)
class CoverageFragment:
    """Exact coverage tally: ``covered / total`` kept as integers.

    The float ``coverage`` is provided for convenience; the integers are
    the authoritative value and survive serialization exactly.
    """

    covered: int
    total: int

    @property
    def coverage(self) -> float:
        return self.covered / self.total

    @property
    def exact(self) -> Fraction:
        return Fraction(self.covered, self.total)


def _cutoff_value(threshold) -> float:
    if isinstance(threshold, Threshold):
        return float(threshold.cutoff)
    if isinstance(threshold, (int, float)) and not isinstance(threshold, bool):
        value = float(threshold)
        if 0.0 <= value <= 1.0:
            return value
        raise InvalidArgumentError(f"cutoff must lie in [0, 1], got {value!r}")
    raise InvalidArgumentError(f"expected a Threshold or a cutoff in [0, 1], got {threshold!r}")


def form_set(label_scores, threshold) -> PredictionSet:
    """Prediction set for one example.

    Parameters
    ----------
    label_scores : per-label conformity scores in [0, 1], one per class.
    threshold : a :class:`Threshold` or a bare cutoff value.

    Returns
    -------
    PredictionSet with the indices of all labels whose score is <= cutoff.
    """
    cutoff = _cutoff_value(threshold)
    s = np.asarray(label_scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise InvalidArgumentError("label scores must form a nonempty vector")
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise InvalidArgumentError("label scores must lie in [0, 1]")
    included = tuple(int(i) for i in np.flatnonzero(s <= cutoff))
    return PredictionSet(included_labels=included, cutoff=cutoff)


def evaluate(test_scores, threshold) -> CoverageFragment:
    """Fraction of true-label test scores at or below the cutoff."""
    cutoff = _cutoff_value(threshold)
    s = np.asarray(test_scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise InvalidArgumentError("need at least one test score")
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise InvalidArgumentError("test scores must lie in [0, 1]")
    return CoverageFragment(covered=int(np.sum(s <= cutoff)), total=int(s.size))


def set_size_histogram(score_rows, threshold) -> dict[int, int]:
    """Histogram of prediction-set sizes over a matrix of per-label scores."""
    cutoff = _cutoff_value(threshold)
    rows = np.asarray(score_rows, dtype=float)
    if rows.ndim != 2 or rows.size == 0:
        raise InvalidArgumentError("score rows must form a nonempty matrix")
    if np.any(rows < 0.0) or np.any(rows > 1.0):
        raise InvalidArgumentError("label scores must lie in [0, 1]")
    sizes = np.sum(rows <= cutoff, axis=1)
    return {int(k): int(v) for k, v in sorted(Counter(sizes.tolist()).items())}
