"""Score containers and discretization onto finite bin grids.

Conformity scores are reals in [0, 1]; lower means the candidate label
agrees better with the model. The private quantile mechanism can only
output one of finitely many values, so raw scores are first rounded up
to the right endpoint of the grid bin that contains them. Rounding up
(never down) is what lets the calibrated cutoff keep its coverage
guarantee after discretization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dpcp.errors import InvalidArgumentError


@dataclass(frozen=True)
class BinGrid:
    """Partition of [0, 1] into bins ``(edges[j-1], edges[j]]``.

    ``edges`` has length m + 1, starts at exactly 0.0, ends at exactly
    1.0 and is strictly increasing. The first bin is closed on the left
    as well, so a score of exactly 0 belongs to bin 1.
    """

    edges: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise InvalidArgumentError("grid needs at least two edges (one bin)")
        if edges[0] != 0.0 or edges[-1] != 1.0:
            raise InvalidArgumentError(
                f"grid edges must run from 0.0 to 1.0, got [{edges[0]}, {edges[-1]}]"
            )
        if not np.all(np.diff(edges) > 0.0):
            raise InvalidArgumentError("grid edges must be strictly increasing")
        edges.flags.writeable = False
        object.__setattr__(self, "edges", edges)

    @property
    def m(self) -> int:
        """Number of bins."""
        return self.edges.size - 1

    @property
    def support(self) -> np.ndarray:
        """Right endpoints ``edges[1:]``, the only values a mechanism can output."""
        return self.edges[1:]

    @property
    def max_width(self) -> float:
        return float(np.max(np.diff(self.edges)))


def uniform_grid(m: int) -> BinGrid:
    """Grid with m equal-width bins, edges j/m for j = 0..m."""
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidArgumentError(f"number of bins must be a positive integer, got {m!r}")
    edges = np.arange(int(m) + 1, dtype=float) / float(m)
    edges[-1] = 1.0
    return BinGrid(edges)


@dataclass(frozen=True)
class ScoreSet:
    """Immutable batch of scores, optionally with their discretized values.

    ``raw`` entries must lie in [0, 1]; construction validates rather
    than clamps, so a bad entry is reported by index instead of being
    silently moved. ``discretized`` is filled by :func:`discretize` and
    aligns with ``raw`` elementwise.
    """

    raw: np.ndarray
    discretized: np.ndarray | None = field(default=None)

    def __post_init__(self):
        raw = np.array(self.raw, dtype=float)
        if raw.ndim != 1:
            raise InvalidArgumentError("scores must form a one-dimensional array")
        bad = np.flatnonzero(~((raw >= 0.0) & (raw <= 1.0)))
        if bad.size:
            i = int(bad[0])
            raise InvalidArgumentError(f"score at index {i} is outside [0, 1]: {raw[i]!r}")
        raw.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        if self.discretized is not None:
            disc = np.array(self.discretized, dtype=float)
            if disc.shape != raw.shape:
                raise InvalidArgumentError("discretized scores must align with raw scores")
            disc.flags.writeable = False
            object.__setattr__(self, "discretized", disc)

    @property
    def n(self) -> int:
        return self.raw.size


def discretize(scores: ScoreSet, grid: BinGrid) -> ScoreSet:
    """Round each score up to the right endpoint of its grid bin.

    A score equal to an edge stays put; a score of exactly 0 maps to the
    first bin's right endpoint. The result never decreases any score and
    is idempotent: values already on the grid map to themselves.
    """
    idx = np.searchsorted(grid.edges, scores.raw, side="left")
    np.maximum(idx, 1, out=idx)  # score 0.0 belongs to bin 1 by convention
    return ScoreSet(raw=scores.raw, discretized=grid.edges[idx])


def softmax_score(probabilities, label: int) -> float:
    """Conformity score of ``label`` under a probability vector: 1 - p[label]."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidArgumentError("probabilities must form a nonempty vector")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    if isinstance(label, bool) or not isinstance(label, (int, np.integer)):
        raise InvalidArgumentError(f"label must be an integer, got {label!r}")
    if not 0 <= label < p.size:
        raise InvalidArgumentError(f"label {label} out of range for {p.size} classes")
    return float(1.0 - p[label])


def true_label_scores(probabilities, labels) -> np.ndarray:
    """Row-wise ``1 - probabilities[i, labels[i]]`` for a probability table."""
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels)
    if p.ndim != 2:
        raise InvalidArgumentError("probability table must be two-dimensional")
    if y.shape != (p.shape[0],):
        raise InvalidArgumentError("labels must align with probability rows")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0 or y.max() >= p.shape[1]):
        raise InvalidArgumentError("labels must be integers in [0, n_classes)")
    return 1.0 - p[np.arange(p.shape[0]), y]
