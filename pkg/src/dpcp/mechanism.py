"""Differentially private quantile release over a finite bin grid.

The mechanism scores every candidate output (a bin right endpoint) by
how badly it fails as a level-q quantile of the discretized scores:

    w_j = max( #{[s_i] < e_j} / q ,  #{[s_i] > e_j} / (1 - q) )

and samples edge ``e_j`` with probability proportional to
``exp(-epsilon * min(q, 1 - q) * w_j)``; at the median this is the
familiar ``exp(-epsilon * w_j / 2)``. The normalization matters:
removing one score moves any ``w_j`` by at most ``1 / min(q, 1 - q)``
and never upward, so scaling the exponent by ``min(q, 1 - q)`` is
exactly what makes the output distribution epsilon-differentially
private, at every level, with respect to removal or insertion of a
single calibration example. (One-sided monotonicity of the counts is
what removes the usual factor of two from the exponential-mechanism
bound.)

At q = 1 the convention ``c / 0 = 0 if c == 0 else +inf`` applies:
every edge below some data point gets weight +inf and probability 0,
and the mechanism picks uniformly among edges at or above the largest
discretized score, the continuous limit of q -> 1. The q = 1 query
degenerates (its sensitivity is unbounded), so no privacy claim is
made there; calibration only reaches it through the level cap.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from dpcp import rng
from dpcp.errors import InternalCheckError, InvalidArgumentError
from dpcp.scores import BinGrid, ScoreSet, discretize


@dataclass(frozen=True)
class QuantileQuery:
    """Level q in (0, 1], privacy budget epsilon > 0, and the output grid."""

    q: float
    epsilon: float
    grid: BinGrid

    def __post_init__(self):
        if not (isinstance(self.q, (int, float)) and 0.0 < float(self.q) <= 1.0):
            raise InvalidArgumentError(f"quantile level must be in (0, 1], got {self.q!r}")
        if not (isinstance(self.epsilon, (int, float)) and float(self.epsilon) > 0.0):
            raise InvalidArgumentError(f"epsilon must be positive, got {self.epsilon!r}")
        if not isinstance(self.grid, BinGrid):
            raise InvalidArgumentError("query needs a BinGrid")
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass(frozen=True)
class MechanismDistribution:
    """Exact output distribution of one private quantile query.

    ``support[j]`` is a bin right endpoint, ``weights[j]`` its quantile
    violation (may be +inf at q = 1), ``probabilities[j]`` the exact
    sampling probability, proportional to
    ``exp(-epsilon * min(q, 1 - q) * weights[j])``. Probabilities are
    normalized in a numerically stable way: the minimal weight is
    subtracted before exponentiation, so extreme epsilon cannot
    overflow.
    """

    support: np.ndarray
    weights: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        for name in ("support", "weights", "probabilities"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.support.shape == self.weights.shape == self.probabilities.shape):
            raise InternalCheckError("distribution arrays must align")
        if np.any(self.weights < 0.0):
            raise InternalCheckError("quantile violation weights cannot be negative")
        if abs(float(np.sum(self.probabilities)) - 1.0) > 1e-9:
            raise InternalCheckError("mechanism probabilities must sum to one")


def _bin_indices(scores: ScoreSet, grid: BinGrid) -> np.ndarray:
    """0-based bin index of each discretized score, validating grid membership."""
    if scores.discretized is None:
        raise InvalidArgumentError("scores must be discretized on the query grid first")
    disc = scores.discretized
    idx = np.searchsorted(grid.support, disc, side="left")
    if np.any(idx >= grid.m) or (disc.size and np.any(grid.support[np.minimum(idx, grid.m - 1)] != disc)):
        raise InvalidArgumentError("scores are not discretized on this grid")
    return idx


def mechanism_weights(scores: ScoreSet, query: QuantileQuery) -> MechanismDistribution:
    """Exact violation weights and sampling probabilities for one query.

    Parameters
    ----------
    scores : ScoreSet
        Must carry discretized values lying on ``query.grid``. An empty
        set is allowed and yields the uniform distribution.
    query : QuantileQuery

    Returns
    -------
    MechanismDistribution
    """
    grid = query.grid
    idx = _bin_indices(scores, grid)
    counts = np.bincount(idx, minlength=grid.m).astype(float)
    cum = np.cumsum(counts)
    below = cum - counts  # strictly below e_j
    above = float(scores.n) - cum  # strictly above e_j

    lower_term = below / query.q
    if query.q == 1.0:
        upper_term = np.where(above > 0.0, np.inf, 0.0)
    else:
        upper_term = above / (1.0 - query.q)
    weights = np.maximum(lower_term, upper_term)

    # Stable softmax: the top edge always has finite weight, so the
    # minimum is finite and the shifted exponent is bounded above by 0.
    # The min(q, 1-q) factor is the inverse weight sensitivity; it is
    # what makes the ratio bound exactly exp(epsilon). At q = 1 it
    # degenerates to 0 and blocked edges keep probability 0.
    coeff = query.epsilon * min(query.q, 1.0 - query.q)
    shifted = weights - np.min(weights)
    blocked = np.isinf(shifted)
    raw = np.where(blocked, 0.0, np.exp(-coeff * np.where(blocked, 0.0, shifted)))
    probabilities = raw / np.sum(raw)
    return MechanismDistribution(grid.support, weights, probabilities)


def quantile_from_uniform(dist: MechanismDistribution, u: float) -> float:
    """Invert the distribution's CDF at ``u``: smallest edge with CDF >= u."""
    if not 0.0 <= u < 1.0:
        raise InvalidArgumentError(f"uniform draw must lie in [0, 1), got {u!r}")
    cdf = np.cumsum(dist.probabilities)
    j = int(np.searchsorted(cdf, u, side="left"))
    j = min(j, dist.support.size - 1)  # guard the float-rounding tail
    return float(dist.support[j])


def sample_private_quantile(scores: ScoreSet, query: QuantileQuery, rng_seed: int) -> float:
    """Draw one bin edge from the mechanism distribution.

    Consumes exactly one uniform variate from the generator keyed by
    ``rng_seed`` and inverts the CDF, so equal seeds give equal output
    for equal inputs.
    """
    dist = mechanism_weights(scores, query)
    u = float(rng.generator(rng_seed).uniform())
    return quantile_from_uniform(dist, u)


def _is_removal_neighbor(larger: np.ndarray, smaller: np.ndarray) -> bool:
    gap = Counter(larger.tolist())
    gap.subtract(Counter(smaller.tolist()))
    return all(v >= 0 for v in gap.values()) and sum(gap.values()) == 1


def dp_ratio(scores: ScoreSet, neighbor: ScoreSet, query: QuantileQuery) -> float:
    """Worst-case output probability ratio between two neighboring score sets.

    The sets must differ by removal of exactly one raw score. Both are
    discretized on ``query.grid`` before comparison. For an
    epsilon-differentially private mechanism the result never exceeds
    exp(epsilon); this function computes the exact ratio so tests can
    check that bound without sampling noise.
    """
    a, b = scores.raw, neighbor.raw
    if abs(a.size - b.size) != 1:
        raise InvalidArgumentError("neighboring score sets must differ by exactly one entry")
    big, small = (a, b) if a.size > b.size else (b, a)
    if not _is_removal_neighbor(big, small):
        raise InvalidArgumentError("neighboring score sets must agree on all shared entries")
    p1 = mechanism_weights(discretize(scores, query.grid), query).probabilities
    p2 = mechanism_weights(discretize(neighbor, query.grid), query).probabilities
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(p1 > 0.0, p1 / p2, 0.0)
    return float(np.max(ratios))
