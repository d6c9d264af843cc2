"""Private calibration of a prediction-set cutoff.

Split conformal calibration asks for the ceil((n+1)(1-alpha))-th
smallest calibration score. Releasing that order statistic privately
costs accuracy twice: the mechanism can miss the target rank, and the
grid can only represent finitely many values. Both losses are absorbed
by querying an inflated level

    adjusted = (n + 1)(1 - alpha) / (n (1 - gamma * alpha))
               + (2 / (epsilon * n)) * log(m / (gamma * alpha)),

capped at 1, where gamma in (0, 1) splits the miscoverage budget
between the conformal part and the mechanism's failure probability.
With the cutoff drawn at this level, marginal coverage of the resulting
prediction sets is at least 1 - alpha in finite samples.

``gamma_star`` picks gamma by minimizing the adjusted level in closed
form; ``tune_m_star`` picks the bin count by simulating the whole
pipeline on synthetic scores and keeping the candidate with the lowest
mean cutoff. Smaller cutoffs mean smaller prediction sets, so both
knobs tighten the sets without touching the coverage guarantee.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from dpcp import rng
from dpcp.errors import InvalidArgumentError
from dpcp.mechanism import QuantileQuery, mechanism_weights, quantile_from_uniform, sample_private_quantile
from dpcp.scores import ScoreSet, discretize, uniform_grid

GAMMA_FLOOR = 1e-12

# Default bin-count candidates: 50 log-spaced integers from 1e2 to 1e6.
TUNING_GRID_SIZE = 50
TUNING_GRID_RANGE = (100, 1_000_000)


def _check_core_params(n: int, alpha: float, epsilon: float) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"calibration size must be a positive integer, got {n!r}")
    if not (isinstance(alpha, (int, float)) and 0.0 < float(alpha) < 1.0):
        raise InvalidArgumentError(f"miscoverage level must be in (0, 1), got {alpha!r}")
    if float(alpha) >= 0.5:
        warnings.warn(
            f"miscoverage level {float(alpha)} is unusually large; the guarantee "
            "still holds but the calibrated sets will be very small",
            UserWarning,
            stacklevel=3,
        )
    if not (isinstance(epsilon, (int, float)) and float(epsilon) > 0.0):
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon!r}")


@dataclass(frozen=True)
class CalibConfig:
    """Resolved calibration parameters, including the derived level.

    ``adjusted_level`` is stored uncapped; the level actually queried is
    ``min(adjusted_level, 1)``. Keeping the raw value visible makes it
    obvious when a configuration has run out of budget (level >= 1 means
    the mechanism is pushed to the top of the grid).
    """

    alpha: float
    epsilon: float
    gamma: float
    m: int
    adjusted_level: float

    @property
    def level_used(self) -> float:
        return min(self.adjusted_level, 1.0)


@dataclass(frozen=True)
class Threshold:
    """A privately calibrated cutoff plus everything needed to re-derive it."""

    cutoff: float
    config: CalibConfig
    n: int
    seed: int


def adjusted_quantile(n: int, alpha: float, epsilon: float, gamma: float, m: int) -> float:
    """Quantile level to query so that privacy noise cannot break coverage.

    Returns the uncapped value; callers cap at 1. The value is strictly
    decreasing in n and epsilon and strictly increasing in m: more data
    or more budget lets the query sit closer to the non-private level,
    while a finer grid costs a little more union bound.
    """
    _check_core_params(n, alpha, epsilon)
    if not (isinstance(gamma, (int, float)) and 0.0 < float(gamma) < 1.0):
        raise InvalidArgumentError(f"budget split must be in (0, 1), got {gamma!r}")
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidArgumentError(f"number of bins must be a positive integer, got {m!r}")
    n_, alpha_, eps_, gamma_ = float(n), float(alpha), float(epsilon), float(gamma)
    conformal = (n_ + 1.0) * (1.0 - alpha_) / (n_ * (1.0 - gamma_ * alpha_))
    privacy = (2.0 / (eps_ * n_)) * math.log(float(m) / (gamma_ * alpha_))
    return conformal + privacy


def gamma_star(n: int, alpha: float, epsilon: float, m: int) -> float:
    """Budget split minimizing the adjusted level for fixed n, alpha, epsilon, m.

    Setting the level's gamma-derivative to zero gives the quadratic

        alpha^2 g^2 - (alpha (1-alpha) epsilon (n+1) / 2 + 2 alpha) g + 1 = 0.

    Real roots inside (0, 1) are candidate minimizers; the floor value
    1e-12 is always a candidate as well, which covers the case where
    both roots fall outside the interval. Among candidates the one with
    the smallest adjusted level wins, ties going to the smaller gamma.
    """
    _check_core_params(n, alpha, epsilon)
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidArgumentError(f"number of bins must be a positive integer, got {m!r}")
    a = float(alpha) ** 2
    b = -(float(alpha) * (1.0 - float(alpha)) * float(epsilon) * (n + 1.0) / 2.0 + 2.0 * float(alpha))
    c = 1.0
    candidates = [GAMMA_FLOOR]
    disc = b * b - 4.0 * a * c
    if disc >= 0.0:
        # b < 0 always, so -b + sqrt(disc) is the well-conditioned sum.
        s = -b + math.sqrt(disc)
        for root in (s / (2.0 * a), 2.0 * c / s):
            if 0.0 < root < 1.0:
                candidates.append(root)
    candidates.sort()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # large-alpha warning already issued
        levels = [adjusted_quantile(n, alpha, epsilon, g, m) for g in candidates]
    return candidates[int(np.argmin(levels))]


def default_tuning_grid() -> np.ndarray:
    """Log-spaced bin-count candidates used when no grid is supplied."""
    lo, hi = TUNING_GRID_RANGE
    pts = np.geomspace(lo, hi, TUNING_GRID_SIZE)
    return np.unique(np.rint(pts).astype(int))


def tune_objective(n: int, alpha: float, epsilon: float, m: int, trials: int, seed: int) -> float:
    """Mean privately calibrated cutoff over simulated uniform score draws.

    This is the quantity ``tune_m_star`` minimizes. Trial ``t`` draws
    its scores from ``substream(seed, TUNING_DRAW, t)`` and its
    mechanism uniform from ``substream(seed, TUNING_MECHANISM, t)``,
    neither keyed by ``m``, so every candidate bin count sees the same
    randomness and the comparison is paired.
    """
    if isinstance(trials, bool) or not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InvalidArgumentError(f"trials must be a positive integer, got {trials!r}")
    g = gamma_star(n, alpha, epsilon, m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        level = min(adjusted_quantile(n, alpha, epsilon, g, m), 1.0)
    grid = uniform_grid(m)
    query = QuantileQuery(level, epsilon, grid)
    total = 0.0
    for t in range(int(trials)):
        draws = ScoreSet(rng.substream(seed, rng.TUNING_DRAW, t).uniform(size=n))
        dist = mechanism_weights(discretize(draws, grid), query)
        u = float(rng.substream(seed, rng.TUNING_MECHANISM, t).uniform())
        total += quantile_from_uniform(dist, u)
    return total / float(trials)


def tune_m_star(
    n: int,
    alpha: float,
    epsilon: float,
    grid: np.ndarray | None = None,
    trials: int = 20,
    seed: int = 0,
) -> tuple[int, float]:
    """Pick the bin count with the lowest simulated mean cutoff.

    Parameters
    ----------
    n, alpha, epsilon : calibration size, miscoverage level, budget.
    grid : optional iterable of candidate bin counts; defaults to
        :func:`default_tuning_grid`.
    trials : simulated calibrations per candidate (common random
        numbers across candidates).
    seed : root seed for the simulation streams.

    Returns
    -------
    (m_star, gamma_star) : winning bin count (ties to the smaller one)
        and its optimal budget split.
    """
    _check_core_params(n, alpha, epsilon)
    if grid is None:
        candidates = default_tuning_grid()
    else:
        candidates = np.unique(np.asarray(grid, dtype=int))
        if candidates.size == 0 or np.any(candidates < 1):
            raise InvalidArgumentError("bin-count candidates must be positive integers")
    if isinstance(trials, bool) or not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InvalidArgumentError(f"trials must be a positive integer, got {trials!r}")
    best_m, best_value = None, math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for m in candidates:
            value = tune_objective(n, alpha, epsilon, int(m), trials, seed)
            if value < best_value:
                best_m, best_value = int(m), value
    return best_m, gamma_star(n, alpha, epsilon, best_m)


def calibrate(
    scores: ScoreSet,
    alpha: float,
    epsilon: float,
    m: int | None = None,
    gamma: float | None = None,
    seed: int = 0,
    tune_trials: int = 20,
    tuning_grid: np.ndarray | None = None,
) -> Threshold:
    """Calibrate a private prediction-set cutoff on raw scores.

    Omitted knobs are tuned: without ``m`` the bin count is chosen by
    :func:`tune_m_star` (on synthetic scores only, so the choice spends
    no privacy budget), and without ``gamma`` the split is
    :func:`gamma_star`. The mechanism seed and the tuning seed are both
    derived from ``seed``, so the whole call is reproducible from the
    returned Threshold.
    """
    if scores.n == 0:
        raise InvalidArgumentError("no scores")
    n = scores.n
    _check_core_params(n, alpha, epsilon)
    if m is None:
        tuned_m, tuned_gamma = tune_m_star(
            n, alpha, epsilon, grid=tuning_grid, trials=tune_trials,
            seed=rng.derive_seed(seed, rng.TUNING_DRAW),
        )
        m = tuned_m
        if gamma is None:
            gamma = tuned_gamma
    elif gamma is None:
        gamma = gamma_star(n, alpha, epsilon, m)
    level = adjusted_quantile(n, alpha, epsilon, gamma, m)
    grid = uniform_grid(m)
    query = QuantileQuery(min(level, 1.0), epsilon, grid)
    cutoff = sample_private_quantile(
        discretize(scores, grid), query, rng.derive_seed(seed, rng.MECHANISM_DRAW)
    )
    config = CalibConfig(float(alpha), float(epsilon), float(gamma), int(m), level)
    return Threshold(cutoff=cutoff, config=config, n=n, seed=rng.validate_seed(seed))
