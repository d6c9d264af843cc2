"""Statistical verification of the calibration pipeline.

Everything here exists to check, at desk scale, the finite-sample
claims the calibrator relies on: marginal coverage of the private
cutoff from above and below, the rank accuracy of the quantile
mechanism, the order-statistic dominance argument behind the coverage
proof, and the privacy ratio bound itself. Experiments are seeded and
bit-identical across thread counts, so a report is a reproducible
artifact rather than a one-off run.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from dpcp import rng
from dpcp.calibrate import CalibConfig, adjusted_quantile, calibrate, gamma_star, tune_m_star
from dpcp.errors import InvalidArgumentError
from dpcp.laws import ClassifierLaw, parse_law
from dpcp.mechanism import QuantileQuery, dp_ratio, mechanism_weights
from dpcp.scores import BinGrid, ScoreSet, discretize, true_label_scores, uniform_grid

SIMPLIFIED_BOUND_CONSTANT = 5.0
DKW_TAIL = 0.001


def _check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def ceil_rank(n: int, q: float) -> int:
    """Smallest rank k with k/n >= q, robust to float rounding in n*q."""
    k = math.ceil(n * q - 1e-9)
    return max(1, min(int(k), n))


def max_bin_mass(law, grid: BinGrid) -> float:
    """Largest probability a law puts on a single grid bin.

    The first bin is closed on both ends, so an atom at 0 counts toward
    it; every other bin is left-open. Laws without a scalar CDF (the
    classifier law) are rejected.
    """
    cdf = getattr(law, "cdf", None)
    if cdf is None:
        raise InvalidArgumentError("bin masses need a law with a scalar CDF")
    upper = np.asarray(cdf(grid.edges[1:]), dtype=float)
    lower = np.asarray(cdf(grid.edges[:-1]), dtype=float).copy()
    lower[0] = 0.0  # bin 1 includes any mass at exactly 0
    masses = upper - lower
    return float(np.max(masses))


def coverage_upper_bound(
    n: int, alpha: float, epsilon: float, gamma: float, m: int, bin_mass: float
) -> float:
    """Finite-sample upper bound on mean coverage of the private cutoff.

    Complements the 1 - alpha lower bound: coverage cannot exceed the
    target by more than the privacy and discretization overheads. The
    bound is valid but loose; it exceeds 1 (and is reported as such)
    whenever the adjusted level itself reaches 1, in which case this
    function returns +inf since the derivation degenerates.
    """
    if not 0.0 <= bin_mass <= 1.0:
        raise InvalidArgumentError(f"bin mass must lie in [0, 1], got {bin_mass!r}")
    level = adjusted_quantile(n, alpha, epsilon, gamma, m)
    if level >= 1.0:
        return math.inf
    tail = max(level / (1.0 - level), 1.0)
    overhead = 2.0 * bin_mass + 2.0 * (1.0 + tail) * math.log(m / (gamma * alpha)) / ((n + 1.0) * epsilon)
    return 1.0 - (1.0 - gamma) * alpha + (1.0 - gamma * alpha) * overhead


def simplified_upper_bound(n: int, alpha: float, epsilon: float) -> float:
    """Readable form of the coverage ceiling: 1 - alpha + 5 log(n eps / alpha) / (n eps)."""
    _check_positive_int(n, "calibration size")
    if not (0.0 < alpha < 1.0 and epsilon > 0.0):
        raise InvalidArgumentError("need alpha in (0, 1) and positive epsilon")
    ne = n * epsilon
    return 1.0 - alpha + SIMPLIFIED_BOUND_CONSTANT * math.log(ne / alpha) / ne


@dataclass(frozen=True)
class BoundReport:
    """Coverage band for one configuration: floor, exact ceiling, readable ceiling."""

    lower: float
    upper: float
    upper_simplified: float
    bin_mass: float

    def as_dict(self) -> dict:
        return asdict(self)


def bound_report(
    n: int, alpha: float, epsilon: float, gamma: float, m: int, bin_mass: float
) -> BoundReport:
    return BoundReport(
        lower=1.0 - alpha,
        upper=coverage_upper_bound(n, alpha, epsilon, gamma, m, bin_mass),
        upper_simplified=simplified_upper_bound(n, alpha, epsilon),
        bin_mass=float(bin_mass),
    )


@dataclass(frozen=True)
class CoverageReport:
    """Result of a seeded coverage experiment.

    ``coverages`` and ``cutoffs`` are per-trial, in trial order, and are
    bit-identical across runs and thread counts for a fixed seed.
    ``set_sizes`` is a histogram over all test examples of all trials;
    it is empty for scalar laws, which have no per-label structure.
    """

    law_spec: dict
    n_calib: int
    n_test: int
    trials: int
    seed: int
    config: CalibConfig
    coverages: np.ndarray
    cutoffs: np.ndarray
    set_sizes: dict[int, int]
    mean_coverage: float
    std_err: float

    def __post_init__(self):
        for name in ("coverages", "cutoffs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def as_dict(self) -> dict:
        return {
            "law": dict(self.law_spec),
            "n_calib": self.n_calib,
            "n_test": self.n_test,
            "trials": self.trials,
            "seed": self.seed,
            "config": asdict(self.config),
            "mean_coverage": self.mean_coverage,
            "std_err": self.std_err,
            "coverages": [float(c) for c in self.coverages],
            "cutoffs": [float(c) for c in self.cutoffs],
            "set_sizes": {str(k): int(v) for k, v in sorted(self.set_sizes.items())},
        }


def _coverage_trial(law, n_calib, n_test, alpha, epsilon, m, gamma, seed, t):
    """One seeded trial: fresh data, private calibration, test coverage."""
    if isinstance(law, ClassifierLaw):
        probs, labels = law.sample_examples(rng.substream(seed, rng.CALIBRATION_DRAW, t), n_calib)
        calib = ScoreSet(true_label_scores(probs, labels))
    else:
        calib = ScoreSet(law.sample(rng.substream(seed, rng.CALIBRATION_DRAW, t), n_calib))
    threshold = calibrate(
        calib, alpha, epsilon, m=m, gamma=gamma, seed=rng.derive_seed(seed, rng.MECHANISM_DRAW, t)
    )
    cutoff = threshold.cutoff
    sizes: Counter = Counter()
    if isinstance(law, ClassifierLaw):
        probs_t, labels_t = law.sample_examples(rng.substream(seed, rng.TEST_DRAW, t), n_test)
        covered = true_label_scores(probs_t, labels_t) <= cutoff
        per_row = np.sum(1.0 - probs_t <= cutoff, axis=1)
        sizes.update(int(s) for s in per_row)
    else:
        covered = law.sample(rng.substream(seed, rng.TEST_DRAW, t), n_test) <= cutoff
    return float(np.mean(covered)), float(cutoff), sizes


def run_coverage_experiment(
    law,
    n_calib: int,
    n_test: int,
    alpha: float,
    epsilon: float,
    m: int | None = None,
    gamma: float | None = None,
    trials: int = 100,
    seed: int = 0,
    threads: int = 1,
    tune_trials: int = 20,
) -> CoverageReport:
    """Estimate mean coverage of the full private pipeline by simulation.

    Each trial draws fresh calibration and test data from ``law``,
    calibrates privately, and records the test coverage of the cutoff.
    When ``m`` is omitted the bin count is tuned once up front (the
    tuning uses synthetic uniform scores, not trial data); when
    ``gamma`` is omitted the closed-form optimum for the resolved ``m``
    is used. Trials are independent of thread scheduling: trial ``t``
    reads only streams keyed by ``t``.
    """
    if isinstance(law, (str, dict)):
        law = parse_law(law)
    n_calib = _check_positive_int(n_calib, "n_calib")
    n_test = _check_positive_int(n_test, "n_test")
    trials = _check_positive_int(trials, "trials")
    threads = _check_positive_int(threads, "threads")
    seed = rng.validate_seed(seed)
    if m is None:
        m, tuned_gamma = tune_m_star(
            n_calib, alpha, epsilon, trials=tune_trials, seed=rng.derive_seed(seed, rng.TUNING_DRAW)
        )
        if gamma is None:
            gamma = tuned_gamma
    elif gamma is None:
        gamma = gamma_star(n_calib, alpha, epsilon, m)
    config = CalibConfig(
        float(alpha), float(epsilon), float(gamma), int(m),
        adjusted_quantile(n_calib, alpha, epsilon, gamma, m),
    )

    def one(t: int):
        return _coverage_trial(law, n_calib, n_test, alpha, epsilon, m, gamma, seed, t)

    if threads == 1:
        results = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))

    coverages = np.array([r[0] for r in results])
    cutoffs = np.array([r[1] for r in results])
    sizes: Counter = Counter()
    for r in results:
        sizes.update(r[2])
    std_err = float(np.std(coverages, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return CoverageReport(
        law_spec=law.to_spec(),
        n_calib=n_calib,
        n_test=n_test,
        trials=trials,
        seed=seed,
        config=config,
        coverages=coverages,
        cutoffs=cutoffs,
        set_sizes={int(k): int(v) for k, v in sizes.items()},
        mean_coverage=float(np.mean(coverages)),
        std_err=std_err,
    )


def utility_event_frequencies(
    n: int, q: float, epsilon: float, m: int, delta: float, trials: int, seed: int = 0
) -> tuple[float, float]:
    """How often the private quantile lands within its promised rank window.

    On one fixed random score set, draws the mechanism ``trials`` times
    and reports the frequencies of the two rank events

        #{[s_i] <= cutoff} / n  >=  q - 2 max((1-q)/q, 1) log(m/delta) / (n eps)
        #{[s_i] <  cutoff} / n  <=  q + 2 max(q/(1-q), 1) log(m/delta) / (n eps)

    each of which is promised to hold with probability at least
    1 - delta. Returns (lower_frequency, upper_frequency).
    """
    n = _check_positive_int(n, "score count")
    m = _check_positive_int(m, "number of bins")
    trials = _check_positive_int(trials, "trials")
    if not 0.0 < q < 1.0:
        raise InvalidArgumentError(f"rank events need q in (0, 1), got {q!r}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"failure probability must be in (0, 1), got {delta!r}")
    if epsilon <= 0.0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon!r}")

    grid = uniform_grid(m)
    draws = ScoreSet(rng.substream(seed, rng.CALIBRATION_DRAW).uniform(size=n))
    disc = discretize(draws, grid)
    dist = mechanism_weights(disc, QuantileQuery(q, epsilon, grid))

    counts = np.bincount(
        np.searchsorted(grid.support, disc.discretized, side="left"), minlength=m
    ).astype(float)
    cum = np.cumsum(counts)
    frac_le = cum / n  # fraction of discretized scores <= each edge
    frac_lt = (cum - counts) / n  # fraction strictly below each edge

    slack_lower = 2.0 * max((1.0 - q) / q, 1.0) * math.log(m / delta) / (n * epsilon)
    slack_upper = 2.0 * max(q / (1.0 - q), 1.0) * math.log(m / delta) / (n * epsilon)
    ok_lower = frac_le >= q - slack_lower
    ok_upper = frac_lt <= q + slack_upper

    us = rng.substream(seed, rng.MECHANISM_DRAW).uniform(size=trials)
    cdf = np.cumsum(dist.probabilities)
    idx = np.minimum(np.searchsorted(cdf, us, side="left"), m - 1)
    return float(np.mean(ok_lower[idx])), float(np.mean(ok_upper[idx]))


def dkw_allowance(trials: int, tail: float = DKW_TAIL) -> float:
    """Uniform empirical-CDF error band at confidence 1 - tail."""
    trials = _check_positive_int(trials, "trials")
    if not 0.0 < tail < 1.0:
        raise InvalidArgumentError(f"tail must be in (0, 1), got {tail!r}")
    return math.sqrt(math.log(2.0 / tail) / (2.0 * trials))


@dataclass(frozen=True)
class DominanceReport:
    """Empirical check that the discretized quantile's true CDF value is
    squeezed between a Beta law and the same Beta shifted by one bin mass.

    ``dominance_gap`` is the worst excess of the empirical CDF over the
    Beta CDF (should be within ``allowance``); ``shift_gap`` is the
    worst excess of the shifted Beta CDF over the empirical CDF.
    """

    trials: int
    rank: int
    bin_mass: float
    dominance_gap: float
    shift_gap: float
    allowance: float
    empirical_mean: float
    mean_std_err: float
    beta_mean: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


def quantile_dominance_check(
    law, n: int, q: float, grid: BinGrid, trials: int, seed: int = 0
) -> DominanceReport:
    """Sample the discretized empirical quantile and test its CDF squeeze.

    For each trial, draw n scores from ``law``, discretize, take the
    rank-ceil(nq) order statistic, and push it through the law's CDF.
    Over many trials that value must stochastically dominate a
    Beta(k, n - k + 1) draw and be dominated by the same draw plus the
    largest bin mass. Both directions are checked against the empirical
    CDF with a DKW-style allowance.
    """
    n = _check_positive_int(n, "score count")
    trials = _check_positive_int(trials, "trials")
    if not 0.0 < q <= 1.0:
        raise InvalidArgumentError(f"quantile level must be in (0, 1], got {q!r}")
    k = ceil_rank(n, q)
    values = np.empty(trials)
    for t in range(trials):
        z = ScoreSet(law.sample(rng.substream(seed, rng.CALIBRATION_DRAW, t), n))
        disc = discretize(z, grid).discretized
        edge = np.partition(disc, k - 1)[k - 1]
        values[t] = float(np.asarray(law.cdf(edge), dtype=float))

    mass = max_bin_mass(law, grid)
    beta = stats.beta(k, n - k + 1)
    ordered = np.sort(values)
    ecdf_hi = np.arange(1, trials + 1) / trials
    ecdf_lo = np.arange(0, trials) / trials
    dominance_gap = float(np.max(ecdf_hi - beta.cdf(ordered)))
    shift_gap = float(np.max(beta.cdf(ordered - mass) - ecdf_lo))
    allowance = dkw_allowance(trials)
    std_err = float(np.std(values, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return DominanceReport(
        trials=trials,
        rank=k,
        bin_mass=mass,
        dominance_gap=dominance_gap,
        shift_gap=shift_gap,
        allowance=allowance,
        empirical_mean=float(np.mean(values)),
        mean_std_err=std_err,
        beta_mean=k / (n + 1.0),
        passed=bool(dominance_gap <= allowance and shift_gap <= allowance),
    )


@dataclass(frozen=True)
class RatioCase:
    """One privacy-ratio instance: a random set, a random removal, the exact ratio."""

    n: int
    m: int
    q: float
    epsilon: float
    ratio: float
    bound: float

    def as_dict(self) -> dict:
        return asdict(self)


def dp_ratio_sweep(
    instances: int = 100,
    max_n: int = 20,
    max_m: int = 8,
    epsilons: Sequence[float] = (0.5, 1.0, 8.0),
    q_levels: Sequence[float] = (0.3, 0.5, 0.9),
    seed: int = 0,
) -> list[RatioCase]:
    """Exact worst-case output ratios on random neighboring score sets.

    Each instance draws a random size, grid, level and budget, removes
    one random score, and computes the exact probability ratio in both
    directions. Every ratio should stay at or below exp(epsilon).
    """
    instances = _check_positive_int(instances, "instances")
    max_n = _check_positive_int(max_n, "max_n")
    max_m = _check_positive_int(max_m, "max_m")
    epsilons = [float(e) for e in epsilons]
    q_levels = [float(q) for q in q_levels]
    if not epsilons or any(e <= 0.0 for e in epsilons):
        raise InvalidArgumentError("need at least one positive epsilon")
    if not q_levels or any(not 0.0 < q <= 1.0 for q in q_levels):
        raise InvalidArgumentError("quantile levels must lie in (0, 1]")
    cases = []
    for i in range(instances):
        g = rng.substream(seed, rng.SWEEP_DRAW, i)
        n = int(g.integers(1, max_n + 1))
        m = int(g.integers(1, max_m + 1))
        eps = epsilons[int(g.integers(len(epsilons)))]
        q = q_levels[int(g.integers(len(q_levels)))]
        raw = g.uniform(size=n)
        drop = int(g.integers(n))
        base = ScoreSet(raw)
        neighbor = ScoreSet(np.delete(raw, drop))
        query = QuantileQuery(q, eps, uniform_grid(m))
        ratio = max(dp_ratio(base, neighbor, query), dp_ratio(neighbor, base, query))
        cases.append(RatioCase(n=n, m=m, q=q, epsilon=eps, ratio=float(ratio), bound=math.exp(eps)))
    return cases
