"""Private quantile mechanism: weights, sampling, privacy ratios."""

import math

import numpy as np
import pytest

from dpcp import rng
from dpcp.errors import InvalidArgumentError
from dpcp.mechanism import (
    QuantileQuery,
    dp_ratio,
    mechanism_weights,
    quantile_from_uniform,
    sample_private_quantile,
)
from dpcp.scores import ScoreSet, discretize, uniform_grid


def _disc(values, m):
    return discretize(ScoreSet(values), uniform_grid(m))


class TestQuantileQuery:
    def test_level_domain(self):
        grid = uniform_grid(2)
        QuantileQuery(1.0, 1.0, grid)  # q = 1 is allowed
        with pytest.raises(InvalidArgumentError):
            QuantileQuery(0.0, 1.0, grid)
        with pytest.raises(InvalidArgumentError):
            QuantileQuery(1.1, 1.0, grid)

    def test_epsilon_domain(self):
        with pytest.raises(InvalidArgumentError):
            QuantileQuery(0.5, 0.0, uniform_grid(2))
        with pytest.raises(InvalidArgumentError):
            QuantileQuery(0.5, -1.0, uniform_grid(2))


class TestMechanismWeights:
    def test_known_weights(self):
        # three scores at edges 0.25, 0.5, 1.0 of a 4-bin grid, median query
        dist = mechanism_weights(_disc([0.2, 0.4, 0.9], 4), QuantileQuery(0.5, 2.0, uniform_grid(4)))
        assert dist.weights.tolist() == [4.0, 2.0, 4.0, 4.0]

    def test_known_probabilities_exactly(self):
        dist = mechanism_weights(_disc([0.2, 0.4, 0.9], 4), QuantileQuery(0.5, 2.0, uniform_grid(4)))
        # exp(-eps w / 2) with the minimum weight shifted out before normalizing
        z = [math.exp(-1.0 * (w - 2.0)) for w in (4.0, 2.0, 4.0, 4.0)]
        expect = [v / sum(z) for v in z]
        assert dist.probabilities.tolist() == expect

    def test_empty_scores_give_uniform(self):
        dist = mechanism_weights(_disc([], 5), QuantileQuery(0.5, 1.0, uniform_grid(5)))
        assert dist.weights.tolist() == [0.0] * 5
        assert dist.probabilities.tolist() == [0.2] * 5

    def test_single_score(self):
        dist = mechanism_weights(_disc([0.6], 2), QuantileQuery(0.5, 1.0, uniform_grid(2)))
        # edge 0.5 has one score above it, edge 1.0 none on either side
        assert dist.weights.tolist() == [2.0, 0.0]

    def test_top_quantile_blocks_edges_below_data(self):
        dist = mechanism_weights(_disc([0.2, 0.95], 4), QuantileQuery(1.0, 1.0, uniform_grid(4)))
        assert dist.weights.tolist()[:3] == [math.inf] * 3
        assert dist.weights.tolist()[3] == 1.0
        assert dist.probabilities.tolist() == [0.0, 0.0, 0.0, 1.0]

    def test_top_quantile_empty_set_is_uniform(self):
        dist = mechanism_weights(_disc([], 3), QuantileQuery(1.0, 1.0, uniform_grid(3)))
        assert dist.probabilities.tolist() == pytest.approx([1 / 3] * 3)

    def test_probabilities_are_a_distribution(self):
        g = np.random.default_rng(42)
        for _ in range(40):
            n = int(g.integers(0, 30))
            m = int(g.integers(1, 12))
            q = float(g.uniform(0.05, 1.0))
            eps = float(g.choice([0.1, 1.0, 10.0]))
            dist = mechanism_weights(_disc(g.uniform(size=n), m), QuantileQuery(q, eps, uniform_grid(m)))
            assert np.all(dist.probabilities >= 0.0)
            assert np.sum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)
            assert np.all(dist.weights >= 0.0)

    def test_extreme_epsilon_is_stable(self):
        dist = mechanism_weights(_disc([0.2, 0.4, 0.9], 4), QuantileQuery(0.5, 1e12, uniform_grid(4)))
        assert dist.probabilities.tolist() == [0.0, 1.0, 0.0, 0.0]
        tiny = mechanism_weights(_disc([0.2, 0.4, 0.9], 4), QuantileQuery(0.5, 1e-12, uniform_grid(4)))
        assert tiny.probabilities == pytest.approx([0.25] * 4, abs=1e-9)

    def test_requires_discretized_scores(self):
        with pytest.raises(InvalidArgumentError):
            mechanism_weights(ScoreSet([0.2, 0.4]), QuantileQuery(0.5, 1.0, uniform_grid(4)))

    def test_rejects_scores_from_other_grid(self):
        s = _disc([0.2, 0.4], 3)
        with pytest.raises(InvalidArgumentError):
            mechanism_weights(s, QuantileQuery(0.5, 1.0, uniform_grid(4)))


class TestSampling:
    def test_same_seed_same_output(self):
        s = _disc([0.1, 0.5, 0.7, 0.9], 8)
        query = QuantileQuery(0.75, 1.0, uniform_grid(8))
        for seed in (0, 1, 2, 3, 12345, 2**63):
            a = sample_private_quantile(s, query, seed)
            b = sample_private_quantile(s, query, seed)
            assert a == b
            assert a in uniform_grid(8).support

    def test_sampler_is_inverse_cdf_of_one_uniform(self):
        s = _disc([0.1, 0.5, 0.7, 0.9], 8)
        query = QuantileQuery(0.75, 1.0, uniform_grid(8))
        dist = mechanism_weights(s, query)
        for seed in range(100):
            u = float(rng.generator(seed).uniform())
            assert sample_private_quantile(s, query, seed) == quantile_from_uniform(dist, u)

    def test_inverse_cdf_monotone_in_uniform(self):
        dist = mechanism_weights(_disc([0.2, 0.4, 0.9], 4), QuantileQuery(0.5, 2.0, uniform_grid(4)))
        us = np.linspace(0.0, 0.999999, 500)
        edges = [quantile_from_uniform(dist, u) for u in us]
        assert all(a <= b for a, b in zip(edges, edges[1:]))
        assert quantile_from_uniform(dist, 0.0) == dist.support[0] or dist.probabilities[0] == 0.0

    def test_uniform_draw_domain(self):
        dist = mechanism_weights(_disc([0.5], 2), QuantileQuery(0.5, 1.0, uniform_grid(2)))
        with pytest.raises(InvalidArgumentError):
            quantile_from_uniform(dist, 1.0)
        with pytest.raises(InvalidArgumentError):
            quantile_from_uniform(dist, -0.1)

    def test_seed_validation(self):
        s = _disc([0.5], 2)
        query = QuantileQuery(0.5, 1.0, uniform_grid(2))
        with pytest.raises(InvalidArgumentError):
            sample_private_quantile(s, query, -1)
        with pytest.raises(InvalidArgumentError):
            sample_private_quantile(s, query, 2**64)

    def test_top_quantile_sample_never_below_max_score(self):
        s = _disc([0.2, 0.95], 4)
        query = QuantileQuery(1.0, 1.0, uniform_grid(4))
        for seed in range(50):
            assert sample_private_quantile(s, query, seed) >= max(s.discretized)

    def test_sampling_frequencies_match_exact_probabilities(self):
        # one million distinct seeds against the closed-form distribution
        s = _disc([0.2, 0.4, 0.9], 4)
        query = QuantileQuery(0.5, 2.0, uniform_grid(4))
        dist = mechanism_weights(s, query)
        draws = 10**6
        us = np.empty(draws)
        for seed in range(draws):
            us[seed] = rng.generator(seed).uniform()
        cdf = np.cumsum(dist.probabilities)
        idx = np.minimum(np.searchsorted(cdf, us, side="left"), 3)
        freq = np.bincount(idx, minlength=4) / draws
        for j in range(4):
            p = dist.probabilities[j]
            sigma = math.sqrt(p * (1.0 - p) / draws)
            assert abs(freq[j] - p) <= 3.0 * sigma, f"edge {j}: {freq[j]} vs {p}"


class TestDpRatio:
    def test_worst_case_ratio_bounded_by_budget(self):
        g = np.random.default_rng(5)
        for _ in range(30):
            n = int(g.integers(1, 15))
            m = int(g.integers(1, 8))
            eps = float(g.choice([0.5, 1.0, 8.0]))
            q = float(g.choice([0.3, 0.5, 0.9]))
            raw = g.uniform(size=n)
            base = ScoreSet(raw)
            neighbor = ScoreSet(np.delete(raw, int(g.integers(n))))
            query = QuantileQuery(q, eps, uniform_grid(m))
            r = max(dp_ratio(base, neighbor, query), dp_ratio(neighbor, base, query))
            assert r <= math.exp(eps) * (1.0 + 1e-9)
            assert r >= 1.0

    def test_rejects_same_size_sets(self):
        query = QuantileQuery(0.5, 1.0, uniform_grid(4))
        with pytest.raises(InvalidArgumentError):
            dp_ratio(ScoreSet([0.1, 0.2]), ScoreSet([0.1, 0.3]), query)

    def test_rejects_two_removals(self):
        query = QuantileQuery(0.5, 1.0, uniform_grid(4))
        with pytest.raises(InvalidArgumentError):
            dp_ratio(ScoreSet([0.1, 0.2, 0.3]), ScoreSet([0.1]), query)

    def test_rejects_disagreeing_shared_entries(self):
        query = QuantileQuery(0.5, 1.0, uniform_grid(4))
        with pytest.raises(InvalidArgumentError):
            dp_ratio(ScoreSet([0.1, 0.2, 0.3]), ScoreSet([0.1, 0.35]), query)

    def test_duplicate_values_are_handled_as_multiset(self):
        query = QuantileQuery(0.5, 1.0, uniform_grid(4))
        r = dp_ratio(ScoreSet([0.3, 0.3, 0.3]), ScoreSet([0.3, 0.3]), query)
        assert 1.0 <= r <= math.exp(1.0) * (1.0 + 1e-9)
