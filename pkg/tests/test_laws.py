"""Score distributions and bin-mass computations."""

import numpy as np
import pytest

from dpcp.errors import InvalidArgumentError
from dpcp.harness import max_bin_mass
from dpcp.laws import AtomMixtureLaw, BetaLaw, ClassifierLaw, UniformLaw, parse_law
from dpcp.scores import BinGrid, uniform_grid


class TestScalarLaws:
    def test_uniform_cdf(self):
        law = UniformLaw()
        assert law.cdf([0.0, 0.3, 1.0]).tolist() == [0.0, 0.3, 1.0]

    def test_uniform_samples_in_range(self):
        draws = UniformLaw().sample(np.random.default_rng(0), 1000)
        assert np.all((draws >= 0.0) & (draws <= 1.0))

    def test_beta_cdf_matches_closed_form(self):
        # Beta(2, 2) has CDF 3x^2 - 2x^3
        law = BetaLaw(2.0, 2.0)
        x = np.linspace(0, 1, 11)
        assert law.cdf(x) == pytest.approx(3 * x**2 - 2 * x**3, abs=1e-12)

    def test_mixture_cdf_has_jump_at_atom(self):
        law = AtomMixtureLaw(atom=0.3, atom_mass=0.5)
        assert float(law.cdf(0.2999)) == pytest.approx(0.5 * 0.2999)
        assert float(law.cdf(0.3)) == pytest.approx(0.5 * 0.3 + 0.5)

    def test_mixture_sampling_frequency(self):
        law = AtomMixtureLaw(atom=0.3, atom_mass=0.5)
        draws = law.sample(np.random.default_rng(1), 20000)
        frac = np.mean(draws == 0.3)
        assert abs(frac - 0.5) <= 3.0 * np.sqrt(0.25 / 20000)

    def test_sampling_is_generator_deterministic(self):
        for law in (UniformLaw(), BetaLaw(2.0, 5.0), AtomMixtureLaw(0.1, 0.2)):
            a = law.sample(np.random.default_rng(7), 50)
            b = law.sample(np.random.default_rng(7), 50)
            assert a.tolist() == b.tolist()


class TestClassifierLaw:
    def test_rows_are_distributions(self):
        probs, labels = ClassifierLaw(4, 5.0).sample_examples(np.random.default_rng(2), 300)
        assert probs.shape == (300, 4)
        assert np.all(probs >= 0.0)
        assert np.sum(probs, axis=1) == pytest.approx(np.ones(300))
        assert labels.min() >= 0 and labels.max() < 4

    def test_boost_concentrates_on_true_class(self):
        probs, labels = ClassifierLaw(3, 8.0).sample_examples(np.random.default_rng(3), 2000)
        true_p = probs[np.arange(2000), labels]
        assert float(np.mean(true_p)) > 2.0 / 3.0

    def test_needs_two_classes(self):
        with pytest.raises(InvalidArgumentError):
            ClassifierLaw(1)


class TestParseLaw:
    def test_round_trips(self):
        for spec in (
            {"law": "uniform"},
            {"law": "beta", "a": 2.0, "b": 3.0},
            {"law": "mixture", "atom": 0.1, "atom_mass": 0.25, "base": {"law": "beta", "a": 1.0, "b": 2.0}},
            {"law": "classes", "n_classes": 5, "true_boost": 4.0, "base_concentration": 1.0},
        ):
            law = parse_law(spec)
            assert parse_law(law.to_spec()) == law

    def test_plain_name_accepted(self):
        assert parse_law("uniform") == UniformLaw()

    def test_unsupported_rejected(self):
        with pytest.raises(InvalidArgumentError):
            parse_law({"law": "cauchy"})
        with pytest.raises(InvalidArgumentError):
            parse_law({"a": 2.0})
        with pytest.raises(InvalidArgumentError):
            parse_law({"law": "beta", "a": 2.0})  # missing b


class TestMaxBinMass:
    def test_uniform_law_on_uniform_grid(self):
        for m in (1, 4, 100):
            assert max_bin_mass(UniformLaw(), uniform_grid(m)) == pytest.approx(1.0 / m)

    def test_beta_masses_match_closed_form(self):
        # Beta(2, 2) on four equal bins: 0.15625, 0.34375, 0.34375, 0.15625
        assert max_bin_mass(BetaLaw(2.0, 2.0), uniform_grid(4)) == pytest.approx(0.34375, abs=1e-12)

    def test_atom_at_zero_counts_toward_first_bin(self):
        law = AtomMixtureLaw(atom=0.0, atom_mass=0.3)
        assert max_bin_mass(law, uniform_grid(4)) == pytest.approx(0.3 + 0.7 * 0.25)

    def test_atom_inside_a_bin(self):
        law = AtomMixtureLaw(atom=0.3, atom_mass=0.5)
        # bin (0.25, 0.5] carries the atom plus its share of the uniform part
        assert max_bin_mass(law, uniform_grid(4)) == pytest.approx(0.5 + 0.5 * 0.25)

    def test_nonuniform_grid(self):
        grid = BinGrid(np.array([0.0, 0.9, 1.0]))
        assert max_bin_mass(UniformLaw(), grid) == pytest.approx(0.9)

    def test_classifier_law_rejected(self):
        with pytest.raises(InvalidArgumentError):
            max_bin_mass(ClassifierLaw(), uniform_grid(4))
