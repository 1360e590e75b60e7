from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chi2

from ltwalk import walks
from ltwalk.errors import (
    DimensionMismatch,
    EmptySupport,
    MassNotOne,
    NegativeProbability,
    ParameterOutOfRange,
    UnknownPreset,
)


class TestValidateDistribution:
    def test_biased_walk_valid(self):
        dist = walks.validate_distribution([((1,), Fraction(2, 3)), ((-1,), Fraction(1, 3))], 1)
        assert dist.sites == ((-1,), (1,))
        assert dist.exact_probs == (Fraction(1, 3), Fraction(2, 3))
        assert dist.max_radius == 1

    def test_duplicate_atoms_merged(self):
        dist = walks.validate_distribution([((1,), 0.5), ((1,), 0.5)], 1)
        assert dist.sites == ((1,),)
        assert dist.probs[0] == 1.0

    def test_mass_not_one(self):
        with pytest.raises(MassNotOne):
            walks.validate_distribution([((1,), 0.5)], 1)

    def test_empty_support(self):
        with pytest.raises(EmptySupport):
            walks.validate_distribution([], 1)

    def test_negative_probability(self):
        with pytest.raises(NegativeProbability):
            walks.validate_distribution([((1,), -0.5), ((-1,), 1.5)], 1)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            walks.validate_distribution([((1, 0), 1.0)], 1)

    def test_float_mass_tolerance(self):
        # a parts-per-1e10 deficit is normalized away, larger deficits error
        dist = walks.validate_distribution([((1,), 0.5 - 5e-11), ((-1,), 0.5)], 1)
        assert np.isclose(dist.probs.sum(), 1.0)


class TestPresets:
    def test_simple3_atoms(self, simple3):
        assert simple3.support_size == 6
        assert np.allclose(simple3.probs, 1 / 6)
        assert simple3.dim == 3

    def test_biased1d(self, biased23):
        probs = dict(zip(biased23.sites, biased23.exact_probs))
        assert probs[(1,)] == Fraction(2, 3)
        assert probs[(-1,)] == Fraction(1, 3)

    def test_biased1d_boundary(self):
        with pytest.raises(ParameterOutOfRange):
            walks.preset("biased1d", p=1)
        with pytest.raises(ParameterOutOfRange):
            walks.preset("biased1d", p=0)

    def test_simple_bad_dim(self):
        with pytest.raises(ParameterOutOfRange):
            walks.preset("simple", d=0)

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            walks.preset("levy")

    def test_drift_and_rank(self, biased23, simple2):
        assert abs(biased23.mean_drift()[0] - 1 / 3) < 1e-12
        assert np.allclose(simple2.mean_drift(), 0.0)
        assert simple2.lattice_rank() == 2


class TestWalkGenerator:
    def test_deterministic_walk(self, deterministic1d):
        gen = walks.WalkGenerator(deterministic1d, seed=7)
        assert list(gen.iter_steps(3)) == [(1,), (1,), (1,)]

    def test_stream_reproducible(self, biased23):
        a = walks.WalkGenerator(biased23, seed=5, replica_index=2).steps_block(4096)
        b = walks.WalkGenerator(biased23, seed=5, replica_index=2).steps_block(4096)
        assert np.array_equal(a, b)

    def test_replicas_differ(self, biased23):
        a = walks.WalkGenerator(biased23, seed=5, replica_index=0).steps_block(64)
        b = walks.WalkGenerator(biased23, seed=5, replica_index=1).steps_block(64)
        assert not np.array_equal(a, b)

    def test_chi_square_frequencies(self, biased23):
        n = 10**6
        steps = walks.WalkGenerator(biased23, seed=11).steps_block(n)[:, 0]
        counts = np.array([(steps == -1).sum(), (steps == 1).sum()])
        expect = np.array([n / 3, 2 * n / 3])
        stat = float(((counts - expect) ** 2 / expect).sum())
        assert stat < chi2.isf(1e-6, df=1)

    def test_frequency_law_five_sigma(self, simple3):
        n = 10**6
        steps = walks.WalkGenerator(simple3, seed=3).steps_block(n)
        deltas = simple3.deltas
        for row, p in zip(deltas, simple3.probs):
            freq = float(np.mean(np.all(steps == row, axis=1)))
            assert abs(freq - p) <= 5 * np.sqrt(p * (1 - p) / n)

    def test_independence_proxy(self, biased23):
        n = 10**4
        blocks = [walks.WalkGenerator(biased23, seed=9, replica_index=r)
                  .steps_block(n)[:, 0].astype(float) for r in range(3)]
        for i in range(3):
            for j in range(i + 1, 3):
                corr = np.corrcoef(blocks[i], blocks[j])[0, 1]
                assert abs(corr) < 0.05


class TestSamplerTables:
    def test_small_support_uses_cdf(self, simple3):
        assert walks.build_tables(simple3).mode == 0

    def test_large_support_uses_alias(self):
        atoms = [((i,), Fraction(1, 12)) for i in range(12)]
        dist = walks.validate_distribution(atoms, 1)
        tables = walks.build_tables(dist)
        assert tables.mode == 1
        assert len(tables.thresh) == 12

    def test_alias_frequencies(self):
        weights = [1, 2, 3, 4, 5, 6, 7, 8, 9, 45]
        atoms = [((i,), Fraction(w, 90)) for i, w in enumerate(weights)]
        dist = walks.validate_distribution(atoms, 1)
        n = 200_000
        steps = walks.WalkGenerator(dist, seed=17).steps_block(n)[:, 0]
        for i, w in enumerate(weights):
            p = w / 90
            freq = float(np.mean(steps == i))
            assert abs(freq - p) <= 5 * np.sqrt(p * (1 - p) / n)
