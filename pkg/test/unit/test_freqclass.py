"""Hypothesis distributions, log-likelihood ratios and majority voting."""

import math

import numpy as np
import pytest

from thzsense.attenuation import AttenuationSeries, excess_attenuation
from thzsense.errors import ConfigException, ModelException
from thzsense.freqclass import (MAX_BINS, MIN_BINS, ModelSet, SampleDistribution, classify,
                                confusion_matrix, fit_distribution, fit_models, llr,
                                separation_db, shared_edges)
from thzsense.geometry import BandConfig, Target
from thzsense.synth import synthesize_sweep


@pytest.fixture
def small_band():
    return BandConfig('G', 200e9, 200.7e9, 8)


def series(band, values, label=''):
    return AttenuationSeries(band, np.asarray(values, dtype=np.float64), label)


def gaussian_series(band, mean, std, seed, label=''):
    rng = np.random.default_rng(seed)
    return AttenuationSeries(band, rng.normal(mean, std, band.n_points), label)


@pytest.mark.classify
class TestFitDistribution:

    def test_constant_series(self, small_band):
        dist = fit_distribution(series(small_band, np.full(8, 4.0)), 2, epsilon=1e-3)
        delta = 1e-3 / (1 + 2e-3)
        assert dist.probabilities.tolist() == pytest.approx([delta, 1 - delta])

    def test_uniform_over_bin_centers(self, small_band):
        values = [0.5, 1.5, 2.5, 3.5] * 2
        dist = fit_distribution(series(small_band, values), [0.0, 1.0, 2.0, 3.0, 4.0])
        assert dist.probabilities.tolist() == pytest.approx([0.25] * 4)
        assert dist.mean_db == pytest.approx(2.0)
        assert dist.bin_centers.tolist() == pytest.approx([0.5, 1.5, 2.5, 3.5])

    def test_probabilities_sum_to_one(self, g_band):
        dist = fit_distribution(gaussian_series(g_band, 10.0, 4.0, 0), 32)
        assert abs(dist.probabilities.sum() - 1.0) <= 1e-12
        assert np.all(dist.probabilities > 0)
        assert dist.bin_count == 32

    def test_zero_epsilon_with_empty_bins(self, small_band):
        values = [0.5] * 8
        with pytest.raises(ModelException):
            fit_distribution(series(small_band, values), [0.0, 1.0, 2.0], epsilon=0.0)

    def test_negative_epsilon(self, small_band):
        with pytest.raises(ConfigException):
            fit_distribution(series(small_band, np.zeros(8)), 2, epsilon=-1.0)

    def test_all_samples_outside(self, small_band):
        with pytest.raises(ModelException):
            fit_distribution(series(small_band, np.full(8, 50.0)), [0.0, 1.0, 2.0])

    def test_single_bin_rejected(self, small_band):
        with pytest.raises(ConfigException):
            fit_distribution(series(small_band, np.zeros(8)), [0.0, 1.0])

    def test_direct_construction_validates(self):
        with pytest.raises(ModelException):
            SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.6])
        with pytest.raises(ModelException):
            SampleDistribution([0.0, 1.0, 2.0], [1.0, 0.0])


@pytest.mark.classify
class TestSharedEdges:

    def test_spans_pooled_samples(self, small_band):
        edges = shared_edges([series(small_band, np.linspace(0, 1, 8)),
                              series(small_band, np.linspace(5, 9, 8))], 4)
        assert edges[0] == 0.0
        assert edges[-1] == 9.0
        assert edges.size == 5

    def test_freedman_diaconis_is_clamped(self, g_band, small_band):
        wide = shared_edges([gaussian_series(g_band, 0.0, 1.0, 1)])
        assert MIN_BINS <= wide.size - 1 <= MAX_BINS
        tiny = shared_edges([series(small_band, np.arange(8.0))])
        assert tiny.size - 1 == MIN_BINS

    def test_fit_models_share_edges(self, g_band):
        models = fit_models([gaussian_series(g_band, 0.0, 1.0, 1, 'a'),
                             gaussian_series(g_band, 8.0, 3.0, 2, 'b')], bin_count=20)
        assert models[0].same_edges(models[1])
        assert [m.hypothesis_label for m in models] == ['a', 'b']
        assert separation_db(*models) == pytest.approx(8.0, abs=1.0)


@pytest.mark.classify
class TestLlr:

    def test_known_ratio(self):
        d_i = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5])
        d_j = SampleDistribution([0.0, 1.0, 2.0], [0.25, 0.75])
        assert llr(d_i, d_j, 0.5) == pytest.approx(math.log(2.0))
        assert llr(d_i, d_j, 1.5) == pytest.approx(math.log(2.0 / 3.0))

    def test_antisymmetric(self, g_band):
        d_i, d_j = fit_models([gaussian_series(g_band, 0.0, 1.0, 3),
                               gaussian_series(g_band, 2.0, 1.0, 4)], bin_count=16)
        a = np.linspace(-2.0, 4.0, 50)
        assert np.allclose(llr(d_i, d_j, a), -llr(d_j, d_i, a))

    def test_vectorized(self):
        d_i = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5])
        d_j = SampleDistribution([0.0, 1.0, 2.0], [0.25, 0.75])
        assert llr(d_i, d_j, np.array([0.5, 1.5])).shape == (2,)

    def test_out_of_range_uses_boundary_bin(self):
        d_i = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5])
        d_j = SampleDistribution([0.0, 1.0, 2.0], [0.25, 0.75])
        assert llr(d_i, d_j, -100.0) == llr(d_i, d_j, 0.5)
        assert llr(d_i, d_j, 100.0) == llr(d_i, d_j, 1.5)

    def test_clamped_values_are_flagged(self):
        d_i = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5])
        d_j = SampleDistribution([0.0, 1.0, 2.0], [0.25, 0.75])
        gamma, clamped = llr(d_i, d_j, np.array([-100.0, 0.5, 2.0, 100.0]), return_clamped=True)
        assert gamma[0] == gamma[1]
        assert clamped.tolist() == [True, False, False, True]
        gamma, clamped = llr(d_i, d_j, 0.5, return_clamped=True)
        assert gamma == pytest.approx(math.log(2.0))
        assert clamped is False
        assert llr(d_i, d_j, -1.0, return_clamped=True)[1] is True

    def test_mismatched_edges(self):
        d_i = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5])
        d_j = SampleDistribution([0.0, 1.5, 2.0], [0.5, 0.5])
        with pytest.raises(ModelException):
            llr(d_i, d_j, 0.5)

    def test_blocked_offset_favored_on_its_own_samples(self, scene, noisy, g_band):
        baseline = synthesize_sweep(scene, None, g_band, noisy)

        def attenuation(y, seed):
            sweep = synthesize_sweep(scene, Target.at_offset(scene, y), g_band,
                                     noisy.with_seed(seed))
            return excess_attenuation(sweep, baseline)

        d0, d50 = fit_models([attenuation(0.0, 11), attenuation(0.5, 12)])
        observed = attenuation(0.0, 13)
        assert float(np.sum(llr(d0, d50, observed.a_values))) > 0


@pytest.mark.classify
class TestClassify:

    @pytest.fixture
    def trained(self, g_band):
        training = [gaussian_series(g_band, 15.0, 5.0, 21, 'y=0cm'),
                    gaussian_series(g_band, 5.0, 2.0, 22, 'y=6cm'),
                    gaussian_series(g_band, 0.0, 1.0, 23, 'y=50cm')]
        return fit_models(training)

    def test_training_data_classified_as_itself(self, g_band, trained):
        for index, seed in enumerate((21, 22, 23)):
            observed = gaussian_series(g_band, *[(15.0, 5.0), (5.0, 2.0), (0.0, 1.0)][index],
                                       seed)
            result = classify(observed, trained)
            assert result.winner_index == index
            assert not result.ambiguous_flag

    def test_fresh_observation(self, g_band, trained):
        result = classify(gaussian_series(g_band, 0.0, 1.0, 99), trained)
        assert result.winner_label == 'y=50cm'

    def test_reordering_models(self, g_band, trained):
        observed = gaussian_series(g_band, 5.0, 2.0, 98)
        forward = classify(observed, trained)
        backward = classify(observed, trained[::-1])
        assert forward.winner_label == backward.winner_label == 'y=6cm'
        assert backward.winner_index == 1

    def test_identical_models_and_a_third(self, g_band):
        a = gaussian_series(g_band, 0.0, 1.0, 31, 'a')
        b = gaussian_series(g_band, 10.0, 1.0, 32, 'b')
        edges = shared_edges([a, b], 16)
        first = fit_distribution(a, edges)
        twin = fit_distribution(a, edges, label='a2')
        third = fit_distribution(b, edges)
        result = classify(gaussian_series(g_band, 10.0, 1.0, 33), [first, twin, third])
        assert result.winner_index == 2
        assert not result.ambiguous_flag

    def test_tie_resolves_to_lowest_index(self, small_band):
        first = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5], hypothesis_label='p')
        second = SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5], hypothesis_label='q')
        result = classify(series(small_band, np.full(8, 0.5)), [first, second])
        assert result.winner_index == 0
        assert result.ambiguous_flag
        assert result.per_sample_votes.tolist() == [0, 0]

    def test_vote_matrix(self, g_band, trained):
        observed = gaussian_series(g_band, 15.0, 5.0, 44)
        result = classify(observed, trained)
        n = g_band.n_points
        assert result.vote_matrix.shape == (3, 3)
        assert np.all(np.diag(result.vote_matrix) == 0)
        assert np.all(result.vote_matrix + result.vote_matrix.T <= n)
        assert result.per_sample_votes.sum() <= n
        for i in range(3):
            others = [result.vote_matrix[i, j] for j in range(3) if j != i]
            assert result.per_sample_votes[i] <= min(others)

    def test_out_of_range_counted(self, g_band, trained):
        result = classify(AttenuationSeries(g_band, np.full(g_band.n_points, 500.0)), trained)
        assert result.out_of_range_count == g_band.n_points
        assert result.winner_index == 0

    def test_needs_two_models(self, g_band, trained):
        with pytest.raises(ModelException):
            classify(gaussian_series(g_band, 0.0, 1.0, 1), trained[:1])

    def test_epsilon_stability(self, g_band):
        training = [gaussian_series(g_band, 12.0, 4.0, 51), gaussian_series(g_band, 1.0, 1.0, 52)]
        observed = gaussian_series(g_band, 12.0, 4.0, 53)
        winners = {classify(observed, fit_models(training, epsilon=eps)).winner_index
                   for eps in (1e-8, 1e-6, 1e-4)}
        assert winners == {0}

    def test_to_dict(self, g_band, trained):
        data = classify(gaussian_series(g_band, 0.0, 1.0, 7), trained).to_dict()
        assert data['winner_label'] == 'y=50cm'
        assert len(data['vote_matrix']) == 3


@pytest.mark.classify
class TestModelSet:

    def test_dict_round_trip(self, g_band):
        models = fit_models([gaussian_series(g_band, 0.0, 1.0, 1, 'a'),
                             gaussian_series(g_band, 4.0, 2.0, 2, 'b')])
        model_set = ModelSet(models, g_band, baseline_path='baseline.sweep',
                             metadata={'seed': 7})
        restored = ModelSet.from_dict(model_set.to_dict())
        assert restored.labels == ['a', 'b']
        assert restored.band == g_band
        assert restored.baseline_path == 'baseline.sweep'
        assert restored.metadata == {'seed': 7}
        for left, right in zip(models, restored.models):
            assert np.array_equal(left.probabilities, right.probabilities)
            assert np.array_equal(left.bin_edges, right.bin_edges)

    def test_version_checked(self, g_band):
        data = ModelSet(fit_models([gaussian_series(g_band, 0.0, 1.0, 1),
                                    gaussian_series(g_band, 1.0, 1.0, 2)])).to_dict()
        data['format_version'] = 99
        with pytest.raises(ModelException):
            ModelSet.from_dict(data)

    def test_mismatched_edges(self):
        with pytest.raises(ModelException):
            ModelSet([SampleDistribution([0.0, 1.0, 2.0], [0.5, 0.5]),
                      SampleDistribution([0.0, 1.5, 2.0], [0.5, 0.5])])


@pytest.mark.classify
class TestConfusionMatrix:

    def test_counts(self):
        matrix = confusion_matrix([0, 0, 1, 2, 2], [0, 1, 1, 2, 0], 3)
        assert matrix.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 1]]
        assert matrix.sum() == 5
