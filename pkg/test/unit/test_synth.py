"""Channel synthesis tests."""

import dataclasses
import math

import numpy as np
import pytest

from thzsense.attenuation import excess_attenuation, stats
from thzsense.errors import ConfigException
from thzsense.geometry import Target, frequency_grid
from thzsense.synth import (BlockageModel, SynthesisConfig, blockage_gain, synthesize_batch,
                            synthesize_sweep, trace_rays)


def los_ray(rays):
    return [r for r in rays if r.kind == 'specular' and r.path.bounce_count == 0][0]


@pytest.mark.synth
class TestSynthesisConfig:

    def test_positive_noise_floor_rejected(self):
        with pytest.raises(ConfigException):
            SynthesisConfig(noise_floor=3.0)

    def test_blockage_model_from_label(self):
        syn = SynthesisConfig(blockage_model='single_knife_edge')
        assert syn.blockage_model is BlockageModel.SINGLE_KNIFE_EDGE

    def test_dict_round_trip_without_noise(self, quiet):
        data = quiet.to_dict()
        assert data['noise_floor'] is None
        assert SynthesisConfig.from_dict(data) == quiet

    def test_unknown_key(self):
        with pytest.raises(ConfigException):
            SynthesisConfig.from_dict({'noise': -60})


@pytest.mark.synth
class TestTraceRays:

    def test_baseline_rays(self, scene, quiet):
        rays = trace_rays(scene, None, quiet)
        assert len(rays) == 7
        assert los_ray(rays).amplitude == pytest.approx(1 / 0.92)
        floor = [r for r in rays if r.path.surface_sequence == ('floor',)][0]
        assert abs(floor.amplitude) == pytest.approx(10 ** (-6 / 20) / (2 * math.hypot(0.46, 1.0)))
        assert not any(r.blocked_flag for r in rays)

    def test_centered_target_blocks_line_of_sight(self, scene, quiet):
        rays = trace_rays(scene, Target.at_offset(scene, 0.0), quiet)
        assert los_ray(rays).blocked_flag
        assert all(r.kind == 'specular' for r in rays)

    def test_offset_target_adds_scatter_ray(self, scene, quiet):
        rays = trace_rays(scene, Target.at_offset(scene, 0.12), quiet)
        scatter = [r for r in rays if r.kind == 'scatter']
        assert len(scatter) == 1
        assert scatter[0].path_length == pytest.approx(2 * math.hypot(0.46, 0.12))
        assert abs(scatter[0].amplitude) == pytest.approx(
            10 ** (-6 / 20) / scatter[0].path_length)

    @pytest.mark.parametrize('y', [0.0, 0.03, 0.06])
    def test_no_scatter_ray_close_to_the_link(self, scene, quiet, y):
        rays = trace_rays(scene, Target.at_offset(scene, y), quiet)
        assert all(r.kind == 'specular' for r in rays)

    def test_scatter_excess_threshold(self, scene):
        # at 6 cm the scatter path is 7.8 mm longer than the LoS
        target = Target.at_offset(scene, 0.06)
        syn = SynthesisConfig(noise_floor=-math.inf, scatter_min_excess_m=0.005)
        assert [r.kind for r in trace_rays(scene, target, syn)].count('scatter') == 1
        syn = SynthesisConfig(noise_floor=-math.inf, scatter_min_excess_m=0.01)
        assert [r.kind for r in trace_rays(scene, target, syn)].count('scatter') == 0

    def test_negative_excess_threshold_rejected(self):
        with pytest.raises(ConfigException):
            SynthesisConfig(scatter_min_excess_m=-0.001)

    def test_absorbing_target_has_no_scatter(self, scene, quiet):
        target = Target.at_offset(scene, 0.12, material_tag='perfectly_absorbing')
        assert all(r.kind == 'specular' for r in trace_rays(scene, target, quiet))

    def test_scatter_can_be_disabled(self, scene):
        syn = SynthesisConfig(noise_floor=-math.inf, include_scatter=False)
        rays = trace_rays(scene, Target.at_offset(scene, 0.25), syn)
        assert all(r.kind == 'specular' for r in rays)


@pytest.mark.synth
class TestBlockageGain:

    def test_far_target_is_transparent(self, scene, quiet, g_band):
        target = Target.at_offset(scene, 10.0)
        ray = los_ray(trace_rays(scene, None, quiet))
        gain = blockage_gain(scene, target, ray, frequency_grid(g_band))
        assert np.all(np.abs(20 * np.log10(np.abs(gain))) < 0.1)

    def test_full_blockage_at_band_center(self, scene, quiet):
        target = Target.at_offset(scene, 0.0)
        ray = los_ray(trace_rays(scene, None, quiet))
        gain = blockage_gain(scene, target, ray, np.array([215e9]))
        loss = -20 * np.log10(abs(gain[0]))
        assert 10.0 <= loss <= 25.0

    def test_no_target(self, scene, quiet, g_band):
        ray = los_ray(trace_rays(scene, None, quiet))
        assert np.all(blockage_gain(scene, None, ray, frequency_grid(g_band)) == 1.0)

    def test_models_differ_at_center(self, scene, quiet):
        target = Target.at_offset(scene, 0.0)
        ray = los_ray(trace_rays(scene, None, quiet))
        f = np.array([215e9])
        double = blockage_gain(scene, target, ray, f, BlockageModel.DOUBLE_KNIFE_EDGE)
        single = blockage_gain(scene, target, ray, f, BlockageModel.SINGLE_KNIFE_EDGE)
        assert abs(single[0]) < abs(double[0])

    def test_x_wall_ray_is_blocked_on_return_leg(self, scene, quiet):
        target = Target.at_offset(scene, 0.0)
        rays = trace_rays(scene, target, quiet)
        wall = [r for r in rays if r.kind == 'specular'
                and r.path.surface_sequence == ('wall_x_min',)][0]
        assert wall.blocked_flag
        gain = blockage_gain(scene, target, wall, np.array([215e9]))
        assert abs(gain[0]) < 0.5


@pytest.mark.synth
class TestSynthesizeSweep:

    def test_calibration_identity(self, scene, quiet, g_band):
        a = synthesize_sweep(scene, None, g_band, quiet)
        b = synthesize_sweep(scene, None, g_band, quiet)
        assert np.all(excess_attenuation(a, b).a_values == 0.0)

    def test_lateral_symmetry(self, scene, g_band):
        syn = SynthesisConfig(noise_floor=-math.inf, max_order=0)
        left = synthesize_sweep(scene, Target.at_offset(scene, 0.12), g_band, syn)
        right = synthesize_sweep(scene, Target.at_offset(scene, -0.12), g_band, syn)
        assert np.allclose(left.values, right.values, rtol=1e-9, atol=0)

    def test_same_seed_same_noise(self, scene, noisy, g_band):
        a = synthesize_sweep(scene, None, g_band, noisy)
        b = synthesize_sweep(scene, None, g_band, noisy)
        c = synthesize_sweep(scene, None, g_band, noisy.with_seed(2))
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_noise_level(self, scene, g_band):
        clean = synthesize_sweep(scene, None, g_band,
                                 SynthesisConfig(noise_floor=-math.inf, max_order=0))
        noisy = synthesize_sweep(scene, None, g_band,
                                 SynthesisConfig(noise_floor=-40.0, max_order=0, seed=3))
        rms = np.sqrt(np.mean(np.abs(noisy.values - clean.values) ** 2))
        assert rms == pytest.approx(0.01 / 0.92, rel=0.1)

    def test_labels(self, scene, quiet, g_band):
        assert synthesize_sweep(scene, None, g_band, quiet).label == 'baseline'
        target = Target.at_offset(scene, 0.12)
        assert synthesize_sweep(scene, target, g_band, quiet).label == 'y=12cm'

    def test_blockage_orders_mean_attenuation(self, scene, noisy, g_band):
        baseline = synthesize_sweep(scene, None, g_band, noisy)
        near = synthesize_sweep(scene, Target.at_offset(scene, 0.0), g_band, noisy.with_seed(5))
        far = synthesize_sweep(scene, Target.at_offset(scene, 0.5), g_band, noisy.with_seed(6))
        assert (stats(excess_attenuation(near, baseline)).mean_db
                > stats(excess_attenuation(far, baseline)).mean_db)

    def test_higher_order_rays(self, scene, g_band):
        syn = SynthesisConfig(noise_floor=-math.inf, max_order=2)
        assert len(trace_rays(scene, None, syn)) == 25
        sweep = synthesize_sweep(scene, None, g_band, syn)
        assert sweep.values.size == g_band.n_points


@pytest.mark.synth
class TestSynthesizeBatch:

    def test_matches_single_runs(self, scene, noisy, g_band):
        batch = synthesize_batch(scene, [None, 0.0, 0.12], g_band, noisy, seeds=[1, 2], workers=2)
        assert set(batch) == {(y, s) for y in (None, 0.0, 0.12) for s in (1, 2)}
        direct = synthesize_sweep(scene, Target.at_offset(scene, 0.12), g_band,
                                  dataclasses.replace(noisy, seed=2))
        assert np.array_equal(batch[(0.12, 2)].values, direct.values)
        assert batch[(None, 1)].label == 'baseline'

    def test_zero_workers_rejected(self, scene, noisy, g_band):
        with pytest.raises(ConfigException):
            synthesize_batch(scene, [None], g_band, noisy, seeds=[1], workers=0)
