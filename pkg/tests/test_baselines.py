import math

import numpy as np
import pytest

from oditids.baselines.cusum import (
    CooperativeCusum,
    MixtureParams,
    clairvoyant_params,
    cooperative_cusum,
    cusum_paths,
    cusum_step,
    mixture_llr,
)
from oditids.baselines.filtering import (
    FilterNetworkDetector,
    filter_detector,
    filter_scores,
    filter_thresholds,
)
from oditids.baselines.gmm import fit_gcusum, fit_mixture, mixture_mean
from oditids.baselines.renyi import (
    RenyiNetworkDetector,
    RenyiReference,
    kl_divergence,
    renyi_detector,
    renyi_divergence,
    sliding_divergence,
)
from oditids.config.config import DEFAULT_PROFILES, RenyiConfig
from oditids.detection.detector import cusum_path
from oditids.simulation.generator import generate_device
from oditids.utils.errors import DataValidationError, DimensionMismatchError

CAMERA = DEFAULT_PROFILES["security_camera"]
THERMOSTAT = DEFAULT_PROFILES["thermostat"]


class TestMixtureCusum:
    def test_no_attack_means_no_evidence(self):
        params = MixtureParams.from_profile(THERMOSTAT)
        np.testing.assert_array_equal(mixture_llr(np.arange(50), params), np.zeros(50))

    def test_counts_far_above_favor_the_attack(self):
        assert mixture_llr(140, MixtureParams.from_profile(CAMERA, 0.1)) > 0

    def test_single_component_llr_by_hand(self):
        params = MixtureParams(active_prob=1.0, active_mean=80, idle_mean=0, sigma=5, scale=1.1)
        # ((90 - 80)^2 - (90 - 88)^2) / (2 * 25)
        assert mixture_llr(90, params) == pytest.approx(1.92)

    @pytest.mark.parametrize(("s", "llr", "expected"), [(0.0, -2.0, 0.0), (1.0, 2.5, 3.5), (3.0, -1.0, 2.0)])
    def test_step(self, s, llr, expected):
        assert cusum_step(s, llr) == expected

    def test_cooperative_statistic_sums_devices(self):
        assert cooperative_cusum(np.zeros(4)) == 0.0
        assert cooperative_cusum([1.5, 0.0, 2.0]) == 3.5
        with pytest.raises(DataValidationError):
            cooperative_cusum([])

    def test_single_device_matches_a_plain_cusum(self):
        params = MixtureParams.from_profile(CAMERA, 0.1)
        counts = generate_device(CAMERA, 300, seed=1)
        network = CooperativeCusum([[params]]).run_counts([counts[:, None]])
        np.testing.assert_allclose(network, cusum_path(mixture_llr(counts, params)), atol=1e-9)

    def test_online_steps_match_the_batch_run(self):
        params = clairvoyant_params([[CAMERA, THERMOSTAT], [THERMOSTAT]], 0.2)
        counts = [
            np.column_stack([generate_device(CAMERA, 80, 2), generate_device(THERMOSTAT, 80, 3)]),
            generate_device(THERMOSTAT, 80, 4)[:, None],
        ]
        detector = CooperativeCusum(params)
        batch = detector.run_counts(counts)
        online = [detector.step([c[t] for c in counts]) for t in range(80)]
        np.testing.assert_allclose(online, batch, atol=1e-9)
        assert detector.t == 80

    def test_paths_are_columnwise(self):
        paths = cusum_paths([[1.0, -1.0], [-3.0, 2.0], [1.0, 1.0]])
        assert paths.tolist() == [[1.0, 0.0], [0.0, 2.0], [1.0, 3.0]]

    def test_width_mismatch(self):
        detector = CooperativeCusum([[MixtureParams.from_profile(CAMERA)] * 2])
        with pytest.raises(DimensionMismatchError):
            detector.run_counts([np.zeros((5, 3))])


class TestMixtureFit:
    def test_recovers_a_bimodal_device(self):
        rng = np.random.default_rng(5)
        active = rng.random(100_000) < 0.25
        samples = np.where(active, 25.0, 5.0) + 5.0 * rng.standard_normal(100_000)
        fitted = fit_mixture(samples, seed=0)
        assert fitted.active_mean == pytest.approx(25, abs=0.5)
        assert fitted.idle_mean == pytest.approx(5, abs=0.5)
        assert fitted.active_prob == pytest.approx(0.25, abs=0.05)
        assert fitted.sigma == pytest.approx(5, abs=0.5)

    def test_always_on_device_collapses(self):
        fitted = fit_mixture(generate_device(CAMERA, 5000, seed=6), seed=0)
        assert fitted.active_prob == 1.0
        assert fitted.active_mean == pytest.approx(80, abs=0.5)

    def test_constant_counts_collapse(self):
        fitted = fit_mixture(np.full(100, 7.0))
        assert fitted.active_mean == 7.0
        assert fitted.sigma == 0.5

    def test_attack_scale_from_the_attack_trace(self):
        nominal = generate_device(CAMERA, 5000, seed=7)
        attack = generate_device(CAMERA, 5000, seed=8, scale=1.2)
        (fitted,) = fit_gcusum(nominal, attack)
        assert fitted.scale == pytest.approx(1.2, abs=0.02)
        assert mixture_mean(fitted) == pytest.approx(80, abs=0.5)

    def test_empty_traces_are_rejected(self):
        with pytest.raises(DataValidationError):
            fit_gcusum(np.zeros((0, 2)), np.zeros((10, 2)))

    def test_device_sets_must_match(self):
        with pytest.raises(DimensionMismatchError):
            fit_gcusum(np.ones((10, 2)), np.ones((10, 3)))


class TestFiltering:
    def test_idle_devices_get_the_floor(self):
        assert filter_thresholds(np.zeros((50, 2))).tolist() == [0.5, 0.5]

    def test_threshold_above_the_maximum_never_alarms(self):
        counts = generate_device(CAMERA, 200, seed=9)[:, None]
        result = filter_detector(counts, [counts.max() + 1.0])
        assert result.alarm_time is None
        assert result.flagged == []

    def test_first_packet_over_the_floor_alarms(self):
        result = filter_detector([[0, 0], [0, 0], [0, 3], [4, 4]], [0.5, 0.5])
        assert result.alarm_time == 3
        assert result.flagged == [1]

    def test_scores_are_relative_to_the_threshold(self):
        scores = filter_scores([[2, 0], [4, 0], [6, 8]], [2.0, 4.0], tau=2, alarm_time=3)
        assert scores.tolist() == [2.5, 1.0]
        with pytest.raises(DataValidationError):
            filter_scores([[2, 0]], [2.0, 4.0], tau=1, alarm_time=2)

    def test_network_ratio_is_the_largest_over_nodes(self):
        detector = FilterNetworkDetector([np.array([10.0]), np.array([2.0, 4.0])])
        ratios = detector.run_counts([np.array([[5], [10]]), np.array([[1, 1], [8, 0]])])
        assert ratios.tolist() == [0.5, 4.0]

    def test_network_ratio_crosses_one_at_the_earliest_node_alarm(self):
        thresholds = [np.array([10.0]), np.array([2.0, 4.0])]
        counts = [np.array([[5], [9], [12]]), np.array([[1, 1], [2, 5], [0, 0]])]
        ratios = FilterNetworkDetector(thresholds).run_counts(counts)
        crossing = int(np.flatnonzero(ratios > 1.0)[0]) + 1
        alarms = [filter_detector(c, t).alarm_time for c, t in zip(counts, thresholds)]
        assert alarms == [3, 2]
        assert crossing == min(alarms)


class TestRenyi:
    def test_identical_distributions(self):
        p = np.array([0.2, 0.3, 0.5])
        assert renyi_divergence(p, p, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_order_near_one_approaches_kl(self):
        p, q = np.array([0.1, 0.6, 0.3]), np.array([0.3, 0.3, 0.4])
        assert renyi_divergence(p, q, 1.0 + 1e-7) == pytest.approx(kl_divergence(p, q), abs=1e-6)

    def test_missing_support_is_infinite(self):
        assert math.isinf(renyi_divergence([0.5, 0.5], [1.0, 0.0], 2.0))

    def test_order_one_is_rejected(self):
        with pytest.raises(ValueError):
            RenyiConfig(order=1.0)
        with pytest.raises(DataValidationError):
            renyi_divergence([0.5, 0.5], [0.5, 0.5], 1.0)

    def test_sliding_windows_match_the_single_window_detector(self):
        cfg = RenyiConfig(window_len=10, bins=8)
        nominal = generate_device(THERMOSTAT, 2000, seed=10)
        reference = RenyiReference.fit(nominal, cfg)
        stream = generate_device(THERMOSTAT, 60, seed=11, scale=1.5)
        path = sliding_divergence(stream, reference, cfg)
        assert np.all(path[:9] == 0)
        for t in range(9, 60):
            distance, _ = renyi_detector(stream[t - 9 : t + 1], reference, cfg)
            assert path[t] == pytest.approx(distance, abs=1e-9)

    def test_partial_window_is_rejected(self):
        cfg = RenyiConfig(window_len=10)
        reference = RenyiReference.fit(np.arange(100), cfg)
        with pytest.raises(DataValidationError):
            renyi_detector(np.arange(5), reference, cfg)

    def test_network_statistic_is_the_largest_node(self):
        cfg = RenyiConfig(window_len=5, bins=5)
        nominal = [generate_device(CAMERA, 500, seed=s)[:, None] for s in (12, 13)]
        detector = RenyiNetworkDetector.fit(nominal, cfg)
        counts = [
            generate_device(CAMERA, 40, seed=14)[:, None],
            generate_device(CAMERA, 40, seed=15, scale=2.0)[:, None],
        ]
        paths = [sliding_divergence(c.sum(axis=1), ref, cfg) for c, ref in zip(counts, detector.references)]
        np.testing.assert_allclose(detector.run_counts(counts), np.maximum(*paths))
