"""Tests for path loss, shadowing and small-scale fading."""

import logging

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import NumericalError, ParameterError
from app.core.network.channel import (
    LargeScaleRealization,
    ShadowModel,
    large_scale,
    path_loss_db,
    sample_large_scale,
    sample_shadow,
    sample_small_scale,
    shadow_covariance,
)
from app.core.network.scenario import UEDrop, place_aps, sample_ue_drop


def _drop(*points: tuple[float, float]) -> UEDrop:
    return UEDrop(ue_positions=np.array(points, dtype=float), area_side=700.0)


class TestPathLoss:
    """Test cases for the microcell path-loss law."""

    def test_reference_value(self):
        assert path_loss_db(100.0, 2.0) == pytest.approx(103.927, abs=1e-3)

    def test_unit_distance_and_carrier(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert path_loss_db(1.0, 1.0) == pytest.approx(22.7)
        assert "outside the model validity range" in caplog.text

    def test_decade_slope(self):
        assert path_loss_db(1000.0, 3.5) - path_loss_db(100.0, 3.5) == pytest.approx(36.7)

    def test_vectorized(self):
        loss = path_loss_db(np.array([10.0, 100.0]), 2.0)

        assert loss.shape == (2,)
        assert loss[1] - loss[0] == pytest.approx(36.7)

    @pytest.mark.parametrize("distance", [0.0, -5.0])
    def test_non_positive_distance(self, distance):
        with pytest.raises(ParameterError):
            path_loss_db(distance, 2.0)


class TestShadowing:
    """Test cases for correlated log-normal shadowing."""

    def test_co_located_ues_fully_correlated(self):
        cov = shadow_covariance(_drop((10.0, 10.0), (10.0, 10.0)), ShadowModel())

        assert cov[0, 1] == pytest.approx(16.0)

    def test_half_correlation_at_decorrelation_distance(self):
        cov = shadow_covariance(_drop((0.0, 0.0), (9.0, 0.0)), ShadowModel(4.0, 9.0))

        assert cov[0, 1] == pytest.approx(8.0)
        assert cov[0, 0] == pytest.approx(16.0)

    def test_far_apart_ues_uncorrelated(self):
        cov = shadow_covariance(_drop((0.0, 0.0), (900.0, 0.0)), ShadowModel(4.0, 9.0))

        assert cov[0, 1] == pytest.approx(16.0 * 2.0**-100)
        assert cov[0, 1] < 1e-20

    def test_zero_sigma_gives_zero_shadowing(self, rng):
        cov = shadow_covariance(_drop((0.0, 0.0), (5.0, 5.0)), ShadowModel(sigma_sf=0.0))

        shadow = sample_shadow(cov, 4, rng)

        np.testing.assert_array_equal(shadow, np.zeros((4, 2)))

    def test_single_ue_variance(self, rng):
        cov = shadow_covariance(_drop((0.0, 0.0)), ShadowModel(sigma_sf=4.0))

        shadow = sample_shadow(cov, 100_000, rng)

        assert shadow.var() == pytest.approx(16.0, abs=0.5)

    def test_co_located_columns_equal(self, rng):
        cov = shadow_covariance(_drop((50.0, 50.0), (50.0, 50.0)), ShadowModel())

        shadow = sample_shadow(cov, 25, rng)

        np.testing.assert_array_equal(shadow[:, 0], shadow[:, 1])

    def test_co_located_pair_among_others(self, rng):
        drop = _drop((0.0, 0.0), (50.0, 50.0), (30.0, 10.0), (50.0, 50.0))
        cov = shadow_covariance(drop, ShadowModel())

        shadow = sample_shadow(cov, 25, rng)

        np.testing.assert_array_equal(shadow[:, 1], shadow[:, 3])
        assert not np.array_equal(shadow[:, 0], shadow[:, 2])

    def test_empirical_covariance(self, rng):
        cov = shadow_covariance(_drop((0.0, 0.0), (5.0, 0.0), (40.0, 30.0)), ShadowModel())

        shadow = sample_shadow(cov, 100_000, rng)

        empirical = np.cov(shadow, rowvar=False)
        assert np.linalg.norm(empirical - cov) / np.linalg.norm(cov) < 0.05

    def test_singular_covariance_falls_back_to_jitter(self, rng):
        cov = np.outer([1.0, 2.0], [1.0, 2.0])

        shadow = sample_shadow(cov, 50, rng)

        np.testing.assert_allclose(shadow[:, 1], 2.0 * shadow[:, 0], atol=1e-3)

    def test_indefinite_covariance_rejected(self, rng):
        with pytest.raises(NumericalError):
            sample_shadow(np.array([[1.0, 2.0], [2.0, 1.0]]), 3, rng)

    def test_invalid_model(self):
        with pytest.raises(ParameterError):
            ShadowModel(sigma_sf=-1.0)
        with pytest.raises(ParameterError):
            ShadowModel(delta_sf=0.0)


class TestLargeScale:
    """Test cases for β composition."""

    def test_zero_shadow_matches_path_loss(self, rng):
        scenario = place_aps(1, 700.0, 0.0, rng)
        drop = _drop((350.0, 350.0))

        realization = large_scale(scenario, drop, np.zeros((1, 1)), 2.0)

        expected = 10.0 ** (-path_loss_db(10.0, 2.0) / 10.0)
        assert realization.beta[0, 0] == pytest.approx(expected)

    def test_shadow_is_additive_in_db(self, rng):
        scenario = place_aps(2, 700.0, 0.5, rng)
        drop = sample_ue_drop(3, 700.0, rng)
        shadow = np.zeros((4, 3))
        shadow[1, 2] = 10.0

        base = large_scale(scenario, drop, np.zeros((4, 3)), 2.0)
        shifted = large_scale(scenario, drop, shadow, 2.0)

        assert shifted.beta[1, 2] == pytest.approx(10.0 * base.beta[1, 2])
        assert shifted.beta[0, 0] == base.beta[0, 0]

    def test_shape_mismatch(self, rng):
        scenario = place_aps(2, 700.0, 0.5, rng)
        drop = sample_ue_drop(3, 700.0, rng)

        with pytest.raises(ParameterError):
            large_scale(scenario, drop, np.zeros((3, 3)), 2.0)

    def test_default_setup_gains_below_one(self):
        rng = np.random.default_rng(5)
        scenario = place_aps(5, 700.0, 0.5, rng)
        for _ in range(20):
            drop = sample_ue_drop(10, 700.0, rng)
            realization = sample_large_scale(scenario, drop, ShadowModel(), 2.0, rng)
            assert np.all(realization.beta > 0.0)
            assert np.all(realization.beta < 1.0)

    def test_from_beta(self):
        realization = LargeScaleRealization.from_beta(np.array([[1e-10]]))

        assert realization.pathloss_db[0, 0] == pytest.approx(100.0)
        assert realization.beta_db[0, 0] == pytest.approx(-100.0)

    def test_to_csv(self, tmp_path):
        realization = LargeScaleRealization.from_beta(np.array([[1e-10, 2e-10], [3e-10, 4e-10]]))
        path = tmp_path / "beta.csv"

        realization.to_csv(path)

        frame = pd.read_csv(path, index_col="ap")
        assert list(frame.columns) == ["ue_0", "ue_1"]
        assert frame.loc[1, "ue_0"] == pytest.approx(3e-10)


class TestSmallScale:
    """Test cases for Rayleigh fading draws."""

    def test_zero_gain_gives_zero_channel(self, rng):
        h = sample_small_scale(np.array([0.0, 1.0]), 4, rng)

        np.testing.assert_array_equal(h[0], np.zeros(4))

    def test_channel_energy(self, rng):
        h = sample_small_scale(np.ones(100_000), 4, rng)

        energy = np.mean(np.sum(np.abs(h) ** 2, axis=1))
        assert energy == pytest.approx(4.0, rel=0.02)

    def test_real_part_variance(self, rng):
        h = sample_small_scale(np.ones(100_000), 1, rng)

        assert np.var(h.real) == pytest.approx(0.5, rel=0.02)
