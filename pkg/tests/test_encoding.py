"""Velocity statistics against independent oracles, and the five encodings."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from conftest import make_grid, random_grid
from dogseg.encoding import (
    EPS,
    EncodedImage,
    GridImageEncoder,
    encode,
    mahalanobis,
    normalized_velocity,
    overall_variance,
    render_dog,
)
from dogseg.errors import GridValidationError


def random_stats(rng, n):
    """Random per-cell stats with strictly PSD covariance."""
    vx = rng.uniform(-25, 25, n)
    vy = rng.uniform(-25, 25, n)
    var_x = rng.uniform(0.01, 50, n)
    var_y = rng.uniform(0.01, 50, n)
    cov = rng.uniform(-0.95, 0.95, n) * np.sqrt(var_x * var_y)
    return vx, vy, var_x, var_y, cov


class TestMahalanobis:
    def test_matches_linear_solve_oracle(self, rng):
        # oracle: per-sample 2x2 solve of (Sigma + eps I) z = v, m = sqrt(v.z)
        vx, vy, var_x, var_y, cov = random_stats(rng, 1000)
        got = mahalanobis(vx, vy, var_x, var_y, cov)
        for i in range(1000):
            sigma = np.array([[var_x[i] + EPS, cov[i]], [cov[i], var_y[i] + EPS]])
            v = np.array([vx[i], vy[i]])
            expected = np.sqrt(v @ np.linalg.solve(sigma, v))
            assert got[i] == pytest.approx(expected, rel=1e-9)

    def test_zero_velocity_is_exactly_zero(self):
        assert mahalanobis(0.0, 0.0, 3.0, 5.0, 1.0) == 0.0

    def test_scalar_returns_float(self):
        out = mahalanobis(1.0, 0.0, 1.0, 1.0, 0.0)
        assert isinstance(out, float)
        assert out == pytest.approx(1.0 / np.sqrt(1.0 + EPS), rel=1e-12)

    def test_eps_keeps_zero_variance_finite(self):
        out = mahalanobis(1.0, 0.0, 0.0, 0.0, 0.0)
        assert out == pytest.approx(1.0 / np.sqrt(EPS), rel=1e-12)

    def test_diagonal_case_decouples(self, rng):
        vx, vy = 3.0, -4.0
        out = mahalanobis(vx, vy, 4.0, 9.0, 0.0)
        expected = np.sqrt(vx**2 / (4.0 + EPS) + vy**2 / (9.0 + EPS))
        assert out == pytest.approx(expected, rel=1e-12)

    def test_negative_variance_rejected(self):
        with pytest.raises(GridValidationError, match="var_x"):
            mahalanobis(1.0, 0.0, -0.5, 1.0, 0.0)

    def test_non_invertible_covariance_rejected(self):
        with pytest.raises(GridValidationError, match="invertible"):
            mahalanobis(1.0, 0.0, 0.0, 0.0, 1.0)

    def test_invariant_under_rotation_of_inputs(self, rng):
        # m depends only on v through Sigma^-1, so rotating both leaves it
        vx, vy, var_x, var_y, cov = (float(a[0]) for a in random_stats(rng, 1))
        base = mahalanobis(vx, vy, var_x, var_y, cov)
        for theta in (0.3, 1.2, 2.5):
            c, s = np.cos(theta), np.sin(theta)
            rvx, rvy = c * vx - s * vy, s * vx + c * vy
            rvar_x = c * c * var_x - 2 * c * s * cov + s * s * var_y
            rvar_y = s * s * var_x + 2 * c * s * cov + c * c * var_y
            rcov = c * s * (var_x - var_y) + (c * c - s * s) * cov
            assert mahalanobis(rvx, rvy, rvar_x, rvar_y, rcov) == pytest.approx(
                base, rel=1e-6
            )


class TestNormalizedVelocity:
    def test_matches_direct_formula(self, rng):
        v = rng.uniform(-30, 30, 1000)
        var = rng.uniform(0.0, 50, 1000)
        got = normalized_velocity(v, var)
        expected = np.clip(v / np.sqrt(var + EPS), -3.0, 3.0)
        assert np.allclose(got, expected, rtol=1e-9, atol=0)

    def test_clips_to_plus_minus_three(self):
        assert normalized_velocity(100.0, 1.0) == 3.0
        assert normalized_velocity(-100.0, 1.0) == -3.0

    def test_scalar_returns_float(self):
        assert isinstance(normalized_velocity(1.0, 1.0), float)


class TestOverallVariance:
    def test_matches_algebra(self, rng):
        _, _, var_x, var_y, cov = random_stats(rng, 1000)
        got = overall_variance(var_x, cov, var_y)
        assert np.allclose(got, var_x + 2.0 * cov + var_y, rtol=1e-12)

    def test_monte_carlo_variance_of_sum(self, rng):
        # the formula is Var(vx + vy) for (vx, vy) ~ N(mu, Sigma)
        for var_x, var_y, rho in [(4.0, 1.0, 0.5), (2.0, 7.0, -0.8), (1.0, 1.0, 0.0)]:
            cov = rho * np.sqrt(var_x * var_y)
            sigma = np.array([[var_x, cov], [cov, var_y]])
            draws = rng.multivariate_normal([1.0, -2.0], sigma, size=200_000)
            empirical = draws.sum(axis=1).var()
            assert overall_variance(var_x, cov, var_y) == pytest.approx(
                empirical, rel=0.02
            )

    def test_psd_inputs_never_negative(self, rng):
        _, _, var_x, var_y, cov = random_stats(rng, 1000)
        assert (overall_variance(var_x, cov, var_y) >= 0).all()


class TestEncodedImage:
    def test_validates_range(self):
        with pytest.raises(GridValidationError, match="outside"):
            EncodedImage(1, np.full((3, 2, 2), 1.5, dtype=np.float32))

    def test_validates_shape_and_config(self):
        with pytest.raises(GridValidationError, match="3, H, W"):
            EncodedImage(1, np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(GridValidationError, match="config_id"):
            EncodedImage(9, np.zeros((3, 2, 2), dtype=np.float32))

    def test_to_rgb8_flips_channel_order(self):
        channels = np.zeros((3, 1, 1), dtype=np.float32)
        channels[0] = 1.0  # blue
        channels[2] = 0.5  # red
        rgb = EncodedImage(1, channels).to_rgb8()
        assert rgb.shape == (1, 1, 3)
        assert rgb[0, 0].tolist() == [128, 0, 255]  # R, G, B


class TestEncodeConfigs:
    def grid(self):
        return make_grid(
            h=2, w=2,
            occ=np.array([[0.0, 0.5], [0.75, 1.0]], dtype=np.float32),
            vx=np.array([[5.0, -30.0], [0.5, 20.0]], dtype=np.float32),
            vy=np.array([[-5.0, 2.0], [0.1, -20.0]], dtype=np.float32),
            var_x=np.array([[4.0, 0.25], [1.0, 9.0]], dtype=np.float32),
            var_y=np.array([[1.0, 0.25], [1.0, 4.0]], dtype=np.float32),
            cov_xy=np.array([[0.5, 0.0], [0.0, -1.0]], dtype=np.float32),
        )

    def test_config1_raw_velocity(self):
        g = self.grid()
        img = encode(g, 1)
        occ = g.occ.astype(np.float64)
        assert np.allclose(img.channels[0], occ, atol=1e-7)
        expected_g = (np.clip(g.vx.astype(np.float64), -20, 20) + 20) / 40
        expected_r = (np.clip(g.vy.astype(np.float64), -20, 20) + 20) / 40
        assert np.allclose(img.channels[1], expected_g, atol=1e-7)
        assert np.allclose(img.channels[2], expected_r, atol=1e-7)

    def test_config2_normalized_velocity(self):
        g = self.grid()
        img = encode(g, 2)
        zx = np.clip(g.vx / np.sqrt(g.var_x + EPS), -3, 3)
        zy = np.clip(g.vy / np.sqrt(g.var_y + EPS), -3, 3)
        assert np.allclose(img.channels[0], g.occ, atol=1e-7)
        assert np.allclose(img.channels[1], (zx + 3) / 6, atol=1e-6)
        assert np.allclose(img.channels[2], (zy + 3) / 6, atol=1e-6)

    def test_config3_folds_freespace(self):
        g = self.grid()
        img = encode(g, 3)
        expected_b = 2 * (np.maximum(g.occ.astype(np.float64), 0.5) - 0.5)
        assert np.allclose(img.channels[0], expected_b, atol=1e-7)
        # free and unknown cells collapse to the same blue value
        assert img.channels[0, 0, 0] == img.channels[0, 0, 1] == 0.0
        assert np.array_equal(img.channels[1:], encode(g, 2).channels[1:])

    def test_config4_speed_and_variance(self):
        g = self.grid()
        img = encode(g, 4)
        speed = np.hypot(g.vx.astype(np.float64), g.vy.astype(np.float64))
        var = g.var_x.astype(np.float64) + 2 * g.cov_xy.astype(np.float64) \
            + g.var_y.astype(np.float64)
        assert np.allclose(img.channels[1], np.clip(speed, 0, 20) / 20, atol=1e-6)
        assert np.allclose(img.channels[2], np.clip(var, 0, 100) / 100, atol=1e-6)

    def test_config5_mahalanobis_channel(self):
        g = self.grid()
        img = encode(g, 5)
        m = mahalanobis(g.vx, g.vy, g.var_x, g.var_y, g.cov_xy)
        assert np.allclose(img.channels[2], np.clip(m, 0, 10) / 10, atol=1e-6)

    def test_invalid_config_rejected(self):
        with pytest.raises(GridValidationError, match="config_id"):
            encode(self.grid(), 6)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), config_id=st.sampled_from([1, 2, 3, 4, 5]))
    def test_channels_always_unit_range(self, seed, config_id):
        g = random_grid(np.random.default_rng(seed), h=4, w=4, max_speed=40.0)
        img = encode(g, config_id)
        assert img.channels.dtype == np.float32
        assert np.isfinite(img.channels).all()
        assert img.channels.min() >= 0.0 and img.channels.max() <= 1.0


class TestGridImageEncoder:
    def test_single_and_batch(self, rng):
        enc = GridImageEncoder(config_id=5)
        g = random_grid(rng)
        out = enc.transform(g)
        assert isinstance(out, EncodedImage) and out.config_id == 5
        outs = enc.transform([g, g])
        assert len(outs) == 2 and np.array_equal(outs[0].channels, out.channels)

    def test_bad_config_raises(self, rng):
        with pytest.raises(GridValidationError):
            GridImageEncoder(config_id=0).transform(random_grid(rng))

    def test_sklearn_clone(self):
        enc = GridImageEncoder(config_id=3)
        assert clone(enc).get_params() == {"config_id": 3}


class TestRenderDog:
    def test_shape_and_dtype(self, rng):
        img = render_dog(random_grid(rng, h=6, w=4))
        assert img.shape == (6, 4, 3) and img.dtype == np.uint8

    def test_zero_velocity_renders_gray(self):
        g = make_grid(occ=0.8, vx=0.0, vy=0.0)
        img = render_dog(g)
        assert (img[..., 0] == img[..., 1]).all() and (img[..., 1] == img[..., 2]).all()
        assert img[0, 0, 0] == round(np.float32(0.8) * 255)

    def test_free_cells_render_black(self):
        img = render_dog(make_grid(occ=0.0, vx=5.0))
        assert (img == 0).all()
