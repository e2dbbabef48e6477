import numpy as np
import pytest

from treg.codec import (
    decode,
    encode_mean,
    encode_sample,
    flip_involution,
    make_codec,
    make_flip_codec,
)
from treg.errors import ConfigError
from treg.operators import flip180


class TestRandomCodec:
    def test_rows_orthonormal(self):
        c = make_codec(64, 12, seed=0)
        assert np.max(np.abs(c.enc @ c.enc.T - np.eye(12))) < 1e-10

    def test_decoder_is_exact_transpose(self):
        c = make_codec(64, 12, seed=0)
        assert c.dec is not c.enc
        assert np.array_equal(c.dec, c.enc.T)

    def test_square_codec_is_isometry(self):
        c = make_codec(16, 16, seed=1)
        x = np.random.default_rng(2).standard_normal(16)
        z = encode_mean(c, x)
        assert np.linalg.norm(z) == pytest.approx(np.linalg.norm(x), rel=1e-12)
        assert np.allclose(decode(c, z), x, atol=1e-12)

    def test_latent_round_trip_identity(self):
        """encode(decode(z)) = z: the autoencoding residual vanishes exactly."""
        c = make_codec(100, 8, seed=3)
        z = np.random.default_rng(4).standard_normal(8)
        assert np.max(np.abs(encode_mean(c, decode(c, z)) - z)) < 1e-12

    def test_pixel_round_trip_is_projection(self):
        c = make_codec(100, 8, seed=3)
        x = np.random.default_rng(5).standard_normal(100)
        p1 = decode(c, encode_mean(c, x))
        p2 = decode(c, encode_mean(c, p1))
        assert np.allclose(p1, p2, atol=1e-12)

    def test_zero_maps_to_zero(self):
        c = make_codec(10, 4, seed=0)
        assert np.array_equal(encode_mean(c, np.zeros(10)), np.zeros(4))
        assert np.array_equal(decode(c, np.zeros(4)), np.zeros(10))

    def test_dimension_errors(self):
        c = make_codec(10, 4, seed=0)
        with pytest.raises(ValueError):
            encode_mean(c, np.zeros(9))
        with pytest.raises(ValueError):
            decode(c, np.zeros(5))
        with pytest.raises(ConfigError):
            make_codec(4, 10, seed=0)


class TestEncodeSample:
    def test_zero_sigma_equals_mean(self):
        c = make_codec(20, 6, seed=7, sigma_e=0.0)
        x = np.random.default_rng(0).standard_normal(20)
        rng = np.random.default_rng(1)
        assert np.array_equal(encode_sample(c, x, rng), encode_mean(c, x))

    def test_seeded_reproducibility(self):
        c = make_codec(20, 6, seed=7, sigma_e=0.5)
        x = np.random.default_rng(0).standard_normal(20)
        a = encode_sample(c, x, np.random.default_rng(42))
        b = encode_sample(c, x, np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_empirical_std_matches_sigma(self):
        sigma = 0.7
        c = make_codec(5, 2, seed=7, sigma_e=sigma)
        x = np.zeros(5)
        rng = np.random.default_rng(11)
        draws = np.stack([encode_sample(c, x, rng) for _ in range(100_000)])
        assert draws.std() == pytest.approx(sigma, rel=0.02)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ConfigError):
            make_codec(10, 2, seed=0, sigma_e=-0.1)


class TestFlipCodec:
    def test_rows_orthonormal(self):
        c = make_flip_codec((8, 8), 10, seed=5)
        assert np.max(np.abs(c.enc @ c.enc.T - np.eye(10))) < 1e-10

    def test_rowspace_closed_under_flip(self):
        c = make_flip_codec((8, 8), 10, seed=5)
        r = flip_involution(10)
        z = np.random.default_rng(6).standard_normal(10)
        x = decode(c, z)
        assert np.allclose(flip180(x, (8, 8)), decode(c, r * z), atol=1e-12)
        assert np.allclose(encode_mean(c, flip180(x, (8, 8))), r * z, atol=1e-12)

    def test_odd_d_rejected(self):
        with pytest.raises(ConfigError, match="even"):
            make_flip_codec((8, 8), 7, seed=0)
