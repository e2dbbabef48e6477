"""Linear latent codec: an orthonormal-row encoder and its transpose decoder.

The decoder being the exact transpose makes encode(decode(z)) = z, so the
autoencoding term of the latent objective vanishes and solver behavior is
isolated from codec error. With d < m the decode-encode round trip is the
orthogonal projection onto the encoder row space, which models the
information loss of a real autoencoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class LatentCodec:
    m: int
    d: int
    enc: np.ndarray  # (d, m), orthonormal rows
    sigma_e: float = 0.0

    def __post_init__(self):
        if self.d > self.m:
            raise ConfigError(f"codec.d={self.d} may not exceed codec.m={self.m}")
        if self.sigma_e < 0:
            raise ConfigError(f"codec.sigma_e must be >= 0, got {self.sigma_e}")
        self.enc.flags.writeable = False

    @property
    def dec(self) -> np.ndarray:
        return self.enc.T


def make_codec(m: int, d: int, seed: int, sigma_e: float = 0.0) -> LatentCodec:
    """Seeded random orthonormalization of a Gaussian matrix."""
    if m < 1 or d < 1:
        raise ConfigError(f"codec dimensions must be positive, got m={m}, d={d}")
    if d > m:
        raise ConfigError(f"codec.d={d} may not exceed codec.m={m}")
    rng = np.random.default_rng(np.random.SeedSequence([0x_C0DEC, int(seed)]))
    q, _ = np.linalg.qr(rng.standard_normal((m, d)))
    return LatentCodec(m=m, d=d, enc=np.ascontiguousarray(q.T), sigma_e=float(sigma_e))


def make_flip_codec(
    shape: tuple[int, int], d: int, seed: int, sigma_e: float = 0.0
) -> LatentCodec:
    """Codec whose row space is closed under 180-degree image rotation.

    Half of the rows are flip-symmetric, half flip-antisymmetric, so
    encode(flip(x)) = R encode(x) for the diagonal involution R = (+1...,-1...).
    This keeps a flipped in-rowspace image exactly representable, which the
    phase-retrieval symmetry experiment relies on.
    """
    h, w = shape
    m = h * w
    if d % 2 or d < 2:
        raise ConfigError(f"flip-symmetric codec needs even d >= 2, got {d}")
    if d > m:
        raise ConfigError(f"codec.d={d} may not exceed codec.m={m}")
    rng = np.random.default_rng(np.random.SeedSequence([0x_C0DEC, int(seed), 1]))
    half = d // 2

    def flip_vecs(v):
        return np.flip(v.reshape(-1, h, w), axis=(1, 2)).reshape(-1, m)

    raw = rng.standard_normal((half, m))
    sym = raw + flip_vecs(raw)
    raw = rng.standard_normal((half, m))
    asym = raw - flip_vecs(raw)
    qs, _ = np.linalg.qr(sym.T)
    qa, _ = np.linalg.qr(asym.T)
    enc = np.concatenate([qs.T, qa.T])
    return LatentCodec(m=m, d=d, enc=np.ascontiguousarray(enc), sigma_e=float(sigma_e))


def flip_involution(codec_d: int) -> np.ndarray:
    """Latent-coordinate signs matching make_flip_codec's row ordering."""
    r = np.ones(codec_d)
    r[codec_d // 2 :] = -1.0
    return r


def _check_dim(v: np.ndarray, n: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != n:
        raise ValueError(f"{what} must have trailing dimension {n}, got shape {v.shape}")
    return v


def encode_mean(codec: LatentCodec, x: np.ndarray) -> np.ndarray:
    x = _check_dim(x, codec.m, "pixel vector")
    return x @ codec.enc.T


def encode_sample(codec: LatentCodec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Mean encoding plus isotropic encoder noise from the supplied stream."""
    z = encode_mean(codec, x)
    return z + codec.sigma_e * rng.standard_normal(z.shape)


def decode(codec: LatentCodec, z: np.ndarray) -> np.ndarray:
    z = _check_dim(z, codec.d, "latent vector")
    return z @ codec.enc
