"""Forward measurement operators with verified adjoints / gradients.

All operators act on flattened row-major (h, w) grids. The linear ones
(block-average downsampling, circular Gaussian blur, box inpainting)
provide exact adjoints; Fourier phase retrieval is nonlinear and provides
the analytic gradient of the squared residual instead, with the convention
that the gradient contribution is zero at bins of vanishing magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnsupportedOperatorError


@dataclass(frozen=True)
class ForwardOperator:
    kind: str
    in_shape: tuple[int, int]
    out_dim: int
    linear: bool

    @property
    def m(self) -> int:
        h, w = self.in_shape
        return h * w

    def describe(self) -> str:
        return self.kind

    def _grid(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise ValueError(f"expected pixel vector of shape ({self.m},), got {x.shape}")
        return x.reshape(self.in_shape)

    def _meas(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.out_dim,):
            raise ValueError(f"expected measurement of shape ({self.out_dim},), got {y.shape}")
        return y

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        if not self.linear:
            raise UnsupportedOperatorError(f"{self.kind} has no adjoint (nonlinear operator)")
        raise NotImplementedError

    def residual_gradient(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient of ||y - A(x)||^2 with respect to x."""
        return 2.0 * self.adjoint(self.apply(x) - self._meas(y))


@dataclass(frozen=True)
class Downsample(ForwardOperator):
    factor: int = 2

    def apply(self, x):
        h, w = self.in_shape
        f = self.factor
        g = self._grid(x).reshape(h // f, f, w // f, f)
        return g.mean(axis=(1, 3)).ravel()

    def adjoint(self, y):
        h, w = self.in_shape
        f = self.factor
        g = self._meas(y).reshape(h // f, w // f) / (f * f)
        return np.repeat(np.repeat(g, f, axis=0), f, axis=1).ravel()

    def describe(self):
        return f"downsample f={self.factor} {self.in_shape[0]}x{self.in_shape[1]}"


@dataclass(frozen=True)
class GaussianBlur(ForwardOperator):
    kernel_size: int = 13
    sigma: float = 2.0
    kernel_hat: np.ndarray = field(default=None, repr=False, compare=False)

    def apply(self, x):
        xh = np.fft.fft2(self._grid(x))
        return np.fft.ifft2(xh * self.kernel_hat).real.ravel()

    def adjoint(self, y):
        yh = np.fft.fft2(self._meas(y).reshape(self.in_shape))
        return np.fft.ifft2(yh * np.conj(self.kernel_hat)).real.ravel()

    def describe(self):
        return f"gaussian_blur k={self.kernel_size} sigma={self.sigma} {self.in_shape[0]}x{self.in_shape[1]}"


@dataclass(frozen=True)
class BoxInpaint(ForwardOperator):
    mask: np.ndarray = None  # (h, w) of {0, 1}; zeros mark hidden pixels

    def __post_init__(self):
        self.mask.flags.writeable = False

    def apply(self, x):
        return (self._grid(x) * self.mask).ravel()

    def adjoint(self, y):
        return (self._meas(y).reshape(self.in_shape) * self.mask).ravel()

    def describe(self):
        hidden = int(self.mask.size - self.mask.sum())
        return f"box_inpaint hidden={hidden} {self.in_shape[0]}x{self.in_shape[1]}"


@dataclass(frozen=True)
class PhaseRetrieval(ForwardOperator):
    """Magnitude of the unitary 2-D DFT of the zero-padded image.

    The orthonormal DFT keeps measurement and gradient scales comparable to
    the pixel scale regardless of the oversampled grid size.
    """

    pad: int = 16

    def _padded(self, g: np.ndarray) -> np.ndarray:
        return np.pad(g, self.pad)

    def apply(self, x):
        u = np.fft.fft2(self._padded(self._grid(x)), norm="ortho")
        return np.abs(u).ravel()

    def residual_gradient(self, x, y):
        h, w = self.in_shape
        p = self.pad
        u = np.fft.fft2(self._padded(self._grid(x)), norm="ortho")
        mag = np.abs(u)
        ybins = self._meas(y).reshape(mag.shape)
        ratio = np.divide(mag - ybins, mag, out=np.zeros_like(mag), where=mag > 0)
        back = np.fft.ifft2(ratio * u, norm="ortho").real
        return 2.0 * back[p : p + h, p : p + w].ravel()

    def describe(self):
        return f"phase_retrieval pad={self.pad} {self.in_shape[0]}x{self.in_shape[1]}"


def _gaussian_kernel_hat(shape: tuple[int, int], kernel_size: int, sigma: float) -> np.ndarray:
    h, w = shape
    r = kernel_size // 2
    ax = np.arange(-r, r + 1)
    k1 = np.exp(-(ax**2) / (2.0 * sigma * sigma))
    k = np.outer(k1, k1)
    k /= k.sum()
    emb = np.zeros(shape)
    emb[:kernel_size, :kernel_size] = k
    emb = np.roll(emb, (-r, -r), axis=(0, 1))
    return np.fft.fft2(emb)


def make_downsample(in_shape: tuple[int, int], factor: int) -> Downsample:
    h, w = in_shape
    if factor < 1 or h % factor or w % factor:
        raise ConfigError(f"operator.factor={factor} must divide image shape {in_shape}")
    return Downsample(
        kind="downsample", in_shape=in_shape, out_dim=(h // factor) * (w // factor),
        linear=True, factor=factor,
    )


def make_gaussian_blur(in_shape: tuple[int, int], kernel_size: int, sigma: float) -> GaussianBlur:
    h, w = in_shape
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ConfigError(f"operator.kernel_size must be odd and positive, got {kernel_size}")
    if kernel_size > min(h, w):
        raise ConfigError(f"operator.kernel_size={kernel_size} exceeds image side {min(h, w)}")
    if sigma <= 0:
        raise ConfigError(f"operator.sigma must be positive, got {sigma}")
    khat = _gaussian_kernel_hat(in_shape, kernel_size, sigma)
    khat.flags.writeable = False
    return GaussianBlur(
        kind="gaussian_blur", in_shape=in_shape, out_dim=h * w, linear=True,
        kernel_size=kernel_size, sigma=float(sigma), kernel_hat=khat,
    )


def make_box_inpaint(mask: np.ndarray) -> BoxInpaint:
    mask = np.asarray(mask, dtype=float)
    if mask.ndim != 2:
        raise ConfigError(f"inpainting mask must be a 2-D grid, got shape {mask.shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise ConfigError("inpainting mask entries must be 0 or 1")
    h, w = mask.shape
    return BoxInpaint(kind="box_inpaint", in_shape=(h, w), out_dim=h * w, linear=True, mask=mask)


def make_phase_retrieval(in_shape: tuple[int, int], pad: int) -> PhaseRetrieval:
    h, w = in_shape
    if pad < 0:
        raise ConfigError(f"operator.pad must be >= 0, got {pad}")
    return PhaseRetrieval(
        kind="phase_retrieval", in_shape=in_shape, out_dim=(h + 2 * pad) * (w + 2 * pad),
        linear=False, pad=pad,
    )


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    sigma0: float
    op_id: str
    seed: int

    def __post_init__(self):
        self.y.flags.writeable = False


def simulate_measurement(
    op: ForwardOperator, x_true: np.ndarray, sigma0: float, seed: int
) -> Measurement:
    """y = A(x_true) + sigma0 * eps with a seeded Gaussian draw."""
    if sigma0 < 0:
        raise ConfigError(f"measurement.sigma0 must be >= 0, got {sigma0}")
    clean = op.apply(x_true)
    rng = np.random.default_rng(np.random.SeedSequence([0x_0B5, int(seed)]))
    y = clean + sigma0 * rng.standard_normal(clean.shape)
    return Measurement(y=y, sigma0=float(sigma0), op_id=op.describe(), seed=int(seed))


def flip180(x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """180-degree rotation of a flattened (h, w) image."""
    return np.flip(np.asarray(x, dtype=float).reshape(shape)).ravel()
