"""Reconstruction metrics: PSNR, measurement-domain MSE, restart variance."""

from __future__ import annotations

import math

import numpy as np

from .operators import ForwardOperator


def psnr(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def y_mse(op: ForwardOperator, x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared residual on the measurement domain, ||y - A(x)||^2 / n."""
    r = np.asarray(y, dtype=float) - op.apply(x)
    return float(r @ r) / r.size


def pixel_variance(
    runs: list[np.ndarray],
    shape: tuple[int, int] | None = None,
    profile_row: int | None = None,
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Per-pixel unbiased sample variance across reconstructions.

    With ``shape`` and ``profile_row`` also returns the variance profile
    along that image row.
    """
    if len(runs) < 2:
        raise ValueError(f"pixel variance needs at least 2 runs, got {len(runs)}")
    stack = np.stack([np.asarray(r, dtype=float) for r in runs])
    var = stack.var(axis=0, ddof=1)
    if profile_row is None:
        return var
    if shape is None:
        raise ValueError("profile_row requires the image shape")
    grid = var.reshape(shape)
    if not 0 <= profile_row < shape[0]:
        raise ValueError(f"profile_row {profile_row} outside image of shape {shape}")
    return var, grid[profile_row].copy()
