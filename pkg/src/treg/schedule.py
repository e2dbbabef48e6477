"""Variance-preserving noise schedule and step respacing for the sampler.

``alpha_bar[t]`` is the cumulative product of (1 - beta_s) up to timestep t,
with the convention ``alpha_bar[0] = 1`` so that formulas involving the
previous timestep are well defined at the last sampling step without
branching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_T = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012


@dataclass(frozen=True)
class NoiseSchedule:
    """Discrete VP schedule.

    Both arrays have length T + 1 and are indexed directly by timestep t:
    ``alpha_bar[0] = 1`` and ``beta_tilde[0] = 0`` are sentinels.
    ``beta_tilde[t]`` is the posterior std coefficient
    sqrt((1 - abar_{t-1}) / (1 - abar_t)) * sqrt(1 - abar_t / abar_{t-1}).
    """

    T: int
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray

    def __post_init__(self):
        self.alpha_bar.flags.writeable = False
        self.beta_tilde.flags.writeable = False


def make_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear-beta schedule with ``alpha_bar_t`` as a running product."""
    if not isinstance(T, int) or T < 1:
        raise ConfigError(f"schedule.T must be a positive integer, got {T!r}")
    if not 0.0 < beta_start < 1.0:
        raise ConfigError(f"schedule.beta_start must lie in (0, 1), got {beta_start!r}")
    if not 0.0 < beta_end < 1.0:
        raise ConfigError(f"schedule.beta_end must lie in (0, 1), got {beta_end!r}")
    if beta_start > beta_end:
        raise ConfigError(
            f"schedule.beta_start={beta_start!r} exceeds schedule.beta_end={beta_end!r}"
        )
    betas = np.linspace(beta_start, beta_end, T)
    alpha_bar = np.empty(T + 1)
    alpha_bar[0] = 1.0
    alpha_bar[1:] = np.cumprod(1.0 - betas)

    prev = alpha_bar[:-1]
    cur = alpha_bar[1:]
    beta_tilde = np.zeros(T + 1)
    beta_tilde[1:] = np.sqrt((1.0 - prev) / (1.0 - cur)) * np.sqrt(1.0 - cur / prev)
    return NoiseSchedule(T=T, alpha_bar=alpha_bar, beta_tilde=beta_tilde)


def subsample_steps(sched: NoiseSchedule, nfe: int) -> list[int]:
    """Strictly decreasing visited timesteps, uniformly spaced from T down.

    Stride is floor(T / nfe), so for nfe dividing T the final visited step
    equals the stride (e.g. T=1000, nfe=200 visits 1000, 995, ..., 5).
    """
    if not isinstance(nfe, int) or nfe < 1:
        raise ConfigError(f"solver.nfe must be a positive integer, got {nfe!r}")
    if nfe > sched.T:
        raise ConfigError(f"solver.nfe={nfe} exceeds schedule T={sched.T}")
    stride = sched.T // nfe
    return [sched.T - i * stride for i in range(nfe)]
