"""Reverse-sampling loop with latent optimization, optional DPS branch and
adaptive negation.

Each visited timestep forms a guided denoised pivot. On latent-optimization
steps (t in the update range Gamma) the pivot is decoded, pulled toward the
measurement by the proximal solver, re-encoded, blended with the pivot by
the abar_{t-1} convex combination and advanced by the total-noise update;
the null embedding is then updated. Elsewhere the step is a deterministic
denoising update, optionally followed by a measurement-gradient (DPS)
correction computed through the exact posterior-mean Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import negation as neg
from .codec import LatentCodec, decode, encode_mean
from .consistency import AdamParams, CGParams, adam_solve, cg_solve
from .errors import ConfigError, DivergedError
from .operators import ForwardOperator, Measurement
from .prior import (
    NULL_EMBEDDING,
    ConceptPrior,
    eps_cfg,
    eps_cond,
    eps_null,
    posterior_mean_jacobian,
    posterior_mean_oracle,
    tweedie,
    uniform_weights,
)
from .schedule import NoiseSchedule, subsample_steps

STOCH_DEFAULT = "default"
STOCH_DETERMINISTIC = "deterministic"
STOCH_CUSTOM = "custom"
_STOCH_MODES = (STOCH_DEFAULT, STOCH_DETERMINISTIC, STOCH_CUSTOM)

BRANCH_LATENT_OPT = "latent_opt"
BRANCH_DPS = "dps"
BRANCH_PLAIN = "plain"

DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class SolverConfig:
    nfe: int = 200
    omega1: float = 7.5
    omega2: float = 0.0
    gamma_mod: int = 3
    gamma_tmax: int = 850
    cg: CGParams = field(default_factory=CGParams)
    adam: AdamParams = field(default_factory=AdamParams)
    use_adam: bool = False
    stochasticity: str = STOCH_DEFAULT
    custom_s: np.ndarray | None = None  # indexed by timestep t, length T+1
    dps_enabled: bool = False
    # The no-consistency branch defaults to a deterministic denoising step;
    # setting plain_stochastic applies the total-noise rule there as well.
    plain_stochastic: bool = False
    negation_enabled: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.omega1 < 0 or self.omega2 < 0:
            raise ConfigError("solver CFG scales must be >= 0")
        if self.gamma_mod < 1:
            raise ConfigError(f"solver.gamma_mod must be >= 1, got {self.gamma_mod}")
        if self.gamma_tmax < 0:
            raise ConfigError(f"solver.gamma_tmax must be >= 0, got {self.gamma_tmax}")
        if self.stochasticity not in _STOCH_MODES:
            raise ConfigError(f"solver.stochasticity must be one of {_STOCH_MODES}")
        if self.stochasticity == STOCH_CUSTOM and self.custom_s is None:
            raise ConfigError("solver.stochasticity=custom requires solver.custom_s")

    def with_seed(self, seed: int) -> "SolverConfig":
        return replace(self, seed=int(seed))


@dataclass
class StepRecord:
    t: int
    branch: str
    data_consistency: float
    dsm_loss: float
    null_similarity: float


@dataclass
class RunTrace:
    records: list[StepRecord] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.records])

    def gamma_records(self) -> list[StepRecord]:
        return [r for r in self.records if r.branch == BRANCH_LATENT_OPT]

    def at(self, t: int) -> StepRecord:
        for r in self.records:
            if r.t == t:
                return r
        raise KeyError(f"no trace record for t={t}")


def ema_combine(z0_y: np.ndarray, z0_t: np.ndarray, abar_prev: float) -> np.ndarray:
    """Convex blend abar_prev * z0_y + (1 - abar_prev) * z0_t."""
    if not 0.0 <= abar_prev <= 1.0:
        raise ValueError(f"abar_prev must lie in [0, 1], got {abar_prev}")
    return abar_prev * z0_y + (1.0 - abar_prev) * z0_t


def total_noise(
    eps_guided: np.ndarray, eps_rand: np.ndarray, abar_prev: float, s_t: float
) -> np.ndarray:
    """Mixture [sqrt(1-abar_prev-s^2) eps_guided + s eps_rand] / sqrt(1-abar_prev)."""
    if s_t < 0:
        raise ValueError(f"s_t must be >= 0, got {s_t}")
    rem = 1.0 - abar_prev
    if rem <= 0.0:
        raise ValueError("total_noise requires abar_prev < 1")
    if s_t * s_t > rem:
        raise ValueError(f"stochasticity s_t={s_t} violates s_t^2 <= 1 - abar_prev={rem}")
    return (np.sqrt(rem - s_t * s_t) * eps_guided + s_t * eps_rand) / np.sqrt(rem)


def ddim_step(z_hat: np.ndarray, eps_tilde: np.ndarray, abar_prev: float) -> np.ndarray:
    """sqrt(abar_prev) * z_hat + sqrt(1 - abar_prev) * eps_tilde."""
    return np.sqrt(abar_prev) * z_hat + np.sqrt(1.0 - abar_prev) * eps_tilde


def default_stochasticity(abar_prev: float) -> float:
    return float(np.sqrt(abar_prev * (1.0 - abar_prev)))


def dps_gradient(
    prior: ConceptPrior,
    codec: LatentCodec,
    op: ForwardOperator,
    y: np.ndarray,
    z_t: np.ndarray,
    t: int,
    sched: NoiseSchedule,
    concept: str | None,
    weights: np.ndarray | None,
    omega2: float,
) -> np.ndarray:
    """Exact gradient of ||A(decode(z0_hat(z_t))) - y||^2 with respect to z_t.

    z0_hat is the denoised estimate under guidance scale omega2, so its
    Jacobian is the matching affine combination of the null and conditional
    posterior-mean Jacobians.
    """
    pm_null = posterior_mean_oracle(prior, z_t, t, None, sched, weights)
    jac_null = posterior_mean_jacobian(prior, z_t, t, None, sched, weights)
    if omega2 == 0.0 or concept is None:
        z0_hat, jac = pm_null, jac_null
    else:
        pm_c = posterior_mean_oracle(prior, z_t, t, concept, sched)
        jac_c = posterior_mean_jacobian(prior, z_t, t, concept, sched)
        z0_hat = (1.0 - omega2) * pm_null + omega2 * pm_c
        jac = (1.0 - omega2) * jac_null + omega2 * jac_c
    grad_x = op.residual_gradient(decode(codec, z0_hat), y)
    return jac.T @ encode_mean(codec, grad_x)


def dps_step(
    z_prev: np.ndarray,
    z_t: np.ndarray,
    t: int,
    prior: ConceptPrior,
    codec: LatentCodec,
    op: ForwardOperator,
    y: np.ndarray,
    rho_t: float,
    omega2: float,
    sched: NoiseSchedule,
    concept: str | None = None,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Measurement-gradient correction z_prev - rho_t * grad."""
    return z_prev - rho_t * dps_gradient(
        prior, codec, op, y, z_t, t, sched, concept, weights, omega2
    )


def _gamma_set(cfg: SolverConfig, steps: list[int]) -> set[int]:
    return {t for t in steps if t % cfg.gamma_mod == 0 and t <= cfg.gamma_tmax}


def _stochasticity_at(cfg: SolverConfig, abar_prev: float, t: int) -> float:
    if cfg.stochasticity == STOCH_DETERMINISTIC:
        return 0.0
    if cfg.stochasticity == STOCH_CUSTOM:
        s = float(cfg.custom_s[t])
        if s * s > 1.0 - abar_prev:
            raise ConfigError(f"custom stochasticity at t={t} violates s^2 <= 1 - abar_prev")
        return s
    return default_stochasticity(abar_prev)


def run(
    cfg: SolverConfig,
    sched: NoiseSchedule,
    prior: ConceptPrior,
    codec: LatentCodec,
    op: ForwardOperator,
    measurement: Measurement,
    concept: str | None,
    negation_state: neg.EmbeddingState | None = None,
    observer=None,
) -> tuple[np.ndarray, np.ndarray, RunTrace]:
    """Full reverse-sampling reconstruction.

    ``concept=None`` replaces the conditional prediction by the null one
    (the no-text-regularization ablation); latent optimization and adaptive
    negation still run as configured. Fully deterministic given cfg.seed.

    ``observer``, when given, is called per step with a dict of the
    intermediate quantities (used by diagnostics and tests).
    """
    if concept is not None:
        prior.concept(concept)  # raise early on unknown labels
    if prior.null_mode == NULL_EMBEDDING and negation_state is None:
        raise ConfigError("prior.null_mode=embedding requires a negation state")
    y = measurement.y
    steps = subsample_steps(sched, cfg.nfe)
    gamma = _gamma_set(cfg, steps)
    ss = np.random.SeedSequence([0x_7E6, int(cfg.seed)])
    rng_init, rng_noise, rng_monitor = (
        np.random.default_rng(child) for child in ss.spawn(3)
    )
    z = rng_init.standard_normal(prior.d)
    trace = RunTrace()

    for i, t in enumerate(steps):
        t_prev = steps[i + 1] if i + 1 < len(steps) else 0
        abar_t = float(sched.alpha_bar[t])
        abar_prev = float(sched.alpha_bar[t_prev])

        if negation_state is not None and prior.null_mode == NULL_EMBEDDING:
            weights = neg.null_weights(negation_state)
        else:
            weights = uniform_weights(prior)
        eps_n = eps_null(prior, z, t, weights, sched)
        eps_c = eps_n if concept is None else eps_cond(prior, z, t, concept, sched)

        in_gamma = t in gamma
        use_dps = cfg.dps_enabled and not in_gamma
        omega = cfg.omega2 if use_dps else cfg.omega1
        eps_w = eps_cfg(eps_n, eps_c, omega)
        z0_t = tweedie(z, t, eps_w, sched)
        x0_t = decode(codec, z0_t)

        resid = y - op.apply(x0_t)
        data_consistency = float(resid @ resid)

        eps_m = rng_monitor.standard_normal(prior.d)
        z_m = np.sqrt(abar_t) * z0_t + np.sqrt(1.0 - abar_t) * eps_m
        eps_hat_m = (
            eps_null(prior, z_m, t, weights, sched)
            if concept is None
            else eps_cond(prior, z_m, t, concept, sched)
        )
        dm = eps_m - eps_hat_m
        dsm_loss = float((1.0 - abar_t) / abar_t * (dm @ dm))

        def draw_total_noise():
            s_t = _stochasticity_at(cfg, abar_prev, t)
            if s_t > 0.0 and abar_prev < 1.0:
                return total_noise(eps_w, rng_noise.standard_normal(prior.d), abar_prev, s_t)
            return eps_w

        x0_y = None
        if in_gamma:
            if cfg.use_adam:
                x0_y = adam_solve(op, y, anchor=x0_t, params=cfg.adam, init=x0_t)
            else:
                x0_y = cg_solve(op, y, anchor=x0_t, params=cfg.cg, warm_start=x0_t)
            z0_y = encode_mean(codec, x0_y)
            z0_ema = ema_combine(z0_y, z0_t, abar_prev)
            z_next = ddim_step(z0_ema, draw_total_noise(), abar_prev)
            branch = BRANCH_LATENT_OPT
        elif use_dps:
            z_prime = ddim_step(z0_t, draw_total_noise(), abar_prev)
            rho_t = float(np.sqrt(abar_prev))
            z_next = dps_step(
                z_prime, z, t, prior, codec, op, y, rho_t, cfg.omega2, sched,
                concept=concept, weights=weights,
            )
            branch = BRANCH_DPS
        else:
            eps_tilde = draw_total_noise() if cfg.plain_stochastic else eps_w
            z_next = ddim_step(z0_t, eps_tilde, abar_prev)
            branch = BRANCH_PLAIN

        x_ref = x0_y if x0_y is not None else x0_t
        if negation_state is not None:
            null_similarity = float(neg.embed_image(negation_state, x_ref) @ negation_state.c_null)
            if in_gamma and cfg.negation_enabled:
                neg.negate_step(negation_state, x0_y)
        else:
            null_similarity = 0.0

        trace.records.append(
            StepRecord(
                t=t,
                branch=branch,
                data_consistency=data_consistency,
                dsm_loss=dsm_loss,
                null_similarity=null_similarity,
            )
        )
        if observer is not None:
            observer(
                {
                    "t": t,
                    "t_prev": t_prev,
                    "branch": branch,
                    "z_t": z.copy(),
                    "z0_t": z0_t,
                    "x0_t": x0_t,
                    "x0_y": x0_y,
                    "z_next": z_next.copy(),
                    "weights": weights,
                }
            )
        norm = float(np.linalg.norm(z_next))
        if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
            raise DivergedError(step=t, norm=norm)
        z = z_next

    return decode(codec, z), z, trace
