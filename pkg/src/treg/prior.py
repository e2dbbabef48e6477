"""Analytic conditional diffusion prior over the latent space.

Each concept is an isotropic Gaussian mixture over clean latents z0. Under
the VP forward process z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps the
marginal of z_t is again a Gaussian mixture, so the noise prediction, the
posterior mean E[z0 | z_t] and its Jacobian are all available in closed
form. The noise prediction is computed through the score of the z_t
marginal, while :func:`posterior_mean_oracle` goes through per-component
posterior means; the two routes are algebraically equivalent and are
cross-checked in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnknownLabelError
from .schedule import NoiseSchedule

NULL_UNIFORM = "uniform"
NULL_EMBEDDING = "embedding"
_NULL_MODES = (NULL_UNIFORM, NULL_EMBEDDING)

_WEIGHT_SUM_TOL = 1e-12
_SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Concept:
    label: str
    weights: np.ndarray  # (n_components,)
    means: np.ndarray  # (n_components, d)
    variances: np.ndarray  # (n_components,), isotropic per component


@dataclass(frozen=True)
class ConceptPrior:
    d: int
    concepts: tuple[Concept, ...]
    null_mode: str = NULL_UNIFORM
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"prior.d must be positive, got {self.d}")
        if not self.concepts:
            raise ConfigError("prior must define at least one concept")
        if self.null_mode not in _NULL_MODES:
            raise ConfigError(f"prior.null_mode must be one of {_NULL_MODES}, got {self.null_mode!r}")
        for c in self.concepts:
            if abs(float(c.weights.sum()) - 1.0) > _WEIGHT_SUM_TOL:
                raise ConfigError(f"component weights of concept {c.label!r} do not sum to 1")
            if np.any(c.weights <= 0):
                raise ConfigError(f"component weights of concept {c.label!r} must be positive")
            if np.any(c.variances <= 0):
                raise ConfigError(f"component variances of concept {c.label!r} must be positive")
            if not np.all(np.isfinite(c.means)) or c.means.shape[1] != self.d:
                raise ConfigError(f"component means of concept {c.label!r} must be finite with dim {self.d}")
        labels = [c.label for c in self.concepts]
        if len(set(labels)) != len(labels):
            raise ConfigError("concept labels must be unique")
        self._index.update({c.label: c for c in self.concepts})

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.concepts]

    def concept(self, label: str) -> Concept:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabelError(f"unknown concept label {label!r}; known: {self.labels}") from None

    def concept_mean(self, label: str) -> np.ndarray:
        """Overall mixture mean of one concept."""
        c = self.concept(label)
        return c.weights @ c.means


def make_concept(label: str, components: list[tuple[float, np.ndarray, float]]) -> Concept:
    """Build a concept from (weight, mean, variance) triples."""
    w = np.asarray([c[0] for c in components], dtype=float)
    means = np.stack([np.asarray(c[1], dtype=float) for c in components])
    var = np.asarray([c[2] for c in components], dtype=float)
    w.flags.writeable = False
    means.flags.writeable = False
    var.flags.writeable = False
    return Concept(label=label, weights=w, means=means, variances=var)


def prior_from_json(doc: str | dict) -> ConceptPrior:
    """Load a prior from the JSON schema {d, null_mode?, concepts:[{label, components:[{w, mean, var}]}]}."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        d = int(doc["d"])
        concepts = tuple(
            make_concept(c["label"], [(k["w"], k["mean"], k["var"]) for k in c["components"]])
            for c in doc["concepts"]
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed prior document: missing or invalid field ({exc})") from exc
    return ConceptPrior(d=d, concepts=concepts, null_mode=doc.get("null_mode", NULL_UNIFORM))


def prior_to_json(prior: ConceptPrior) -> dict:
    return {
        "d": prior.d,
        "null_mode": prior.null_mode,
        "concepts": [
            {
                "label": c.label,
                "components": [
                    {"w": float(w), "mean": [float(v) for v in m], "var": float(s)}
                    for w, m, s in zip(c.weights, c.means, c.variances)
                ],
            }
            for c in prior.concepts
        ],
    }


def uniform_weights(prior: ConceptPrior) -> np.ndarray:
    k = len(prior.concepts)
    return np.full(k, 1.0 / k)


def _check_t(sched: NoiseSchedule, t: int, allow_zero: bool = False) -> None:
    lo = 0 if allow_zero else 1
    if not lo <= t <= sched.T:
        raise IndexError(f"timestep t={t} outside [{lo}, {sched.T}]")


def flat_components(
    prior: ConceptPrior, concept: str | None, weights: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened (weights, means, variances) of the target mixture.

    With a concept label the mixture is that concept's GMM; with
    ``concept=None`` it is the across-concept mixture weighted by
    ``weights`` (uniform when omitted), i.e. the null / unconditional prior.
    """
    if concept is not None:
        c = prior.concept(concept)
        return c.weights, c.means, c.variances
    if weights is None:
        weights = uniform_weights(prior)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(prior.concepts),):
        raise ValueError(f"null weights must have shape ({len(prior.concepts)},), got {weights.shape}")
    if abs(float(weights.sum()) - 1.0) > _SIMPLEX_TOL or np.any(weights < 0):
        raise ValueError(f"null weights must lie on the simplex (sum={weights.sum()!r})")
    w = np.concatenate([wk * c.weights for wk, c in zip(weights, prior.concepts)])
    means = np.concatenate([c.means for c in prior.concepts])
    var = np.concatenate([c.variances for c in prior.concepts])
    return w, means, var


def _marginal_stats(
    w: np.ndarray, means: np.ndarray, var: np.ndarray, abar: float
) -> tuple[np.ndarray, np.ndarray]:
    """Component means and variances of the z_t marginal mixture."""
    locs = np.sqrt(abar) * means
    s2 = abar * var + (1.0 - abar)
    return locs, s2


def _responsibilities(z_t: np.ndarray, w, locs, s2) -> np.ndarray:
    """Posterior component responsibilities at z_t, via log-sum-exp."""
    d = locs.shape[1]
    diff = z_t[..., None, :] - locs  # (..., K, d)
    sq = np.sum(diff * diff, axis=-1)
    with np.errstate(divide="ignore"):  # zero weights contribute -inf, handled by LSE
        logw = np.log(w)
    logp = logw - 0.5 * d * np.log(2.0 * np.pi * s2) - sq / (2.0 * s2)
    logp -= logp.max(axis=-1, keepdims=True)
    r = np.exp(logp)
    return r / r.sum(axis=-1, keepdims=True)


def _mixture_score(z_t: np.ndarray, w, locs, s2) -> np.ndarray:
    r = _responsibilities(z_t, w, locs, s2)
    comp_score = (locs - z_t[..., None, :]) / s2[:, None]
    return np.sum(r[..., :, None] * comp_score, axis=-2)


def eps_cond(
    prior: ConceptPrior, z_t: np.ndarray, t: int, concept: str, sched: NoiseSchedule
) -> np.ndarray:
    """Exact concept-conditional noise prediction, -sqrt(1-abar) * score."""
    _check_t(sched, t)
    z_t = np.asarray(z_t, dtype=float)
    abar = sched.alpha_bar[t]
    w, means, var = flat_components(prior, concept)
    locs, s2 = _marginal_stats(w, means, var, abar)
    return -np.sqrt(1.0 - abar) * _mixture_score(z_t, w, locs, s2)


def eps_null(
    prior: ConceptPrior, z_t: np.ndarray, t: int, weights: np.ndarray | None, sched: NoiseSchedule
) -> np.ndarray:
    """Noise prediction of the weighted across-concept mixture (the null branch)."""
    _check_t(sched, t)
    z_t = np.asarray(z_t, dtype=float)
    abar = sched.alpha_bar[t]
    w, means, var = flat_components(prior, None, weights)
    locs, s2 = _marginal_stats(w, means, var, abar)
    return -np.sqrt(1.0 - abar) * _mixture_score(z_t, w, locs, s2)


def eps_cfg(eps_null_v: np.ndarray, eps_c: np.ndarray, omega: float) -> np.ndarray:
    """Guided prediction eps_null + omega * (eps_cond - eps_null)."""
    eps_null_v = np.asarray(eps_null_v, dtype=float)
    eps_c = np.asarray(eps_c, dtype=float)
    if eps_null_v.shape != eps_c.shape:
        raise ValueError(f"shape mismatch {eps_null_v.shape} vs {eps_c.shape}")
    return eps_null_v + omega * (eps_c - eps_null_v)


def tweedie(z_t: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Denoised estimate (z_t - sqrt(1-abar_t) eps) / sqrt(abar_t).

    Accepts the t=0 sentinel, where the estimate is z_t itself.
    """
    _check_t(sched, t, allow_zero=True)
    z_t = np.asarray(z_t, dtype=float)
    abar = sched.alpha_bar[t]
    if abar <= 0.0:
        raise FloatingPointError(f"alpha_bar[{t}] is not positive")
    return (z_t - np.sqrt(1.0 - abar) * np.asarray(eps, dtype=float)) / np.sqrt(abar)


def posterior_mean_oracle(
    prior: ConceptPrior,
    z_t: np.ndarray,
    t: int,
    concept: str | None,
    sched: NoiseSchedule,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """E[z0 | z_t] via per-component posterior means mixed by responsibilities.

    Independent route from ``tweedie(eps_cond(...))``; used as its oracle.
    """
    _check_t(sched, t, allow_zero=True)
    z_t = np.asarray(z_t, dtype=float)
    abar = sched.alpha_bar[t]
    w, means, var = flat_components(prior, concept, weights)
    locs, s2 = _marginal_stats(w, means, var, abar)
    r = _responsibilities(z_t, w, locs, s2)
    gain = np.sqrt(abar) * var / s2  # (K,)
    comp_mean = means + gain[:, None] * (z_t[..., None, :] - locs)
    return np.sum(r[..., :, None] * comp_mean, axis=-2)


def posterior_mean_jacobian(
    prior: ConceptPrior,
    z_t: np.ndarray,
    t: int,
    concept: str | None,
    sched: NoiseSchedule,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Exact d x d Jacobian of E[z0 | z_t] with respect to z_t.

    Sum of the responsibility-weighted per-component linear gains plus the
    outer products contributed by the responsibility gradients.
    """
    _check_t(sched, t)
    z_t = np.asarray(z_t, dtype=float)
    if z_t.ndim != 1:
        raise ValueError("jacobian is defined for a single latent vector")
    abar = sched.alpha_bar[t]
    w, means, var = flat_components(prior, concept, weights)
    locs, s2 = _marginal_stats(w, means, var, abar)
    r = _responsibilities(z_t, w, locs, s2)
    gain = np.sqrt(abar) * var / s2
    comp_mean = means + gain[:, None] * (z_t[None, :] - locs)
    g = (locs - z_t[None, :]) / s2[:, None]  # grad log of each marginal component
    g_bar = r @ g
    jac = np.sum(r * gain) * np.eye(prior.d)
    jac += np.einsum("k,kp,kq->pq", r, comp_mean, g - g_bar[None, :])
    return jac
