"""Adaptive negation: a toy joint embedding space and the null-embedding update.

The mutable null embedding c_null is pushed away from the embedding of the
current reconstruction (one gradient step on their inner product per
latent-optimization visit). A softmax coupling turns c_null into mixture
weights for the prior's null prediction, so concepts similar to c_null are
emphasized in the null branch and hence suppressed by the guidance
direction (eps_cond - eps_null).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

NULL_NORM_CAP = 10.0


@dataclass
class EmbeddingState:
    q: int
    concept_labels: tuple[str, ...]
    concept_emb: np.ndarray  # (K, q), orthonormal rows
    img_proj: np.ndarray  # (q, m), orthonormal rows
    c_null: np.ndarray  # (q,), mutable
    kappa: float = 1.0
    lr: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ConfigError(f"negation.kappa must be positive, got {self.kappa}")
        if self.lr < 0:
            raise ConfigError(f"negation.lr must be >= 0, got {self.lr}")
        self.concept_emb.flags.writeable = False
        self.img_proj.flags.writeable = False


def make_embedding_state(
    labels: list[str],
    concept_images: np.ndarray,
    q: int,
    seed: int,
    kappa: float = 1.0,
    lr: float = 0.0,
) -> EmbeddingState:
    """Joint embedding space: a seeded orthonormal image projector, with each
    concept embedded as the (normalized) projection of its reference image.

    Embedding concepts through the same projector as images is what couples
    reconstructions to concepts: an image near concept k's reference embeds
    near e_k. c_null starts at the mean of the concept embeddings.
    """
    concept_images = np.asarray(concept_images, dtype=float)
    k = len(labels)
    if k < 1:
        raise ConfigError("negation requires at least one concept label")
    if concept_images.shape[0] != k:
        raise ConfigError(
            f"need one reference image per concept, got {concept_images.shape[0]} for {k}"
        )
    m = concept_images.shape[1]
    if not k <= q <= m:
        raise ConfigError(f"negation.q={q} must satisfy K={k} <= q <= m={m}")
    rng = np.random.default_rng(np.random.SeedSequence([0x_E0B, int(seed)]))
    proj_q, _ = np.linalg.qr(rng.standard_normal((m, q)))
    img_proj = np.ascontiguousarray(proj_q.T)
    emb = concept_images @ img_proj.T
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0.0):
        raise ConfigError("a concept reference image projects to the zero embedding")
    concept_emb = emb / norms[:, None]
    return EmbeddingState(
        q=q,
        concept_labels=tuple(labels),
        concept_emb=concept_emb,
        img_proj=img_proj,
        c_null=concept_emb.mean(axis=0),
        kappa=float(kappa),
        lr=float(lr),
    )


def embed_image(state: EmbeddingState, x: np.ndarray) -> np.ndarray:
    """Unit-normalized linear image embedding; the zero image maps to zero."""
    x = np.asarray(x, dtype=float)
    v = state.img_proj @ x
    n = np.linalg.norm(v)
    if n == 0.0:
        return np.zeros(state.q)
    return v / n


def negate_step(state: EmbeddingState, x_hat: np.ndarray) -> np.ndarray:
    """One descent step of <embed_image(x_hat), c_null> in c_null, norm-capped."""
    if state.lr == 0.0:
        return state.c_null
    c = state.c_null - state.lr * embed_image(state, x_hat)
    n = np.linalg.norm(c)
    if n > NULL_NORM_CAP:
        c *= NULL_NORM_CAP / n
    state.c_null = c
    return c


def null_weights(state: EmbeddingState) -> np.ndarray:
    """Softmax over kappa * <c_null, concept embeddings>."""
    s = state.kappa * (state.concept_emb @ state.c_null)
    s -= s.max()
    w = np.exp(s)
    return w / w.sum()
