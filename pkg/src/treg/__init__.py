"""Text-regularized latent diffusion inverse solver with analytic priors.

Reverse DDIM sampling against exact Gaussian-mixture latent priors, with
proximal data consistency, classifier-free guidance, adaptive negation of
the null embedding, and optional measurement-gradient steps. Every
numerical component has an independent oracle; see the ``validate`` CLI
subcommand and the test suite.
"""

from .codec import (
    LatentCodec,
    decode,
    encode_mean,
    encode_sample,
    flip_involution,
    make_codec,
    make_flip_codec,
)
from .consistency import AdamParams, CGParams, adam_solve, cg_solve, proximal_objective
from .errors import ConfigError, DivergedError, UnknownLabelError, UnsupportedOperatorError
from .negation import EmbeddingState, embed_image, make_embedding_state, negate_step, null_weights
from .operators import (
    BoxInpaint,
    Downsample,
    ForwardOperator,
    GaussianBlur,
    Measurement,
    PhaseRetrieval,
    flip180,
    make_box_inpaint,
    make_downsample,
    make_gaussian_blur,
    make_phase_retrieval,
    simulate_measurement,
)
from .prior import (
    Concept,
    ConceptPrior,
    eps_cfg,
    eps_cond,
    eps_null,
    make_concept,
    posterior_mean_jacobian,
    posterior_mean_oracle,
    prior_from_json,
    prior_to_json,
    tweedie,
    uniform_weights,
)
from .sampler import (
    RunTrace,
    SolverConfig,
    StepRecord,
    ddim_step,
    dps_gradient,
    dps_step,
    ema_combine,
    run,
    total_noise,
)
from .schedule import NoiseSchedule, make_schedule, subsample_steps

__version__ = "0.1.0"
