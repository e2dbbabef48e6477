#!/usr/bin/env python3
"""Regenerate the shipped fixtures (priors, mask, configs).

Every number in fixtures/ comes from this script; see fixtures/FIXTURES.md
for the rationale behind each choice. Rerunning is idempotent.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from treg.codec import flip_involution, make_flip_codec  # noqa: E402
from treg.fileio import write_pgm  # noqa: E402
from treg.prior import ConceptPrior, make_concept, prior_to_json  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

D = 16
SHAPE = (32, 32)
CODEC_SEED = 11
FLIP_CODEC_SEED = 21
COMPONENT_VAR = 0.05


def ambiguity_prior() -> ConceptPrior:
    """Two concepts straddling a shared base latent along a seeded direction."""
    rng = np.random.default_rng(np.random.SeedSequence([77]))
    base = rng.normal(0.0, 0.8, D)
    u = rng.standard_normal(D)
    u /= np.linalg.norm(u)
    m_a = base + 2.0 * u
    m_b = base - 2.0 * u
    return ConceptPrior(
        d=D,
        concepts=(
            make_concept("alpha", [(1.0, m_a, COMPONENT_VAR)]),
            make_concept("beta", [(1.0, m_b, COMPONENT_VAR)]),
        ),
        null_mode="embedding",
    )


def symmetry_prior() -> ConceptPrior:
    """An upright latent mode and its exact 180-degree-rotation counterpart.

    Uses the flip-symmetric codec layout: the second half of the latent
    coordinates is flip-antisymmetric, so negating it rotates the decoded
    image by 180 degrees exactly.
    """
    rng = np.random.default_rng(np.random.SeedSequence([99]))
    m_up = rng.normal(0.0, 1.0, D)
    m_up[D // 2 :] *= 1.6  # strong antisymmetric content: truth differs from its flip
    m_flip = flip_involution(D) * m_up
    return ConceptPrior(
        d=D,
        concepts=(
            make_concept("upright", [(1.0, m_up, COMPONENT_VAR)]),
            make_concept("flipped", [(1.0, m_flip, COMPONENT_VAR)]),
        ),
        null_mode="embedding",
    )


def center_mask() -> np.ndarray:
    """All-observed except a hidden 12x12 center box."""
    mask = np.ones(SHAPE, dtype=np.uint8) * 255
    mask[10:22, 10:22] = 0
    return mask


AMBIGUITY_CFG = """\
# Ambiguity-reduction fixture: strong blur makes the two concept modes
# indistinguishable in the measurement; conditioning must pick the mode.
prior.path=prior_ambiguity.json
codec.d=16
codec.seed=11
operator.kind=gaussian_blur
operator.height=32
operator.width=32
operator.kernel_size=13
operator.sigma=2.0
measurement.sigma0=0.1
measurement.seed=101
measurement.truth_midpoint=alpha,beta
solver.nfe=200
solver.omega1=7.5
solver.gamma_mod=3
solver.gamma_tmax=850
solver.cg_lam=0.0001
solver.cg_iters=5
solver.negation_enabled=true
negation.q=8
negation.kappa=1.0
negation.lr=0.05
negation.seed=7
experiment.kind=ambiguity
experiment.restarts=20
experiment.concept=alpha
seed=5
"""

CONVERGENCE_CFG = """\
# Convergence fixture: mild blur, low noise, prompt differs from the truth
# class so the measurement must pull the trajectory across modes.
prior.path=prior_ambiguity.json
codec.d=16
codec.seed=11
operator.kind=gaussian_blur
operator.height=32
operator.width=32
operator.kernel_size=9
operator.sigma=1.0
measurement.sigma0=0.005
measurement.seed=202
measurement.truth_concept=beta
solver.nfe=200
solver.omega1=7.5
solver.gamma_mod=3
solver.gamma_tmax=850
solver.cg_lam=0.0001
solver.cg_iters=5
solver.negation_enabled=true
negation.q=8
negation.kappa=1.0
negation.lr=0.05
negation.seed=7
experiment.kind=convergence
experiment.restarts=20
experiment.concept=alpha
seed=9
"""

SYMMETRY_CFG = """\
# Phase-retrieval symmetry fixture: the measurement cannot distinguish the
# truth from its 180-degree rotation; conditioning must break the tie.
prior.path=prior_symmetry.json
codec.d=16
codec.seed=21
codec.flip_symmetric=true
operator.kind=phase_retrieval
operator.height=32
operator.width=32
operator.pad=16
measurement.sigma0=0.005
measurement.seed=303
measurement.truth_concept=upright
solver.nfe=200
solver.omega1=4.0
solver.omega2=4.0
solver.gamma_mod=10
solver.gamma_tmax=1000
solver.use_adam=true
solver.adam_lr=0.001
solver.adam_iters=100
solver.adam_lam=0.0
solver.dps_enabled=true
solver.negation_enabled=true
negation.q=8
negation.kappa=1.0
negation.lr=0.05
negation.seed=7
experiment.kind=symmetry
experiment.restarts=20
experiment.concept=upright
seed=13
"""

SOLVE_INPAINT_CFG = """\
# Quick single-run demo: box inpainting with a hidden center.
prior.path=prior_ambiguity.json
codec.d=16
codec.seed=11
operator.kind=box_inpaint
operator.height=32
operator.width=32
operator.mask_path=mask_center.pgm
measurement.sigma0=0.05
measurement.seed=404
measurement.truth_concept=alpha
solver.nfe=100
solver.omega1=5.0
solver.omega2=0.0
solver.gamma_mod=3
solver.gamma_tmax=850
solver.dps_enabled=true
solver.negation_enabled=true
negation.q=8
negation.kappa=1.0
negation.lr=0.05
negation.seed=7
experiment.concept=alpha
seed=17
"""


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    # make_flip_codec is invoked only to fail fast if the symmetry layout changes
    make_flip_codec(SHAPE, D, FLIP_CODEC_SEED)
    (FIXTURES / "prior_ambiguity.json").write_text(
        json.dumps(prior_to_json(ambiguity_prior()), indent=2) + "\n", encoding="ascii"
    )
    (FIXTURES / "prior_symmetry.json").write_text(
        json.dumps(prior_to_json(symmetry_prior()), indent=2) + "\n", encoding="ascii"
    )
    write_pgm(FIXTURES / "mask_center.pgm", center_mask())
    (FIXTURES / "ambiguity.cfg").write_text(AMBIGUITY_CFG, encoding="ascii")
    (FIXTURES / "convergence.cfg").write_text(CONVERGENCE_CFG, encoding="ascii")
    (FIXTURES / "symmetry.cfg").write_text(SYMMETRY_CFG, encoding="ascii")
    (FIXTURES / "solve_inpaint.cfg").write_text(SOLVE_INPAINT_CFG, encoding="ascii")
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
