from pathlib import Path

import numpy as np
import pytest

from treg.prior import ConceptPrior, make_concept
from treg.schedule import make_schedule

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def sched():
    return make_schedule(1000, 0.00085, 0.012)


@pytest.fixture(scope="session")
def small_sched():
    return make_schedule(50, 0.002, 0.04)


@pytest.fixture()
def gauss_prior():
    """Single standard-normal component in d=2."""
    return ConceptPrior(d=2, concepts=(make_concept("c", [(1.0, np.zeros(2), 1.0)]),))


@pytest.fixture()
def bimodal_prior():
    """Two symmetric single-component concepts in d=2."""
    m = np.array([1.5, -0.5])
    return ConceptPrior(
        d=2,
        concepts=(
            make_concept("plus", [(1.0, m, 0.3)]),
            make_concept("minus", [(1.0, -m, 0.3)]),
        ),
    )


@pytest.fixture()
def mixture_prior():
    """One concept with three components, d=2."""
    return ConceptPrior(
        d=2,
        concepts=(
            make_concept(
                "mix",
                [
                    (0.5, np.array([1.0, 0.0]), 0.2),
                    (0.3, np.array([-1.0, 1.0]), 0.4),
                    (0.2, np.array([0.0, -1.5]), 0.1),
                ],
            ),
        ),
    )
