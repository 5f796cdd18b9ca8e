import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(ROOT))

from models.schemas import (  # noqa: E402
    Couplings,
    IntegratorConfig,
    PotentialKind,
    PotentialTerm,
    SpaceSpec,
    SystemSpec,
    TMatrix,
)
from storage import close_store  # noqa: E402


def higgs_system(space: SpaceSpec, omega2: float = 1.0) -> SystemSpec:
    return SystemSpec(space=space, terms=[PotentialTerm(kind=PotentialKind.CURVED_HIGGS, couplings=Couplings(omega2=omega2))])


@pytest.fixture
def sphere():
    return SpaceSpec(epsilon=1, d=3, r0=1.0)


@pytest.fixture
def pseudosphere():
    return SpaceSpec(epsilon=-1, d=3, r0=1.0)


@pytest.fixture(params=[1, -1], ids=["sphere", "pseudosphere"])
def space(request):
    return SpaceSpec(epsilon=request.param, d=3, r0=1.0)


@pytest.fixture
def higgs(space):
    return higgs_system(space)


@pytest.fixture
def anisotropic_t2():
    return TMatrix.diag([1.0, -1.0])


@pytest.fixture
def short_run():
    return IntegratorConfig(dt=1e-3, n_steps=2000, record_every=10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def configs_dir():
    return ROOT / "configs"


@pytest.fixture(autouse=True)
def _release_store():
    yield
    close_store()
