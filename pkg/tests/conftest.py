# Standard Library
import logging

# External Party
import numpy as np
import pytest

# My Modules
from kink_stability import LOG_NAME
from kink_stability.config import GridConfig
from kink_stability.config import RunConfig
from kink_stability.config import VirialConfig
from kink_stability.darboux import RegularizedTransform
from kink_stability.darboux import build_darboux
from kink_stability.kink import Grid
from kink_stability.kink import solve_kink
from kink_stability.pipeline import run_stages
from kink_stability.potential import make_phi4
from kink_stability.resonance import solve_resonance
from kink_stability.spectral import check_hypothesis1
from kink_stability.virial import Weights

PHI4_LAMBDA_SQ = 1.5
SQRT2 = np.sqrt(2.0)


@pytest.fixture(scope="session")
def phi4():
    return make_phi4()


@pytest.fixture(scope="session")
def phi4_grid(phi4):
    return Grid.default(phi4.omega)


@pytest.fixture(scope="session")
def phi4_profile(phi4, phi4_grid):
    return solve_kink(phi4, phi4_grid)


@pytest.fixture(scope="session")
def phi4_mode(phi4, phi4_profile):
    return check_hypothesis1(phi4, phi4_profile)


@pytest.fixture(scope="session")
def phi4_darboux(phi4_profile):
    return build_darboux(phi4_profile, PHI4_LAMBDA_SQ)


@pytest.fixture(scope="session")
def phi4_transform(phi4_grid):
    return RegularizedTransform.build(phi4_grid, 1e-2)


@pytest.fixture(scope="session")
def phi4_resonance(phi4, phi4_profile):
    return solve_resonance(phi4, phi4_profile, PHI4_LAMBDA_SQ)


@pytest.fixture(scope="session")
def phi4_weights(phi4, phi4_grid):
    return Weights.build(phi4_grid, phi4.omega_sq, PHI4_LAMBDA_SQ)


@pytest.fixture(scope="session")
def small_config():
    """Half the default resolution and a handful of probes."""
    return RunConfig(grid=GridConfig(points=2001), virial=VirialConfig(probes=8))


@pytest.fixture(scope="session")
def phi4_context(small_config):
    return run_stages(small_config)


@pytest.fixture()
def restore_logging():
    """Undo the handlers, level and global disable a command line run leaves."""
    package = logging.getLogger(LOG_NAME)
    handlers, level = list(package.handlers), package.level
    yield package
    for handle in package.handlers:
        if handle not in handlers:
            handle.close()
    package.handlers = handlers
    package.setLevel(level)
    logging.disable(logging.NOTSET)
