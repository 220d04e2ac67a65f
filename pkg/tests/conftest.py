"""
Pytest configuration and shared fixtures for the robust min-max toolkit tests
"""
import pytest
import tempfile
import shutil
from pathlib import Path
import sys
import os

# Add the parent directory to the path so we can import modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from modules.config import Settings
from modules.exact_solver import GridSolver
from modules.functions import Cone, make_above_all_adversary, make_below_all_adversary
from modules.rank_core import Ensemble, GroundTruth, Hypercube
from fixtures.sample_data import ABOVE_ALL_SCENARIO


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files"""
    temp_dir = tempfile.mkdtemp()
    yield temp_dir
    shutil.rmtree(temp_dir)


@pytest.fixture
def settings():
    """Default settings, independent of the environment"""
    return Settings()


@pytest.fixture
def line_domain():
    return Hypercube(lower=(-2.0,), upper=(2.0,))


@pytest.fixture
def honest_cones():
    """|x| and |x-1|"""
    return (Cone(center=(0.0,)), Cone(center=(1.0,)))


@pytest.fixture
def three_cones(line_domain):
    """|x|, |x-1|, |x+1| with f = 1"""
    specs = (Cone(center=(0.0,)), Cone(center=(1.0,)), Cone(center=(-1.0,)))
    return Ensemble(specs=specs, f=1, domain=line_domain)


@pytest.fixture
def last_faulty():
    """Function 3 of 3 is faulty"""
    return GroundTruth(n=3, faulty_set=frozenset({3}))


@pytest.fixture
def above_all_ensemble(line_domain, honest_cones):
    adversary = make_above_all_adversary(honest_cones, margin=1.0)
    return Ensemble(specs=honest_cones + (adversary,), f=1, domain=line_domain, nonnegative=True)


@pytest.fixture
def below_all_ensemble(line_domain):
    honest = (Cone(center=(0.0,), offset=2.0), Cone(center=(1.0,), offset=2.0))
    adversary = make_below_all_adversary(honest, margin=1.0, domain=line_domain, nonnegative=True)
    return Ensemble(specs=honest + (adversary,), f=1, domain=line_domain, nonnegative=True)


@pytest.fixture
def solver(settings):
    """Grid solver with 4001 points per axis"""
    return GridSolver(resolution=4001, settings=settings)


@pytest.fixture
def scenario_file(temp_dir):
    """The above-all cone scenario written to disk"""
    path = Path(temp_dir) / "cones-above-all.yaml"
    path.write_text(ABOVE_ALL_SCENARIO, encoding='utf-8')
    return path
