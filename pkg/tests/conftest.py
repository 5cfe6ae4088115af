import pytest

from fracmild.parser import load_problem
from tests.helpers import PROBLEMS


@pytest.fixture
def problems():
    return PROBLEMS


@pytest.fixture
def heat49():
    return load_problem(PROBLEMS / "heat49.toml")


@pytest.fixture
def scalar_impulse():
    return load_problem(PROBLEMS / "scalar_impulse.toml")
