import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bregprox import EuclideanSpace, Hyperboloid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def E2():
    return EuclideanSpace(2)


@pytest.fixture
def E3():
    return EuclideanSpace(3)


@pytest.fixture
def H2():
    return Hyperboloid(2)
