import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maxplus_growth.algebra import EPS, MaxPlusMatrix  # noqa: E402
from maxplus_growth.models import MatrixModel  # noqa: E402

DATA = Path(__file__).parent / "data"


def random_matrix(rng, rows, cols, eps_prob=0.2, finite=False):
    """Dyadic entries (multiples of 1/4) so sums of a few entries are exact."""
    a = rng.integers(-80, 81, size=(rows, cols)) / 4.0
    if not finite:
        a[rng.random((rows, cols)) < eps_prob] = EPS
    return MaxPlusMatrix(a)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bernoulli():
    return MatrixModel.load(DATA / "bernoulli.json")
