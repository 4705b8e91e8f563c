import numpy as np
import pytest

from kdenoise import DiscreteMeasure


def random_measure(rng, n_atoms=None, dim=None, scale=2.0):
    n = n_atoms or rng.integers(1, 8)
    d = dim or rng.integers(1, 4)
    pts = scale * rng.normal(size=(int(n), int(d)))
    w = rng.dirichlet(np.ones(int(n)))
    return DiscreteMeasure(pts, w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
