import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("opbmo", max_examples=25, deadline=None)
settings.load_profile("opbmo")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def haar_vector(level, pos, depth):
    """h_I on depth-``depth`` cells, built directly from its definition."""
    t = (np.arange(2 ** depth) + 0.5) / 2 ** depth
    a, b = pos * 2.0 ** -level, (pos + 1) * 2.0 ** -level
    mid = 0.5 * (a + b)
    h = np.where((t >= a) & (t < mid), 1.0, 0.0) - np.where((t >= mid) & (t < b), 1.0, 0.0)
    return h * 2.0 ** (level / 2)


def all_haar(depth):
    """List of (level, pos, h_I) for every interval of level < depth."""
    return [(l, p, haar_vector(l, p, depth)) for l in range(depth) for p in range(2 ** l)]
