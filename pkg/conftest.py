import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "tests"))

from divkit.distributions import DistributionPair, sample_pair_batch  # noqa: E402


@pytest.fixture(scope="session")
def reference_pair():
    return DistributionPair.of([0.5, 0.5], [0.25, 0.75])


@pytest.fixture(scope="session")
def random_pairs():
    """1000 pairs for each n in {2, 5, 10}."""
    return [sample_pair_batch(1000, n, seed=7) for n in (2, 5, 10)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
