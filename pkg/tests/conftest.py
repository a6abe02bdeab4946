import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_density  # noqa: E402
from wrep.linalg import DensityOperator  # noqa: E402

PARTIES = ("A", "B", "C")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, labels=PARTIES, rank=None):
    return DensityOperator(tuple(labels), random_density(rng, len(labels), rank))
