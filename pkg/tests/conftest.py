import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
