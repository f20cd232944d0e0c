import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairdro.core import Dataset


def random_dataset(rng, n=None, p=2, ensure_cells=True):
    """Random dataset with every (a, y) cell nonempty by default."""
    if n is None:
        n = int(rng.integers(8, 30))
    while True:
        X = rng.normal(size=(n, p))
        a = rng.integers(0, 2, size=n)
        y = rng.integers(0, 2, size=n)
        if not ensure_cells:
            return Dataset(X, a, y)
        if all(((a == aa) & (y == yy)).any() for aa in (0, 1) for yy in (0, 1)):
            return Dataset(X, a, y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
