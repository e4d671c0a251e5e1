import numpy as np
import pytest

from hazeforge.datasets import generate_toy


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    generate_toy(root, n_images=8, size=64, seed=7)
    return root
