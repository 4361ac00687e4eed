import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repro", max_examples=100, derandomize=True, deadline=None,
                          print_blob=True)
settings.load_profile("repro")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
