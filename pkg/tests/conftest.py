import numpy as np
import pytest
from hypothesis import settings

from deepstable import UniformStream

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

N = 100_000
KS_1PCT_TWO_SAMPLE = 1.63 * np.sqrt(2.0 / N)


@pytest.fixture
def stream():
    return UniformStream("pseudo", 12345)
