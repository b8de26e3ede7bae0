import numpy as np
import pytest

from qcels import backend


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the active backend's kernels once so timed tests measure
    algorithm work, not JIT latency."""
    backend.warmup()


@pytest.fixture
def two_level_model():
    from qcels import make_spectral_model
    return make_spectral_model(np.array([-1.0, 1.0]), 0.5, "uniform-excited:1")
