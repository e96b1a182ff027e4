import numpy as np
import pytest

from opemu import DesignSpace, InputBasis, OutputBasis


@pytest.fixture
def wave_space():
    """The reference three-input box: position, speed, spread ratio."""
    return DesignSpace(bounds=[(-3.0, 1.0), (1.0, 2.0), (0.5, 3.0)],
                       names=("x0", "u0", "c"))


@pytest.fixture
def wave_bases(wave_space):
    return InputBasis(wave_space), OutputBasis()


@pytest.fixture
def coarse_grid():
    return np.round(0.5 * np.arange(13), 12)
