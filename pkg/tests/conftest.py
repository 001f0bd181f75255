from pathlib import Path

import numpy as np
import pytest

from uavmec.model import reference_scenario

GOLDEN_PATH = Path(__file__).resolve().parent.parent / "scenarios" / "golden.toml"
OVERHEAD_RATE = 1e6 * np.log2(401.0)  # 1e6 m^2 reference SNR at 50 m altitude


@pytest.fixture
def single_gbs():
    """One GBS at the origin, start and end directly above it."""
    return reference_scenario([(0.0, 0.0)], (0.0, 0.0), (0.0, 0.0))


@pytest.fixture
def chord_scenario():
    """1 km chord along x with one GBS at the midpoint."""
    return reference_scenario([(500.0, 0.0)], (0.0, 0.0), (1000.0, 0.0))
