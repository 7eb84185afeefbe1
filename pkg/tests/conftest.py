import os

import pytest
from hypothesis import settings

from diodelab.physics import DiodeConfig

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def diode():
    """Balanced mirrors, strong pump: the textbook one-way configuration."""
    return DiodeConfig.from_units(1.0, 100.0, 100.0, 50.0)


@pytest.fixture
def weak_pump_diode():
    return DiodeConfig.from_units(0.2, 100.0, 100.0, 50.0)
