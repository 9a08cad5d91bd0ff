import os

# Allow up to 8 numba threads regardless of core count so thread-count
# invariance can be exercised; must be set before numba is imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import math

import numpy as np
import pytest

from penningmd import BERYLLIUM_9, TrapConfig


@pytest.fixture(scope="session")
def ion():
    return BERYLLIUM_9


def base_trap(omega_r_hz: float, delta: float = 0.0104) -> TrapConfig:
    """The trap used throughout: B = 4.4588 T, omega_z = 2 pi x 1.59 MHz."""
    return TrapConfig(4.4588, 2 * math.pi * 1.59e6, delta,
                      2 * math.pi * omega_r_hz)


@pytest.fixture(scope="session")
def trap_220():
    return base_trap(220e3)


@pytest.fixture(scope="session")
def trap_400():
    return base_trap(400e3)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
