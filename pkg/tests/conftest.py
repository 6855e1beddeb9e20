import functools
import math

import numpy as np
import pytest

from becgrav.bragg import BraggPulse
from becgrav.config import load_config, resolve
from becgrav.constants import RB87

WR = RB87.recoil_frequency


@functools.lru_cache(maxsize=None)
def preset_experiment(name: str):
    return resolve(load_config(preset=name))


def two_level_pulses(n: int = 1, tau_wr: float = 10.0):
    """(π/2, π) Gaussian pulses deep in the two-level regime."""
    p = BraggPulse(n, tau_wr / WR, 1.0)
    om_pi = (math.pi / p.effective_area()) ** (1.0 / n)
    return p.with_omega(om_pi * 0.5 ** (1.0 / n)), p.with_omega(om_pi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
