from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import settings

from finitary_oe.odometer import OdometerSystem

settings.register_profile("ci", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("ci")

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def binary(p=F(2, 3), depth_max=32):
    return OdometerSystem.from_weights([(p, 1 - p)], depth_max=depth_max)


def uniform(depth_max=32):
    return binary(F(1, 2), depth_max)


def ternary(depth_max=30):
    return OdometerSystem.from_weights([(F(4, 7), F(2, 7), F(1, 7))], depth_max=depth_max)


def alternating(depth_max=40, swapped=False):
    lv = [(F(2, 3), F(1, 3)), (F(3, 4), F(1, 4))]
    return OdometerSystem.from_weights(lv[::-1] if swapped else lv, depth_max=depth_max)


def brute_measure(sys, w):
    """Product of per-level weights times the density, by direct lookup."""
    m = sys.measure
    q = F(1)
    for j, c in enumerate(w):
        q *= m.level_weights(j)[c]
    return q


@pytest.fixture
def configs():
    return CONFIGS
