import math

import numpy as np
import pytest

from uavradar.radar import RadarConfig, default_layout, spherical_to_cart
from uavradar.simulate import Scatterer, synthesize_from_scatterers


@pytest.fixture(scope="session")
def cfg():
    return RadarConfig()


@pytest.fixture(scope="session")
def layout(cfg):
    return default_layout(cfg)


def single_scatterer_cube(cfg, layout, r=2.0, az_deg=0.0, el_deg=0.0,
                          amplitude=1.0, vr=0.8, noise_std=0.0, seed=0):
    """Clean (or noisy) frame from one point scatterer. vr defaults nonzero
    so clutter removal does not null the target."""
    pos = spherical_to_cart(r, math.radians(az_deg), math.radians(el_deg))
    return synthesize_from_scatterers(
        [Scatterer(pos, amplitude, vr)], cfg, layout,
        noise_std=noise_std, rng=np.random.default_rng(seed)), np.array(pos)
