import numpy as np
import pytest

import hhoskew as hs


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def unit_square_mesh():
    return hs.generate_cartesian(1)


@pytest.fixture(scope="session")
def skewed_hex_mesh():
    return hs.generate_hexagonal(3, 8.0)


def random_convex_polygon(rng, n_min=5, n_max=8, center=(0.4, 0.6), radius=0.3):
    """Random star-shaped (convex) polygon for quadrature/operator oracles."""
    n = int(rng.integers(n_min, n_max + 1))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    while np.min(np.diff(angles, append=angles[0] + 2 * np.pi)) < 0.2:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    radii = rng.uniform(0.5 * radius, radius, n)
    pts = np.column_stack([center[0] + radii * np.cos(angles),
                           center[1] + radii * np.sin(angles)])
    return hs.CellView.from_polygon(pts)


def random_spd(rng, scale=4.0):
    a = rng.uniform(1.0 / scale, scale)
    b = rng.uniform(1.0 / scale, scale)
    c = rng.uniform(-0.8, 0.8) * np.sqrt(a * b)
    return np.array([[a, c], [c, b]])
