import numpy as np
import pytest

from cvsheet.geometry import build_geometry
from cvsheet.lifting import lift, max_gradient
from cvsheet.spectral import FieldPair, FrontField, TorusGrid, VolumeField, half_grids


def random_front(grid, rng, kmax=4, amplitude=1.0):
    """Real band-limited front with modes ``|k_i| <= kmax`` and random coefficients."""
    coeffs = np.zeros(grid.shape, dtype=complex)
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            c = rng.normal() + 1j * rng.normal()
            coeffs[k1 % grid.n1, k2 % grid.n2] += c
            coeffs[-k1 % grid.n1, -k2 % grid.n2] += np.conj(c)
    coeffs[0, 0] = coeffs[0, 0].real
    return FrontField(grid, amplitude * coeffs / np.abs(coeffs).max())


def smooth_vector(grid, rng, kmax=3):
    """Random smooth vector field: low Fourier modes times cubic x3 profiles."""
    x1, x2, x3 = grid.coords
    out = np.zeros((3,) + grid.shape)
    for i in range(3):
        for _ in range(4):
            k1, k2 = rng.integers(-kmax, kmax + 1, size=2)
            c = rng.normal(size=4)
            phase = rng.uniform(0, 2 * np.pi)
            out[i] += np.cos(2 * np.pi * (k1 * x1 + k2 * x2) + phase) * (c[0] + c[1] * x3 + c[2] * x3**2 + c[3] * x3**3)
    return VolumeField(grid, out)


def smooth_pair(grids, rng):
    return FieldPair(smooth_vector(grids[0], rng), smooth_vector(grids[1], rng))


def admissible_geometry(rng, n=(16, 16, 17), steepness=0.3):
    """Random lift scaled so that ``max |grad psi| = steepness``, with a random ``psi_t``."""
    grid = TorusGrid(n[0], n[1])
    f = random_front(grid, rng, 3)
    f = (steepness / max_gradient(lift(f, n3=n[2]))) * f
    lf = lift(f, n3=n[2])
    ft = lift(random_front(grid, rng, 3, 0.1), grids=(lf.psi.plus.grid, lf.psi.minus.grid))
    return build_geometry(lf, ft.psi), lf


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def torus16():
    return TorusGrid(16, 16)


@pytest.fixture(scope="session")
def grids16():
    return half_grids(16, 16, 17)
