"""Grids, transforms and norms on the torus T^2 and the half-slabs T^2 x (0, +-1).

Horizontal directions are Fourier (unit period), the vertical direction uses
Chebyshev-Lobatto collocation on each half-slab separately.  Node 0 of either
half-slab sits on the interface x3 = 0; the last node sits on the wall
x3 = +1 (side ``+1``) or x3 = -1 (side ``-1``).

Volume fields are stored by their nodal values, with shape
``(ncomp, n1, n2, n3)``.  Front fields are stored by their Fourier
coefficients ``c_k`` normalised so that ``f(x) = sum_k c_k exp(2 i pi k.x)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

PLUS = 1
MINUS = -1
SIDES = (PLUS, MINUS)


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


def _check_even(name, n):
    if n <= 0 or n % 2:
        raise ValueError(f"{name} must be a positive even integer, got {n}")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit 2-torus with ``n1 x n2`` points."""

    n1: int
    n2: int

    def __post_init__(self):
        _check_even("n1", self.n1)
        _check_even("n2", self.n2)

    @property
    def shape(self):
        return (self.n1, self.n2)

    @cached_property
    def x(self):
        """Physical coordinates, two arrays of shape ``(n1, n2)``."""
        x1 = np.arange(self.n1) / self.n1
        x2 = np.arange(self.n2) / self.n2
        return np.meshgrid(x1, x2, indexing="ij")

    @cached_property
    def k(self):
        """Integer wavenumbers for the full (complex) FFT layout."""
        k1 = np.fft.fftfreq(self.n1, 1.0 / self.n1)
        k2 = np.fft.fftfreq(self.n2, 1.0 / self.n2)
        return np.meshgrid(k1, k2, indexing="ij")

    @cached_property
    def kabs(self):
        """Euclidean length of the integer index, full layout."""
        k1, k2 = self.k
        return np.sqrt(k1**2 + k2**2)

    @cached_property
    def k_half(self):
        """Integer wavenumbers for the ``rfft2`` layout (last axis halved)."""
        k1 = np.fft.fftfreq(self.n1, 1.0 / self.n1)
        k2 = np.fft.rfftfreq(self.n2, 1.0 / self.n2)
        return np.meshgrid(k1, k2, indexing="ij")

    @cached_property
    def dx_multipliers(self):
        """``2 i pi k`` for each direction, rfft layout, Nyquist zeroed."""
        k1, k2 = self.k_half
        m1 = 2j * np.pi * np.where(np.abs(k1) == self.n1 // 2, 0.0, k1)
        m2 = 2j * np.pi * np.where(np.abs(k2) == self.n2 // 2, 0.0, k2)
        return m1, m2

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask in rfft layout."""
        k1, k2 = self.k_half
        return (np.abs(k1) <= self.n1 // 3) & (np.abs(k2) <= self.n2 // 3)

    @cached_property
    def dealias_mask_full(self):
        k1, k2 = self.k
        return (np.abs(k1) <= self.n1 // 3) & (np.abs(k2) <= self.n2 // 3)


def chebyshev_lobatto(n):
    """Lobatto nodes on [0, 1] ordered from 0 to 1."""
    if n < 3:
        raise ValueError("need at least 3 collocation points")
    j = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * j / (n - 1)))


def differentiation_matrix(x):
    """Barycentric collocation differentiation matrix on nodes ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    # negative-sum trick: rows of D annihilate constants to rounding
    D[np.diag_indices(n)] = -D.sum(axis=1)
    return D


def clenshaw_curtis_weights(n):
    """Quadrature weights for :func:`chebyshev_lobatto` nodes on [0, 1]."""
    t = 1.0 - 2.0 * chebyshev_lobatto(n)  # nodes on [-1, 1]
    i = np.arange(n)
    V = np.cos(np.outer(i, np.arccos(np.clip(t, -1.0, 1.0))))
    moments = np.where(i % 2 == 0, 2.0 / (1.0 - i.astype(float) ** 2 + (i % 2)), 0.0)
    w = np.linalg.solve(V, moments)
    return 0.5 * w


@dataclass(frozen=True)
class SlabGrid:
    """Tensor grid on one half-slab: torus grid times ``n3`` Lobatto nodes."""

    torus: TorusGrid
    n3: int
    side: int = PLUS

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be +1 or -1, got {self.side}")
        if self.n3 < 3:
            raise ValueError("n3 must be at least 3")

    @property
    def shape(self):
        return (self.torus.n1, self.torus.n2, self.n3)

    def other(self):
        return SlabGrid(self.torus, self.n3, -self.side)

    @cached_property
    def x3(self):
        """Vertical nodes; index 0 is the interface, index -1 the wall."""
        return self.side * chebyshev_lobatto(self.n3)

    @cached_property
    def D3(self):
        return differentiation_matrix(self.x3)

    @cached_property
    def weights3(self):
        return clenshaw_curtis_weights(self.n3)

    @cached_property
    def coords(self):
        x1, x2 = self.torus.x
        return (
            np.broadcast_to(x1[:, :, None], self.shape),
            np.broadcast_to(x2[:, :, None], self.shape),
            np.broadcast_to(self.x3[None, None, :], self.shape),
        )


def half_grids(n1, n2, n3):
    """The pair of slab grids ``(plus, minus)`` sharing one torus grid."""
    torus = TorusGrid(n1, n2)
    return SlabGrid(torus, n3, PLUS), SlabGrid(torus, n3, MINUS)


# ---------------------------------------------------------------- front fields


@dataclass(frozen=True, eq=False)
class FrontField:
    """Real function on T^2 held by its Fourier coefficients."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise GridMismatchError("coefficient array does not match grid")

    @classmethod
    def from_values(cls, grid, values):
        values = np.asarray(values, dtype=float)
        return cls(grid, np.fft.fft2(values) / values.size)

    @classmethod
    def from_function(cls, grid, func):
        x1, x2 = grid.x
        return cls.from_values(grid, func(x1, x2))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @cached_property
    def values(self):
        return np.real(np.fft.ifft2(self.coeffs * self.coeffs.size))

    def __add__(self, other):
        _same_torus(self.grid, other.grid)
        return FrontField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_torus(self.grid, other.grid)
        return FrontField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return FrontField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def derivative(self, a1=0, a2=0):
        """Exact Fourier derivative ``d1^a1 d2^a2``."""
        k1, k2 = self.grid.k
        n1, n2 = self.grid.shape
        m1 = 2j * np.pi * np.where(np.abs(k1) == n1 // 2, 0.0, k1)
        m2 = 2j * np.pi * np.where(np.abs(k2) == n2 // 2, 0.0, k2)
        return FrontField(self.grid, self.coeffs * m1**a1 * m2**a2)

    def gradient_values(self):
        return np.stack([self.derivative(1, 0).values, self.derivative(0, 1).values])

    def dealiased(self):
        return FrontField(self.grid, np.where(self.grid.dealias_mask_full, self.coeffs, 0.0))

    def mean(self):
        return float(np.real(self.coeffs[0, 0]))


def _same_torus(a, b):
    if a != b:
        raise GridMismatchError(f"torus grids differ: {a} vs {b}")


def sobolev_norm_torus(f, s):
    """``sqrt(sum_k (1 + |k|^2)^s |c_k|^2)`` with ``k`` the integer index."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    return float(np.sqrt(torus_norm_sq(f, s)))


def torus_norm_sq(f, s):
    """Squared ``H^s`` norm for any real ``s``."""
    weight = (1.0 + f.grid.kabs**2) ** s
    return float(np.sum(weight * np.abs(f.coeffs) ** 2))


# --------------------------------------------------------------- volume fields


@dataclass(frozen=True, eq=False)
class VolumeField:
    """Scalar (1 component) or vector (3 components) field on one half-slab."""

    grid: SlabGrid
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[1:] != self.grid.shape:
            raise GridMismatchError(
                f"data shape {self.data.shape} does not fit grid {self.grid.shape}"
            )
        if self.data.shape[0] not in (1, 3):
            raise ValueError("a volume field has 1 or 3 components")

    @classmethod
    def scalar(cls, grid, values):
        return cls(grid, np.asarray(values, dtype=float).reshape((1,) + grid.shape))

    @classmethod
    def vector(cls, grid, components):
        return cls(grid, np.stack([np.broadcast_to(c, grid.shape) for c in components]).astype(float))

    @classmethod
    def zeros(cls, grid, ncomp=1):
        return cls(grid, np.zeros((ncomp,) + grid.shape))

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(x1, x2, x3)``; a tuple result makes a vector field."""
        out = func(*grid.coords)
        if isinstance(out, (tuple, list)):
            return cls.vector(grid, out)
        return cls.scalar(grid, np.broadcast_to(out, grid.shape))

    @property
    def ncomp(self):
        return self.data.shape[0]

    @property
    def side(self):
        return self.grid.side

    def __add__(self, other):
        _same_slab(self.grid, other.grid)
        return VolumeField(self.grid, self.data + other.data)

    def __sub__(self, other):
        _same_slab(self.grid, other.grid)
        return VolumeField(self.grid, self.data - other.data)

    def __mul__(self, scalar):
        return VolumeField(self.grid, self.data * scalar)

    __rmul__ = __mul__

    def component(self, i):
        return VolumeField(self.grid, self.data[i : i + 1])


def _same_slab(a, b):
    if a != b:
        raise GridMismatchError(f"slab grids differ: {a} vs {b}")


def dx(arr, grid, axis):
    """Derivative of a nodal array ``(..., n1, n2, n3)`` along ``axis`` 1, 2 or 3."""
    if axis == 3:
        return np.einsum("ij,...j->...i", grid.D3, arr)
    m1, m2 = grid.torus.dx_multipliers
    hat = np.fft.rfft2(arr, axes=(-3, -2))
    mult = (m1 if axis == 1 else m2)[:, :, None]
    return np.fft.irfft2(hat * mult, s=grid.torus.shape, axes=(-3, -2))


def dxh(arr, grid, a1, a2):
    """Tangential derivative ``d1^a1 d2^a2`` of a nodal array."""
    if a1 == 0 and a2 == 0:
        return np.array(arr, dtype=float)
    m1, m2 = grid.torus.dx_multipliers
    hat = np.fft.rfft2(arr, axes=(-3, -2))
    mult = (m1**a1 * m2**a2)[:, :, None]
    return np.fft.irfft2(hat * mult, s=grid.torus.shape, axes=(-3, -2))


def gradient(arr, grid):
    """Stack of the three derivatives of a nodal array."""
    return np.stack([dx(arr, grid, 1), dx(arr, grid, 2), dx(arr, grid, 3)])


def dealias(arr, grid):
    """2/3-rule truncation in the horizontal directions."""
    torus = grid.torus if isinstance(grid, SlabGrid) else grid
    hat = np.fft.rfft2(arr, axes=(-3, -2)) * torus.dealias_mask[:, :, None]
    return np.fft.irfft2(hat, s=torus.shape, axes=(-3, -2))


def drop_nyquist(arr, grid):
    """Zero the horizontal Nyquist modes, which spectral differentiation ignores."""
    torus = grid.torus if isinstance(grid, SlabGrid) else grid
    k1, k2 = torus.k_half
    keep = (np.abs(k1) != torus.n1 // 2) & (np.abs(k2) != torus.n2 // 2)
    hat = np.fft.rfft2(arr, axes=(-3, -2)) * keep[:, :, None]
    return np.fft.irfft2(hat, s=torus.shape, axes=(-3, -2))


def integrate(arr, grid):
    """Quadrature of a nodal array over the half-slab (last three axes)."""
    return np.tensordot(np.mean(arr, axis=(-3, -2)), grid.weights3, axes=([-1], [0]))


def tangential_derivative(u, alpha):
    """``d1^alpha[0] d2^alpha[1] u``, exact in Fourier; ``|alpha| <= 3``."""
    a1, a2 = alpha
    if a1 < 0 or a2 < 0 or a1 + a2 > 3:
        raise ValueError(f"tangential order {alpha} not supported (|alpha| <= 3)")
    return VolumeField(u.grid, dxh(u.data, u.grid, a1, a2))


def multi_indices(dim, order):
    """All multi-indices in ``dim`` variables with total order ``<= order``."""
    return [a for a in itertools.product(range(order + 1), repeat=dim) if sum(a) <= order]


def _derivative3(arr, grid, alpha):
    out = dxh(arr, grid, alpha[0], alpha[1])
    for _ in range(alpha[2]):
        out = dx(out, grid, 3)
    return out


def sobolev_norm_volume_sq(u, m, max_order=3):
    if m < 0 or m > max_order or int(m) != m:
        raise ValueError(f"volume norm order must be an integer in 0..{max_order}, got {m}")
    total = 0.0
    for alpha in multi_indices(3, int(m)):
        d = _derivative3(u.data, u.grid, alpha)
        total += float(np.sum(integrate(d**2, u.grid)))
    return total


def sobolev_norm_volume(u, m):
    """``sqrt(sum_{|alpha| <= m} int |d^alpha u|^2)`` on the half-slab of ``u``."""
    return float(np.sqrt(sobolev_norm_volume_sq(u, m)))


INTERFACE, TOP, BOTTOM = "interface", "top", "bottom"


def trace(u, where):
    """Restriction of ``u`` to a boundary plane, as a front field per component.

    Returns a :class:`FrontField` for scalar fields and a list of three for
    vector fields.
    """
    if where == INTERFACE:
        idx = 0
    elif (where == TOP and u.side == PLUS) or (where == BOTTOM and u.side == MINUS):
        idx = -1
    else:
        raise ValueError(f"wall {where!r} does not bound the side {u.side:+d} slab")
    out = [FrontField.from_values(u.grid.torus, u.data[c, :, :, idx]) for c in range(u.ncomp)]
    return out[0] if u.ncomp == 1 else out


@dataclass(frozen=True, eq=False)
class FieldPair:
    """The two halves (plus, minus) of a field defined on both slabs."""

    plus: VolumeField
    minus: VolumeField = field(repr=False)

    def __post_init__(self):
        if self.plus.side != PLUS or self.minus.side != MINUS:
            raise GridMismatchError("FieldPair expects (plus, minus) halves")

    def __iter__(self):
        return iter((self.plus, self.minus))

    def __getitem__(self, side):
        return self.plus if side == PLUS else self.minus
