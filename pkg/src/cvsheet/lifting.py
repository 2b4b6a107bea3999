"""Lifting of interface functions into the two half-slabs.

The lift of a front ``f`` is ``psi(x', x3) = (1 - x3^2) chi(x3 |D|) f``, i.e.
the Fourier coefficient ``c_k`` is multiplied by ``(1 - x3^2) chi(x3 |k|)``
with ``|k|`` the Euclidean length of the integer index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectral import (
    MINUS,
    PLUS,
    FieldPair,
    FrontField,
    VolumeField,
    dx,
    half_grids,
    sobolev_norm_volume_sq,
    torus_norm_sq,
)


def _h(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _smooth_step(t):
    """C-infinity step, 1 for t <= 0 and 0 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a, b = _h(1.0 - t), _h(t)
    return a / (a + b)


def _smooth_step_derivative(t):
    t = np.asarray(t, dtype=float)
    a, b = _h(1.0 - t), _h(t)
    inside = (t > 0) & (t < 1)
    out = np.zeros_like(t)
    ti = t[inside]
    ab = a[inside] * b[inside]
    out[inside] = -ab * (1.0 / (1.0 - ti) ** 2 + 1.0 / ti**2) / (a[inside] + b[inside]) ** 2
    return out


@dataclass(frozen=True)
class CutoffProfile:
    """Even cutoff ``chi`` with ``chi = 1`` on [-1, 1] and support in [-S, S].

    ``func`` and ``deriv`` act on arrays of ``|s|``-independent arguments; the
    default is a C-infinity smooth step on ``1 < |s| < S``.
    """

    support: float = 2.0
    func: object = None
    deriv: object = None

    def __post_init__(self):
        if not self.support > 1.0:
            raise ValueError("cutoff support radius must exceed 1")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(s), dtype=float)
        return _smooth_step((np.abs(s) - 1.0) / (self.support - 1.0))

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.deriv is not None:
            return np.asarray(self.deriv(s), dtype=float)
        t = (np.abs(s) - 1.0) / (self.support - 1.0)
        return np.sign(s) * _smooth_step_derivative(t) / (self.support - 1.0)


DEFAULT_CUTOFF = CutoffProfile()


@lru_cache(maxsize=32)
def _profiles(chi, grid):
    """``(1 - x3^2) chi(x3 |k|)`` and its x3-derivative, rfft layout."""
    k1, k2 = grid.torus.k_half
    kabs = np.sqrt(k1**2 + k2**2)[:, :, None]
    x3 = grid.x3[None, None, :]
    s = x3 * kabs
    c = chi(s)
    dc = chi.derivative(s)
    prof = (1.0 - x3**2) * c
    dprof = -2.0 * x3 * c + (1.0 - x3**2) * dc * kabs
    return prof, dprof


def _half_coeffs(f):
    n2 = f.grid.n2
    return f.coeffs[:, : n2 // 2 + 1] * f.coeffs.size


def _apply_profile(f, prof, grid):
    hat = _half_coeffs(f)[:, :, None] * prof
    return np.fft.irfft2(hat, s=grid.torus.shape, axes=(0, 1))


@dataclass(frozen=True, eq=False)
class LiftedFront:
    """A front and its lift on both half-slabs."""

    source: FrontField
    psi: FieldPair
    chi: CutoffProfile = DEFAULT_CUTOFF

    @property
    def grid(self):
        return self.psi.plus.grid

    def d3_analytic(self, side):
        """Closed-form vertical derivative of the lift on one half-slab."""
        g = self.psi[side].grid
        _, dprof = _profiles(self.chi, g)
        return _apply_profile(self.source, dprof, g)

    def trace_residuals(self):
        """Max deviations of the three lift identities on the grid."""
        f = self.source.values
        p, m = self.psi.plus.data[0], self.psi.minus.data[0]
        return {
            "interface": float(max(np.abs(p[:, :, 0] - f).max(), np.abs(m[:, :, 0] - f).max())),
            "walls": float(max(np.abs(p[:, :, -1]).max(), np.abs(m[:, :, -1]).max())),
            "d3_interface": float(
                max(np.abs(self.d3_analytic(s)[:, :, 0]).max() for s in (PLUS, MINUS))
            ),
        }


def lift(f, chi=DEFAULT_CUTOFF, n3=None, grids=None):
    """Lift ``f`` into both half-slabs.

    Either ``grids`` (a ``(plus, minus)`` pair) or ``n3`` must be given.
    """
    if grids is None:
        if n3 is None:
            raise ValueError("lift needs n3 or explicit grids")
        grids = half_grids(f.grid.n1, f.grid.n2, n3)
    gp, gm = grids
    halves = []
    for g in (gp, gm):
        prof, _ = _profiles(chi, g)
        halves.append(VolumeField.scalar(g, _apply_profile(f, prof, g)))
    return LiftedFront(f, FieldPair(*halves), chi)


class ZeroFrontError(ValueError):
    """Norm ratio requested for a vanishing front."""


def lifting_norm_ratio(f, m, chi=DEFAULT_CUTOFF, n3=17):
    """``||psi||_{H^m(Omega)} / ||f||_{H^{m-1/2}(T^2)}`` for ``m`` in 1..4."""
    if m not in (1, 2, 3, 4):
        raise ValueError("m must be in 1..4")
    denom = torus_norm_sq(f, m - 0.5)
    if denom <= 0.0:
        raise ZeroFrontError("front has zero norm")
    lf = lift(f, chi, n3=n3)
    num = sum(sobolev_norm_volume_sq(h, m, max_order=4) for h in lf.psi)
    return float(np.sqrt(num / denom))


@dataclass(frozen=True)
class DiffeoCheck:
    ok: bool
    margin: float
    max_gradient: float


def max_gradient(psi):
    """Max over both slabs of the Euclidean length of the gradient of the lift."""
    worst = 0.0
    for h in psi.psi:
        d = h.data[0]
        g2 = dx(d, h.grid, 1) ** 2 + dx(d, h.grid, 2) ** 2 + dx(d, h.grid, 3) ** 2
        worst = max(worst, float(np.sqrt(g2.max())))
    return worst


def check_diffeomorphism(psi):
    """Admissibility of ``x -> (x', x3 + psi)``: requires ``|grad psi| < 1/2``."""
    gmax = max_gradient(psi)
    margin = 0.5 - gmax
    return DiffeoCheck(margin > 0.0, margin, gmax)
