"""Change-of-variables data for the map ``Psi(x) = (x', x3 + psi(x))``.

With ``J = 1 + d3 psi`` the inverse Jacobian is::

    A = [[1, 0, 0], [0, 1, 0], [-d1 psi / J, -d2 psi / J, 1 / J]]

and ``a = J A``.  Only the third row of ``A`` is non-trivial, so a
:class:`SideGeometry` keeps ``A31, A32, A33`` and assembles full matrices
on request.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lifting import LiftedFront, check_diffeomorphism
from .spectral import MINUS, PLUS, FieldPair, GridMismatchError, VolumeField, dx


class DiffeomorphismError(RuntimeError):
    """The lifted front violates ``|grad psi| < 1/2``."""


@dataclass(frozen=True, eq=False)
class SideGeometry:
    """Geometric coefficients on one half-slab, as nodal arrays."""

    grid: object
    dpsi: np.ndarray  # (3, n1, n2, n3)
    dpsi_t: np.ndarray  # (3, n1, n2, n3)
    psi_t: np.ndarray  # (n1, n2, n3)

    @cached_property
    def J(self):
        return 1.0 + self.dpsi[2]

    @cached_property
    def A3(self):
        """Third row of ``A``: ``(-d1 psi / J, -d2 psi / J, 1 / J)``."""
        return np.stack([-self.dpsi[0] / self.J, -self.dpsi[1] / self.J, 1.0 / self.J])

    @cached_property
    def A3_t(self):
        """Time derivative of the third row of ``A``."""
        J, Jt = self.J, self.dpsi_t[2]
        return np.stack(
            [
                -self.dpsi_t[0] / J + self.dpsi[0] * Jt / J**2,
                -self.dpsi_t[1] / J + self.dpsi[1] * Jt / J**2,
                -Jt / J**2,
            ]
        )

    @cached_property
    def N(self):
        return np.stack([-self.dpsi[0], -self.dpsi[1], np.ones_like(self.J)])

    @property
    def A(self):
        return _assemble(self.A3, np.ones_like(self.J))

    @property
    def a(self):
        return self.J * self.A

    @property
    def A_t(self):
        return _assemble(self.A3_t, np.zeros_like(self.J))

    # derivative helpers ------------------------------------------------

    def d(self, arr, axis):
        return dx(arr, self.grid, axis)

    def grad(self, arr):
        return np.stack([self.d(arr, 1), self.d(arr, 2), self.d(arr, 3)])

    def grad_A(self, q):
        """``A^T grad q`` for a scalar array ``q``."""
        g = self.grad(q)
        return self.grad_A_from(g)

    def grad_A_from(self, g):
        """``A^T`` applied to a precomputed Cartesian gradient ``g``."""
        A3 = self.A3
        return np.stack([g[0] + A3[0] * g[2], g[1] + A3[1] * g[2], A3[2] * g[2]])

    def div_A(self, u):
        """``(A^T grad) . u`` for a vector array ``u``."""
        A3 = self.A3
        d3 = self.d(u, 3)
        return (
            self.d(u[0], 1)
            + self.d(u[1], 2)
            + A3[0] * d3[0]
            + A3[1] * d3[1]
            + A3[2] * d3[2]
        )

    def curl_A(self, u):
        """``(A^T grad) x u`` for a vector array ``u``."""
        g = np.stack([self.grad_A_from(self.grad(u[i])) for i in range(3)])  # g[i, j] = D_j u_i
        return np.stack([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]])

    def transport_velocity(self, v):
        """``(v1, v2, (v.N - d_t psi) / J)``."""
        vn = np.einsum("i...,i...->...", v, self.N)
        return np.stack([v[0], v[1], (vn - self.psi_t) / self.J])

    def transport_field(self, B):
        """``(B1, B2, B.N / J)``."""
        bn = np.einsum("i...,i...->...", B, self.N)
        return np.stack([B[0], B[1], bn / self.J])

    def advect(self, w, u):
        """``(w . grad) u`` for vector arrays ``w`` and ``u``."""
        return (
            w[0] * self.d(u, 1)
            + w[1] * self.d(u, 2)
            + w[2] * self.d(u, 3)
        )

    def piola_residual(self):
        """Max of ``|d_k a_ki|`` over the grid for each ``i``."""
        J = self.J
        r1 = self.d(J, 1) - self.d(self.dpsi[0], 3)
        r2 = self.d(J, 2) - self.d(self.dpsi[1], 3)
        return np.array([np.abs(r1).max(), np.abs(r2).max(), 0.0])


def _assemble(row3, diag):
    z = np.zeros_like(diag)
    return np.stack(
        [
            np.stack([diag, z, z]),
            np.stack([z, diag, z]),
            row3,
        ]
    )


@dataclass(frozen=True, eq=False)
class GeometryBundle:
    """Lifted front, its time derivative and per-side coefficients."""

    psi: LiftedFront
    psi_t: FieldPair
    sides: dict

    def __getitem__(self, side):
        return self.sides[side]

    @property
    def grids(self):
        return self.psi.psi.plus.grid, self.psi.psi.minus.grid

    def piola_residual(self):
        return np.maximum(self[PLUS].piola_residual(), self[MINUS].piola_residual())

    def J_range(self):
        lo = min(float(self[s].J.min()) for s in (PLUS, MINUS))
        hi = max(float(self[s].J.max()) for s in (PLUS, MINUS))
        return lo, hi


def _gradient(arr, grid):
    return np.stack([dx(arr, grid, 1), dx(arr, grid, 2), dx(arr, grid, 3)])


def build_geometry(psi, psi_t=None, check=True):
    """Assemble ``A, J, a, N`` on both slabs from a lift and its time derivative.

    ``psi_t`` is a :class:`FieldPair` (typically the lift of ``d_t f``);
    ``None`` means a static front.
    """
    if check:
        chk = check_diffeomorphism(psi)
        if not chk.ok:
            raise DiffeomorphismError(
                f"|grad psi| reaches {chk.max_gradient:.3g} >= 1/2; front too steep"
            )
    sides = {}
    for s in (PLUS, MINUS):
        h = psi.psi[s]
        g = h.grid
        p = h.data[0]
        if psi_t is None:
            pt = np.zeros_like(p)
        else:
            if psi_t[s].grid != g:
                raise GridMismatchError("psi_t grid differs from psi grid")
            pt = psi_t[s].data[0]
        sides[s] = SideGeometry(g, _gradient(p, g), _gradient(pt, g), pt)
    if psi_t is None:
        psi_t = FieldPair(*(VolumeField.zeros(g) for g in (psi.psi.plus.grid, psi.psi.minus.grid)))
    return GeometryBundle(psi, psi_t, sides)


def _check_same(g, u):
    for s in (PLUS, MINUS):
        if u[s].grid != g[s].grid:
            raise GridMismatchError("field grid differs from geometry grid")


def transport_fields(g, v, B):
    """Transport velocities ``(v~, B~)`` for field pairs ``v`` and ``B``."""
    _check_same(g, v)
    _check_same(g, B)
    vt, Bt = [], []
    for s in (PLUS, MINUS):
        sg = g[s]
        vt.append(VolumeField(sg.grid, sg.transport_velocity(v[s].data)))
        Bt.append(VolumeField(sg.grid, sg.transport_field(B[s].data)))
    return FieldPair(*vt), FieldPair(*Bt)


def transformed_divergence(g, u):
    """``(A^T grad) . u`` on both slabs as a scalar field pair."""
    _check_same(g, u)
    return FieldPair(*(VolumeField.scalar(g[s].grid, g[s].div_A(u[s].data)) for s in (PLUS, MINUS)))


def divergence_identity_residual(g, u):
    """Max of ``|(A^T grad).u - (div u - grad psi . d3 u / J)|`` over both slabs."""
    worst = 0.0
    for s in (PLUS, MINUS):
        sg = g[s]
        w = u[s].data
        d3 = sg.d(w, 3)
        div = sg.d(w[0], 1) + sg.d(w[1], 2) + d3[2]
        alt = div - np.einsum("i...,i...->...", sg.dpsi, d3) / sg.J
        worst = max(worst, float(np.abs(sg.div_A(w) - alt).max()))
    return worst
