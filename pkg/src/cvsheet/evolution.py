"""Time stepping of the fixed-domain current-vortex sheet system.

Per side the unknowns obey::

    d_t v + (v~.grad) v - (B~.grad) B + A^T grad Q = 0
    d_t B + (v~.grad) B - (B~.grad) v = 0
    d_t f = v.N on the interface

with the total pressure ``Q`` from the transmission problem.  Steps are
classical RK4 with the geometry rebuilt and the pressure re-solved at every
stage, followed by a divergence projection.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .elliptic import TRANSMISSION, TwoSlabSolver
from .geometry import DiffeomorphismError, build_geometry
from .lifting import DEFAULT_CUTOFF, lift
from .pressure import PressureProblem, assemble_F, assemble_G, solve_pressure
from .spectral import (
    MINUS,
    PLUS,
    FieldPair,
    FrontField,
    VolumeField,
    dealias,
    drop_nyquist,
    half_grids,
    integrate,
)
from .stability import InterfaceState

CFL_NUMBER = 0.5
# Runge-Kutta stage states are only consistent up to O(dt^2): the pressure
# data of a stage are projected onto the compatible subspace unless the
# defect is gross (a sign of a broken run rather than of time truncation).
STAGE_COMPAT_TOL = 1e-3


class CFLError(RuntimeError):
    """Requested time step exceeds the advective stability bound."""


class FlatnessError(DiffeomorphismError):
    """The front became too steep for the flattening map to stay invertible."""


class HypothesisWarning(UserWarning):
    """A stability hypothesis of the energy estimate failed along the run."""


@dataclass(eq=False)
class PlasmaState:
    vp: VolumeField
    vm: VolumeField
    Bp: VolumeField
    Bm: VolumeField
    Qp: VolumeField
    Qm: VolumeField
    f: FrontField
    f_t: FrontField
    time: float = 0.0

    @property
    def grids(self):
        return self.vp.grid, self.vm.grid

    @property
    def v(self):
        return FieldPair(self.vp, self.vm)

    @property
    def B(self):
        return FieldPair(self.Bp, self.Bm)

    @property
    def Q(self):
        return FieldPair(self.Qp, self.Qm)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @classmethod
    def zeros(cls, n1, n2, n3):
        gp, gm = half_grids(n1, n2, n3)
        vec = lambda g: VolumeField.zeros(g, 3)
        sca = lambda g: VolumeField.zeros(g, 1)
        f = FrontField.zeros(gp.torus)
        return cls(vec(gp), vec(gm), vec(gp), vec(gm), sca(gp), sca(gm), f, f)


@dataclass(eq=False)
class CurlState:
    zeta_p: VolumeField
    zeta_m: VolumeField
    xi_p: VolumeField
    xi_m: VolumeField

    def zeta(self, side):
        return self.zeta_p if side == PLUS else self.zeta_m

    def xi(self, side):
        return self.xi_p if side == PLUS else self.xi_m


@dataclass(eq=False)
class Tendency:
    """Time derivatives of ``(v+, v-, B+, B-, f)`` plus the stage by-products."""

    dv: tuple  # (plus, minus) arrays
    dB: tuple
    df: FrontField
    pressure: object
    geometry: object


# ---------------------------------------------------------------- geometry


def _side_arrays(pair):
    return pair.plus.data, pair.minus.data


def front_geometry(f, f_t=None, grids=None, chi=DEFAULT_CUTOFF, check=True):
    """Geometry of the lift of ``f`` with ``psi_t`` the lift of ``f_t``."""
    lf = lift(f, chi, grids=grids)
    psi_t = None if f_t is None else lift(f_t, chi, grids=grids).psi
    try:
        return build_geometry(lf, psi_t, check=check)
    except DiffeomorphismError as exc:
        raise FlatnessError(str(exc)) from None


def normal_velocity(g, v):
    """``v.N`` at the interface for both sides, as ``(n1, n2)`` arrays."""
    out = []
    for s, arr in ((PLUS, v[0]), (MINUS, v[1])):
        N = g[s].N[:, :, :, 0]
        out.append(np.einsum("i...,i...->...", arr[:, :, :, 0], N))
    return out


def front_speed(g, v, torus):
    """Side-averaged ``v.N`` as a front field and the max trace mismatch."""
    a, b = normal_velocity(g, v)
    return FrontField.from_values(torus, 0.5 * (a + b)), float(np.abs(a - b).max())


def interface_state(state):
    return InterfaceState(
        state.vp.data[:, :, :, 0],
        state.vm.data[:, :, :, 0],
        state.Bp.data[:, :, :, 0],
        state.Bm.data[:, :, :, 0],
        state.f,
    )


# ---------------------------------------------------------------- pressure


def solve_state_pressure(state, g, f_t, x0=None, tol=1e-12, compat_tol=STAGE_COMPAT_TOL):
    """Assemble ``F, G`` for the fields of ``state`` and solve for ``Q``."""
    F = assemble_F(g, state.v, state.B)
    ist = interface_state(state)
    G = assemble_G(ist, f_t)
    problem = PressureProblem(g, F.plus, F.minus, G)
    return solve_pressure(problem, tol=tol, x0=x0, compat_tol=compat_tol)


# ---------------------------------------------------------------- tendencies


def _dealias_opt(arr, grid, on):
    return dealias(arr, grid) if on else arr


def _advective(sg, v, B, dealias_on):
    """Transport parts of the tendencies, without the pressure gradient."""
    vt = sg.transport_velocity(v)
    Bt = sg.transport_field(B)
    nv = -sg.advect(vt, v) + sg.advect(Bt, B)
    nB = -sg.advect(vt, B) + sg.advect(Bt, v)
    return _dealias_opt(nv, sg.grid, dealias_on), _dealias_opt(nB, sg.grid, dealias_on)


def consistent_pressure_data(g, v, nv, f_t):
    """Pressure data that keep ``(A^T grad).v`` and ``[v.N]`` stationary in time.

    With ``d_t v = n - A^T grad Q`` the interior rows of ``d_t((A^T grad).v) = 0``
    give ``F = -(d_t A^T grad).v - (A^T grad).n`` and the interface rows of
    ``d_t [v.N] = 0`` give ``G = [n.N + v.d_t N]``, both evaluated with the
    same discrete operators as the stepper.  For constrained states they agree
    with the closed-form sources of :func:`~cvsheet.pressure.assemble_F` and
    :func:`~cvsheet.pressure.assemble_G` up to truncation error.
    """
    gp, gm = g.grids
    F = []
    flux = []
    grad_ft = f_t.gradient_values()
    for i, (s, grid) in enumerate(((PLUS, gp), (MINUS, gm))):
        sg = g[s]
        d3 = sg.d(v[i], 3)
        F.append(-np.einsum("i...,i...->...", sg.A3_t, d3) - sg.div_A(nv[i]))
        N0 = sg.N[:, :, :, 0]
        flux.append(
            np.einsum("i...,i...->...", nv[i][:, :, :, 0], N0)
            - v[i][0, :, :, 0] * grad_ft[0] - v[i][1, :, :, 0] * grad_ft[1]
        )
    Fp = VolumeField.scalar(gp, F[0])
    Fm = VolumeField.scalar(gm, F[1])
    return PressureProblem(g, Fp, Fm, FrontField.from_values(gp.torus, flux[0] - flux[1]))


def rhs(state, chi=DEFAULT_CUTOFF, dealias_on=True, x0=None, tol=1e-12, compat_tol=STAGE_COMPAT_TOL,
        pressure_form="consistent"):
    """Time derivatives of ``(v+, v-, B+, B-, f)`` for ``state``.

    ``d_t f`` is the side average of ``v.N``; the pressure is solved for the
    staged fields with ``x0`` (default: ``state.Q``) as the initial guess.
    ``pressure_form`` selects the data of the pressure problem:
    ``"consistent"`` (:func:`consistent_pressure_data`, default) or
    ``"closed"`` (the closed-form ``F, G`` sources).
    """
    grids = state.grids
    torus = grids[0].torus
    g0 = front_geometry(state.f, None, grids, chi)
    f_t, _ = front_speed(g0, _side_arrays(state.v), torus)
    if dealias_on:
        f_t = f_t.dealiased()
    g = front_geometry(state.f, f_t, grids, chi, check=False)
    adv = [_advective(g[s], fv.data, fB.data, dealias_on)
           for s, fv, fB in ((PLUS, state.vp, state.Bp), (MINUS, state.vm, state.Bm))]
    x0 = state.Q if x0 is None else x0
    if pressure_form == "consistent":
        problem = consistent_pressure_data(g, _side_arrays(state.v), (adv[0][0], adv[1][0]), f_t)
        sol = solve_pressure(problem, tol=tol, x0=x0, compat_tol=compat_tol)
    elif pressure_form == "closed":
        sol = solve_state_pressure(state, g, f_t, x0=x0, tol=tol, compat_tol=compat_tol)
    else:
        raise ValueError(f"unknown pressure form {pressure_form!r}")
    dv, dB = [], []
    for i, (s, Q) in enumerate(((PLUS, sol.Qp), (MINUS, sol.Qm))):
        dv.append(adv[i][0] - _dealias_opt(g[s].grad_A(Q.data[0]), g[s].grid, dealias_on))
        dB.append(adv[i][1])
    return Tendency(tuple(dv), tuple(dB), f_t, sol, g)


# ---------------------------------------------------------------- projection


def _project_pair(g, u, solver):
    """Remove the ``A``-gradient part of the pair ``u`` (arrays) keeping its flux jump.

    A residual incompatibility of the source is absorbed by the bordering
    constant of the solver.
    """
    F = np.stack([-g[s].div_A(arr) for s, arr in ((PLUS, u[0]), (MINUS, u[1]))])
    phi = solver.solve(F).Q
    return (
        u[0] - drop_nyquist(g[PLUS].grad_A(phi[0]), g[PLUS].grid),
        u[1] - drop_nyquist(g[MINUS].grad_A(phi[1]), g[MINUS].grid),
    )


def project_divergence(state, chi=DEFAULT_CUTOFF, g=None):
    """Make ``v`` and ``B`` discretely ``A``-divergence free on both slabs.

    ``u <- u - A^T grad phi`` with ``-(A^T grad).(A^T grad phi) = -(A^T grad).u``,
    continuous ``phi``, zero flux jump and Neumann walls.
    """
    if g is None:
        g = front_geometry(state.f, None, state.grids, chi)
    solver = TwoSlabSolver(g.grids, g, TRANSMISSION)
    gp, gm = g.grids
    vp, vm = _project_pair(g, _side_arrays(state.v), solver)
    Bp, Bm = _project_pair(g, _side_arrays(state.B), solver)
    return state.replace(
        vp=VolumeField(gp, vp), vm=VolumeField(gm, vm),
        Bp=VolumeField(gp, Bp), Bm=VolumeField(gm, Bm),
    )


def divergence_residuals(state, g=None, chi=DEFAULT_CUTOFF, norm="l2"):
    """``|(A^T grad).u|`` for ``u`` in ``v+, v-, B+, B-``.

    ``norm="l2"`` is the quadrature ``L^2`` norm on the half-slab, ``"max"``
    the maximum over all nodes.  The collocation projection enforces the
    constraint at interior nodes only; on the interface and wall nodes the
    residual is a truncation error that decays spectrally in ``n3``.  The
    horizontal Nyquist modes of the divergence are discarded: they are
    invisible to every spectral derivative and to the elliptic solver.
    """
    if norm not in ("l2", "max"):
        raise ValueError(f"unknown norm {norm!r}")
    if g is None:
        g = front_geometry(state.f, None, state.grids, chi, check=False)
    out = {}
    for name, fld, s in (("v+", state.vp, PLUS), ("v-", state.vm, MINUS),
                         ("B+", state.Bp, PLUS), ("B-", state.Bm, MINUS)):
        d = drop_nyquist(g[s].div_A(fld.data), g[s].grid)
        if norm == "max":
            out[name] = float(np.abs(d).max())
        else:
            out[name] = float(np.sqrt(integrate(d**2, g[s].grid)))
    return out


# ---------------------------------------------------------------- completion


def complete_state(state, chi=DEFAULT_CUTOFF, x0=None, tol=1e-12, dealias_on=True,
                   compat_tol=STAGE_COMPAT_TOL, pressure_form="consistent"):
    """Fill ``f_t`` and ``Q`` consistently with the fields of ``state``."""
    k = rhs(state, chi, dealias_on, x0=x0, tol=tol, compat_tol=compat_tol, pressure_form=pressure_form)
    return state.replace(f_t=k.df, Qp=k.pressure.Qp, Qm=k.pressure.Qm)


# ---------------------------------------------------------------- stepping


def _node_spacing(x3):
    gaps = np.abs(np.diff(x3))
    left = np.concatenate([[np.inf], gaps])
    right = np.concatenate([gaps, [np.inf]])
    return np.minimum(left, right)


def cfl_limit(state, chi=DEFAULT_CUTOFF, cfl=CFL_NUMBER, g=None):
    """Largest stable ``dt``: ``cfl / max(sum_j (|v~_j| + |B~_j|) / h_j)``."""
    if g is None:
        g = front_geometry(state.f, state.f_t, state.grids, chi, check=False)
    rate = 0.0
    for s, v, B in ((PLUS, state.vp, state.Bp), (MINUS, state.vm, state.Bm)):
        sg = g[s]
        grid = sg.grid
        speed = np.abs(sg.transport_velocity(v.data)) + np.abs(sg.transport_field(B.data))
        h3 = _node_spacing(grid.x3)
        r = speed[0] * grid.torus.n1 + speed[1] * grid.torus.n2 + speed[2] / h3
        rate = max(rate, float(r.max()))
    return np.inf if rate == 0.0 else cfl / rate


def _axpy(state, k, h):
    gp, gm = state.grids
    return state.replace(
        vp=VolumeField(gp, state.vp.data + h * k.dv[0]),
        vm=VolumeField(gm, state.vm.data + h * k.dv[1]),
        Bp=VolumeField(gp, state.Bp.data + h * k.dB[0]),
        Bm=VolumeField(gm, state.Bm.data + h * k.dB[1]),
        f=state.f + h * k.df,
        Qp=k.pressure.Qp,
        Qm=k.pressure.Qm,
    )


def step(state, dt, chi=DEFAULT_CUTOFF, cfl=CFL_NUMBER, dealias_on=True, project=True, tol=1e-12,
         compat_tol=STAGE_COMPAT_TOL, pressure_form="consistent"):
    """One RK4 step of size ``dt`` followed by the divergence projection.

    Raises :class:`CFLError` when ``dt`` exceeds :func:`cfl_limit` and
    :class:`FlatnessError` when a staged front loses admissibility.
    """
    limit = cfl_limit(state, chi, cfl)
    if dt > limit:
        raise CFLError(f"dt = {dt:.4g} exceeds the CFL bound {limit:.4g}")
    kw = dict(tol=tol, compat_tol=compat_tol, pressure_form=pressure_form)
    k1 = rhs(state, chi, dealias_on, **kw)
    k2 = rhs(_axpy(state, k1, dt / 2), chi, dealias_on, **kw)
    k3 = rhs(_axpy(state, k2, dt / 2), chi, dealias_on, **kw)
    k4 = rhs(_axpy(state, k3, dt), chi, dealias_on, **kw)
    w = dt / 6.0
    gp, gm = state.grids
    comb = lambda a: a[0] + 2.0 * a[1] + 2.0 * a[2] + a[3]
    ks = (k1, k2, k3, k4)
    new = state.replace(
        vp=VolumeField(gp, state.vp.data + w * comb([k.dv[0] for k in ks])),
        vm=VolumeField(gm, state.vm.data + w * comb([k.dv[1] for k in ks])),
        Bp=VolumeField(gp, state.Bp.data + w * comb([k.dB[0] for k in ks])),
        Bm=VolumeField(gm, state.Bm.data + w * comb([k.dB[1] for k in ks])),
        f=state.f + w * (k1.df + 2.0 * k2.df + 2.0 * k3.df + k4.df),
        Qp=k4.pressure.Qp,
        Qm=k4.pressure.Qm,
        time=state.time + dt,
    )
    if project:
        new = project_divergence(new, chi)
    return complete_state(new, chi, dealias_on=dealias_on, **kw)


# ---------------------------------------------------------------- curls


def curl_fields(state, g=None, chi=DEFAULT_CUTOFF):
    """Transported curls ``zeta = (A^T grad) x v`` and ``xi = (A^T grad) x B``."""
    if g is None:
        g = front_geometry(state.f, None, state.grids, chi, check=False)
    gp, gm = state.grids
    return CurlState(
        VolumeField(gp, g[PLUS].curl_A(state.vp.data)),
        VolumeField(gm, g[MINUS].curl_A(state.vm.data)),
        VolumeField(gp, g[PLUS].curl_A(state.Bp.data)),
        VolumeField(gm, g[MINUS].curl_A(state.Bm.data)),
    )


def _curl_plain(sg, u):
    g = np.stack([sg.grad(u[i]) for i in range(3)])
    return np.stack([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]])


def curl_identity_residual(state, curls=None, g=None, chi=DEFAULT_CUTOFF):
    """Max of ``|curl u - zeta - (grad psi x d3 u) / J|`` for ``u = v, B``."""
    if g is None:
        g = front_geometry(state.f, None, state.grids, chi, check=False)
    if curls is None:
        curls = curl_fields(state, g)
    worst = 0.0
    for s, v, B in ((PLUS, state.vp, state.Bp), (MINUS, state.vm, state.Bm)):
        sg = g[s]
        for u, c in ((v.data, curls.zeta(s).data), (B.data, curls.xi(s).data)):
            corr = np.cross(sg.dpsi, sg.d(u, 3), axis=0) / sg.J
            worst = max(worst, float(np.abs(_curl_plain(sg, u) - c - corr).max()))
    return worst


def _curl_At(sg, u):
    """``(d_t A^T grad) x u``: only the third row of ``A`` depends on time."""
    d3 = sg.d(u, 3)
    At = sg.A3_t
    g = At[None, :, ...] * d3[:, None, ...]  # g[i, j] = A_t[3, j] d3 u_i
    return np.stack([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]])


def _apply_A(sg, w):
    return np.stack([w[0], w[1], np.einsum("i...,i...->...", sg.A3, w)])


def _commutator(sg, Y, W):
    """``[(A^T grad) x ; Y.grad] W``."""
    return sg.curl_A(sg.advect(Y, W)) - sg.advect(Y, sg.curl_A(W))


def curl_transport_residual(state, tendency):
    """Max over sides of the quadrature L2 norm of the transported-curl equations."""
    g = tendency.geometry
    worst = 0.0
    for i, (s, v, B) in enumerate(((PLUS, state.vp, state.Bp), (MINUS, state.vm, state.Bm))):
        sg = g[s]
        v, B = v.data, B.data
        dv, dB = tendency.dv[i], tendency.dB[i]
        zeta, xi = sg.curl_A(v), sg.curl_A(B)
        zeta_t = _curl_At(sg, v) + sg.curl_A(dv)
        xi_t = _curl_At(sg, B) + sg.curl_A(dB)
        vt = sg.transport_velocity(v)
        Bt = sg.transport_field(B)
        r1 = (
            zeta_t + sg.advect(vt, zeta) - sg.advect(Bt, xi)
            - sg.advect(_apply_A(sg, zeta), v) + sg.advect(_apply_A(sg, xi), B)
        )
        r2 = (
            xi_t + sg.advect(vt, xi) - sg.advect(Bt, zeta)
            + _commutator(sg, _apply_A(sg, v), B) - _commutator(sg, _apply_A(sg, B), v)
        )
        for r in (r1, r2):
            worst = max(worst, float(np.sqrt(np.sum(integrate(r**2, sg.grid)))))
    return worst
