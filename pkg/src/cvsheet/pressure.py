"""Total-pressure problem: sources, compatibility and the transmission solve."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import TRANSMISSION, TwoSlabSolver
from .spectral import MINUS, PLUS, FieldPair, FrontField, GridMismatchError, VolumeField, integrate

COMPAT_TOL = 1e-8
COMPAT_FLOOR = 1e-13


class CompatibilityError(ValueError):
    """Data violate ``sum int J F = int_Gamma G`` beyond tolerance."""


@dataclass(frozen=True, eq=False)
class PressureProblem:
    geometry: object
    Fp: VolumeField
    Fm: VolumeField
    G: FrontField

    def F(self):
        return np.stack([self.Fp.data[0], self.Fm.data[0]])


@dataclass(eq=False)
class PressureSolution:
    Qp: VolumeField
    Qm: VolumeField
    mean: float
    mu: float
    iterations: int
    residuals: dict = field(default_factory=dict)

    @property
    def Q(self):
        return FieldPair(self.Qp, self.Qm)


def _grad_cart(sg, u):
    """``g[i, j] = d_j u_i`` for a vector array ``u``."""
    return np.stack([sg.grad(u[i]) for i in range(u.shape[0])])


def _side_F(sg, v, B):
    vt = sg.transport_velocity(v)
    Bt = sg.transport_field(B)
    Gv = _grad_cart(sg, v)
    GB = _grad_cart(sg, B)
    A3, A3t = sg.A3, sg.A3_t
    out = -np.einsum("i...,i...->...", A3t, Gv[:, 2])
    for w, Gw, sign in ((vt, Gv, 1.0), (Bt, GB, -1.0)):
        Dw = np.stack([sg.grad_A(w[j]) for j in range(3)])  # Dw[j, i] = (A^T grad w_j)_i
        out += sign * np.einsum("ji...,ij...->...", Dw, Gw)
        gradA3 = np.stack([sg.grad(A3[i]) for i in range(3)])  # gradA3[i, j] = d_j A_3i
        wdA = np.einsum("j...,ij...->i...", w, gradA3)
        out -= sign * np.einsum("i...,i...->...", wdA, Gw[:, 2])
    return out


def assemble_F(g, v, B, A_t=None):
    """Interior pressure source on both slabs.

    ``A_t`` may override the time derivative of ``A`` by a pair of
    ``(3, 3, n1, n2, n3)`` arrays; by default it is derived from the
    geometry's ``psi_t``.
    """
    out = []
    for s in (PLUS, MINUS):
        sg = g[s]
        if v[s].grid != sg.grid or B[s].grid != sg.grid:
            raise GridMismatchError("fields and geometry live on different grids")
        if A_t is not None:
            sg = _with_A3t(sg, np.asarray(A_t[0 if s == PLUS else 1])[2])
        out.append(VolumeField.scalar(sg.grid, _side_F(sg, v[s].data, B[s].data)))
    return FieldPair(*out)


class _A3tOverride:
    def __init__(self, base, A3t):
        self._base = base
        self.A3_t = A3t

    def __getattr__(self, name):
        return getattr(self._base, name)


def _with_A3t(sg, A3t):
    return _A3tOverride(sg, A3t)


def _hessian_contract(f, a, b):
    """``sum_ij a_i b_j d_i d_j f`` over the tangential indices."""
    out = np.zeros(f.grid.shape)
    for i in range(2):
        for j in range(2):
            d = f.derivative((i == 0) + (j == 0), (i == 1) + (j == 1)).values
            out += a[i] * b[j] * d
    return out


def assemble_G(state, f_t):
    """Interface jump source ``-[2 v'.grad' f_t + (v'.grad')grad' f.v' - (B'.grad')grad' f.B']``."""
    grad_ft = f_t.gradient_values()
    parts = []
    for v, B in ((state.vplus, state.Bplus), (state.vminus, state.Bminus)):
        term = 2.0 * (v[0] * grad_ft[0] + v[1] * grad_ft[1])
        term += _hessian_contract(state.f, v, v)
        term -= _hessian_contract(state.f, B, B)
        parts.append(term)
    return FrontField.from_values(state.f.grid, -(parts[0] - parts[1]))


def _compat_parts(p):
    num = 0.0
    scale = 0.0
    for s, F in ((PLUS, p.Fp), (MINUS, p.Fm)):
        sg = p.geometry[s]
        num += float(integrate(sg.J * F.data[0], sg.grid))
        scale += float(integrate(np.abs(sg.J * F.data[0]), sg.grid))
    gint = float(np.mean(p.G.values))
    scale += float(np.mean(np.abs(p.G.values)))
    return num - gint, scale


def check_compatibility(p):
    """``sum_+- int J F dx - int_Gamma G dx'`` by quadrature."""
    return _compat_parts(p)[0]


def relative_compatibility(p):
    res, scale = _compat_parts(p)
    if abs(res) <= COMPAT_FLOOR or scale == 0.0:
        return 0.0
    return abs(res) / scale


def pressure_operator(g, Q):
    """Apply the continuous-form operator to nodal ``Q``: returns ``(F, G)``.

    ``F = -(A^T grad).(A^T grad Q)`` on both slabs and
    ``G = [(A^T grad Q).N]`` on the interface.
    """
    solver = TwoSlabSolver(g.grids, g)
    Qa = np.stack([Q.plus.data[0], Q.minus.data[0]])
    fluxes = solver._flux_terms(Qa)
    F = []
    for i, s in enumerate((PLUS, MINUS)):
        F.append(VolumeField.scalar(g[s].grid, -g[s].div_A(fluxes[i])))
    fp, fm = solver.interface_flux(fluxes)
    return FieldPair(*F), FrontField.from_values(g[PLUS].grid.torus, fp - fm)


def solve_pressure(p, tol=1e-12, maxiter=200, x0=None, compat_tol=COMPAT_TOL):
    """Solve the transmission problem for ``Q`` with zero total mean.

    Data whose compatibility residual is below ``10 * compat_tol`` (relative)
    are projected onto the compatible subspace: the bordering constant ``mu``
    of the solver absorbs the (discrete) defect and is reported.  Larger
    violations raise :class:`CompatibilityError`.
    """
    g = p.geometry
    res, scale = _compat_parts(p)
    rel = 0.0 if (abs(res) <= COMPAT_FLOOR or scale == 0.0) else abs(res) / scale
    if rel > 10.0 * compat_tol:
        raise CompatibilityError(
            f"sum int J F - int G = {res:.3e} (relative {rel:.2e}); "
            "the data are not compatible with the Neumann/jump conditions"
        )
    F = p.F()
    solver = TwoSlabSolver(g.grids, g, TRANSMISSION)
    if x0 is not None:
        x0 = np.stack([x0.plus.data[0], x0.minus.data[0]])
    out = solver.solve(F, G=p.G.values, x0=x0, tol=tol, maxiter=maxiter)
    Q = out.Q
    gp, gm = g.grids
    Qp, Qm = VolumeField.scalar(gp, Q[0]), VolumeField.scalar(gm, Q[1])
    mean = float(integrate(Q[0], gp) + integrate(Q[1], gm))
    sol = PressureSolution(Qp, Qm, mean, float(out.mu[0]), out.iterations)
    sol.residuals = solution_residuals(p, sol, F_used=F - sol.mu)
    sol.residuals["compatibility"] = res
    sol.residuals["compatibility_relative"] = rel
    return sol


def solution_residuals(p, sol, F_used=None):
    """Residuals of every condition of the transmission problem."""
    g = p.geometry
    Q = FieldPair(sol.Qp, sol.Qm)
    Fop, Gop = pressure_operator(g, Q)
    F = p.F() if F_used is None else F_used
    interior = 0.0
    for i, s in enumerate((PLUS, MINUS)):
        r = Fop[s].data[0] - F[i]
        w = g[s].grid.weights3[1:-1]
        interior += float(np.sum(np.mean(r[:, :, 1:-1] ** 2, axis=(0, 1)) * w))
    wall = max(
        float(np.abs(np.einsum("j,...j->...", h.grid.D3[-1], h.data[0])).max()) for h in Q
    )
    return {
        "interface_jump": float(np.abs(sol.Qp.data[0, :, :, 0] - sol.Qm.data[0, :, :, 0]).max()),
        "wall_neumann": wall,
        "interior_l2": float(np.sqrt(interior)),
        "flux_jump": float(np.abs(Gop.values - p.G.values).max()),
        "mean": sol.mean,
    }


def coercivity_ratio(g, Q):
    """Observed ``sum int |A^T grad Q|^2 / sum int |grad Q|^2`` and its pointwise floor.

    The floor is the smallest squared singular value of ``A`` on the grid, a
    lower bound for the ratio.
    """
    num = den = 0.0
    floor = np.inf
    for s in (PLUS, MINUS):
        sg = g[s]
        q = Q[s].data[0]
        grad = sg.grad(q)
        ga = sg.grad_A_from(grad)
        num += float(integrate(np.sum(ga**2, axis=0), sg.grid))
        den += float(integrate(np.sum(grad**2, axis=0), sg.grid))
        A = np.moveaxis(sg.A, (0, 1), (-2, -1)).reshape(-1, 3, 3)
        floor = min(floor, float(np.linalg.svd(A, compute_uv=False)[:, -1].min() ** 2))
    return (num / den if den > 0 else np.inf), floor
