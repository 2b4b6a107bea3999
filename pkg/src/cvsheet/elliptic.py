"""Two-slab collocation solver for ``-(A^T grad).(A^T grad Q) = F``.

Unknowns are nodal values on both half-slabs, stacked as ``(2, n1, n2, n3)``
(index 0 the plus side).  Rows follow the nodes:

* interior nodes carry the PDE (plus a constant ``mu`` that borders the
  constant null space),
* wall nodes carry the Neumann condition ``d3 Q = h``,
* the two interface rows carry ``[Q] = 0`` (plus side) and the flux jump
  ``[(A^T grad Q).N] = G`` (minus side).

The zero-total-mean condition closes the system.  The flat operator
(``psi = 0``) decouples into per-mode ``2 n3`` blocks that are inverted once
and used as the preconditioner for GMRES on the curved operator.  Nyquist
modes are pinned to zero because spectral differentiation drops them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .spectral import MINUS, PLUS, dx, gradient

TRANSMISSION = "transmission"
NEUMANN = "neumann"
ATOL = 1e-14
RESTART = 40
# a restart cycle must shrink the true residual by this factor to continue
STAGNATION = 0.5


class SolverError(RuntimeError):
    """The iterative solve did not reach its tolerance."""


def _nyquist_mask(torus):
    k1, k2 = torus.k_half
    return (np.abs(k1) == torus.n1 // 2) | (np.abs(k2) == torus.n2 // 2)


def _mode_kappa2(torus):
    m1, m2 = torus.dx_multipliers
    return np.real(-(m1**2) - m2**2)


def _block(kappa2, Dp, Dm, mode):
    n3 = Dp.shape[0]
    M = np.zeros((2 * n3, 2 * n3))
    for s, D in ((0, Dp), (1, Dm)):
        off = s * n3
        D2 = D @ D
        M[off + 1 : off + n3 - 1, off : off + n3] = -D2[1:-1]
        M[off + np.arange(1, n3 - 1), off + np.arange(1, n3 - 1)] += kappa2
        M[off + n3 - 1, off : off + n3] = D[-1]
    if mode == TRANSMISSION:
        M[0, 0], M[0, n3] = 1.0, -1.0
        M[n3, 0:n3] = Dp[0]
        M[n3, n3:] = -Dm[0]
    else:
        M[0, 0:n3] = Dp[0]
        M[n3, n3:] = Dm[0]
    return M


@lru_cache(maxsize=8)
def flat_blocks(gp, gm, mode=TRANSMISSION):
    """Inverse flat blocks per rfft mode, plus the bordered mean-mode inverse."""
    torus = gp.torus
    n3 = gp.n3
    kappa2 = _mode_kappa2(torus)
    nyq = _nyquist_mask(torus)
    inv = np.empty(kappa2.shape + (2 * n3, 2 * n3))
    for idx in np.ndindex(kappa2.shape):
        if nyq[idx] or idx == (0, 0):
            inv[idx] = np.eye(2 * n3)
            continue
        inv[idx] = np.linalg.inv(_block(kappa2[idx], gp.D3, gm.D3, mode))
    # mean mode: bordered with one (transmission) or two (neumann) multipliers
    M0 = _block(0.0, gp.D3, gm.D3, mode)
    w = gp.weights3
    interior = np.zeros((2, 2 * n3))
    interior[0, 1 : n3 - 1] = 1.0
    interior[1, n3 + 1 : 2 * n3 - 1] = 1.0
    if mode == TRANSMISSION:
        B = (interior[0] + interior[1])[:, None]
        C = np.concatenate([w, w])[None, :]
    else:
        B = interior.T
        C = np.zeros((2, 2 * n3))
        C[0, :n3] = w
        C[1, n3:] = w
    nb = B.shape[1]
    big = np.zeros((2 * n3 + nb, 2 * n3 + nb))
    big[: 2 * n3, : 2 * n3] = M0
    big[: 2 * n3, 2 * n3 :] = B
    big[2 * n3 :, : 2 * n3] = C
    return inv, np.linalg.inv(big), nyq


def _fwd(x):
    return np.fft.rfft2(x, axes=(-3, -2), norm="forward")


def _bwd(X, torus):
    return np.fft.irfft2(X, s=torus.shape, axes=(-3, -2), norm="forward")


@dataclass
class EllipticResult:
    Q: np.ndarray  # (2, n1, n2, n3)
    mu: np.ndarray
    iterations: int
    residual: float


class TwoSlabSolver:
    """Elliptic transmission solver on the pair of half-slabs.

    ``geometry`` is a :class:`~cvsheet.geometry.GeometryBundle` or ``None``
    for the flat operator.  ``mode`` selects the interface rows:
    ``"transmission"`` (continuity and flux jump) or ``"neumann"`` (one flux
    per side, flat operator only).
    """

    def __init__(self, grids, geometry=None, mode=TRANSMISSION):
        self.gp, self.gm = grids
        self.geometry = geometry
        self.mode = mode
        if mode == NEUMANN and geometry is not None:
            raise ValueError("per-side Neumann rows are implemented for the flat operator only")
        self.torus = self.gp.torus
        self.n3 = self.gp.n3
        self.shape = (2,) + self.gp.shape
        self.inv, self.inv0, self.nyq = flat_blocks(self.gp, self.gm, mode)
        self.nmu = 1 if mode == TRANSMISSION else 2

    # ------------------------------------------------------------ operator

    def _flux_terms(self, Q):
        """``A^T grad Q`` on both sides (flat when no geometry)."""
        out = []
        for i, s in enumerate((PLUS, MINUS)):
            if self.geometry is None:
                g = self.gp if s == PLUS else self.gm
                out.append(gradient(Q[i], g))
            else:
                out.append(self.geometry[s].grad_A(Q[i]))
        return out

    def residual_rows(self, Q, mu):
        """Row values of the bordered operator applied to ``(Q, mu)``."""
        R = np.empty(self.shape)
        fluxes = self._flux_terms(Q)
        grids = (self.gp, self.gm)
        for i, s in enumerate((PLUS, MINUS)):
            g = grids[i]
            flux = fluxes[i]
            if self.geometry is None:
                lap = dx(flux[0], g, 1) + dx(flux[1], g, 2) + dx(flux[2], g, 3)
            else:
                lap = self.geometry[s].div_A(flux)
            m = mu[0] if self.nmu == 1 else mu[i]
            R[i, :, :, 1:-1] = -lap[:, :, 1:-1] + m
            R[i, :, :, -1] = np.einsum("j,...j->...", g.D3[-1], Q[i])
        fp, fm = self.interface_flux(fluxes)
        if self.mode == TRANSMISSION:
            R[0, :, :, 0] = Q[0, :, :, 0] - Q[1, :, :, 0]
            R[1, :, :, 0] = fp - fm
        else:
            R[0, :, :, 0] = fp
            R[1, :, :, 0] = fm
        return R

    def interface_flux(self, fluxes):
        """``(A^T grad Q).N`` at the interface node, both sides."""
        out = []
        for i, s in enumerate((PLUS, MINUS)):
            f = fluxes[i][:, :, :, 0]
            if self.geometry is None:
                out.append(f[2])
            else:
                N = self.geometry[s].N[:, :, :, 0]
                out.append(np.einsum("i...,i...->...", f, N))
        return out

    def mean_rows(self, Q):
        w = self.gp.weights3
        means = np.tensordot(np.mean(Q, axis=(1, 2)), w, axes=([-1], [0]))
        return np.array([means.sum()]) if self.nmu == 1 else means

    def _apply(self, x):
        Q = x[: -self.nmu].reshape(self.shape)
        mu = x[-self.nmu :]
        R = self.residual_rows(Q, mu)
        Rh = _fwd(R)
        Qh = _fwd(Q)
        Rh[:, self.nyq] = Qh[:, self.nyq]
        R = _bwd(Rh, self.torus)
        return np.concatenate([R.ravel(), self.mean_rows(Q)])

    def _precondition(self, y):
        R = y[: -self.nmu].reshape(self.shape)
        extra = y[-self.nmu :]
        Rh = _fwd(R)  # (2, n1, n2h, n3)
        vec = np.concatenate([Rh[0], Rh[1]], axis=-1)  # (n1, n2h, 2 n3)
        out = np.einsum("abij,abj->abi", self.inv, vec)
        v0 = np.concatenate([vec[0, 0], extra.astype(complex)])
        s0 = self.inv0 @ v0
        out[0, 0] = s0[: 2 * self.n3]
        mu = np.real(s0[2 * self.n3 :])
        Qh = np.stack([out[..., : self.n3], out[..., self.n3 :]])
        Q = _bwd(Qh, self.torus)
        return np.concatenate([Q.ravel(), mu])

    # ------------------------------------------------------------ solve

    def rhs(self, F, G=None, wall=None, interface=None):
        """Assemble the row vector for sources.

        ``F`` has shape ``(2, n1, n2, n3)``; ``G`` is the interface jump data
        (transmission) and ``interface`` a pair of per-side fluxes (neumann);
        ``wall`` is an optional pair of wall fluxes.
        """
        b = np.zeros(self.shape)
        b[:, :, :, 1:-1] = F[:, :, :, 1:-1]
        if wall is not None:
            b[0, :, :, -1], b[1, :, :, -1] = wall
        if self.mode == TRANSMISSION:
            if G is not None:
                b[1, :, :, 0] = G
        elif interface is not None:
            b[0, :, :, 0], b[1, :, :, 0] = interface
        bh = _fwd(b)
        bh[:, self.nyq] = 0.0
        return np.concatenate([_bwd(bh, self.torus).ravel(), np.zeros(self.nmu)])

    def solve(self, F, G=None, wall=None, interface=None, x0=None, tol=1e-12, maxiter=200):
        b = self.rhs(F, G, wall, interface)
        if self.geometry is None:
            x = self._precondition(b)
            its = 0
        else:
            n = b.size
            A = spla.LinearOperator((n, n), matvec=self._apply, dtype=float)
            M = spla.LinearOperator((n, n), matvec=self._precondition, dtype=float)
            guess = None
            if x0 is not None:
                guess = np.concatenate([np.asarray(x0).ravel(), np.zeros(self.nmu)])
            count = [0]

            def cb(_):
                count[0] += 1

            bnorm = np.linalg.norm(b)
            # one restart cycle per call, so that a stagnating true residual
            # (the rounding floor of the collocation operator) ends the solve
            x, prev = guess, np.inf
            for _ in range(maxiter):
                x, info = spla.gmres(
                    A, b, x0=x, M=M, rtol=tol, atol=ATOL,
                    restart=RESTART, maxiter=1, callback=cb, callback_type="pr_norm",
                )
                if info == 0:
                    break
                res = np.linalg.norm(self._apply(x) - b)
                if res > STAGNATION * prev:
                    break
                prev = res
            its = count[0]
            if info != 0:
                res = np.linalg.norm(self._apply(x) - b)
                if res > 100.0 * max(tol * bnorm, ATOL):
                    raise SolverError(
                        f"GMRES stopped after {its} iterations, residual {res:.2e} (|b| = {bnorm:.2e})"
                    )
        res = np.linalg.norm(self._apply(x) - b)
        Q = x[: -self.nmu].reshape(self.shape)
        return EllipticResult(Q, x[-self.nmu :], its, float(res))
