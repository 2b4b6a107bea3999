"""Stability predicates, the lambda multipliers and planar normal modes.

Planar surface waves ``exp(i tau t + i eta.x')`` on a flat sheet between two
constant tangential states satisfy (see ``docs/dispersion.md``)::

    (tau + eta.U+)^2 + (tau + eta.U-)^2 = (eta.H+)^2 + (eta.H-)^2

on both the unbounded and the symmetric finite-depth domain.  Its roots are
real for every ``eta`` exactly when ``eta^T M eta >= 0`` on the unit circle,
``M = 2 H+ H+^T + 2 H- H-^T - [u][u]^T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .spectral import FrontField

N_ANGLES = 256
ROUNDING = 64 * np.finfo(float).eps


class DegenerateFieldError(ValueError):
    """``B+`` and ``B-`` are (nearly) colinear where a Cramer solve is needed."""


@dataclass(frozen=True)
class StabilityConfig:
    delta0: float = 0.5
    eps0: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.delta0 <= 0.5:
            raise ValueError("delta0 must lie in (0, 1/2]")
        if not self.eps0 > 0.0:
            raise ValueError("eps0 must be positive")


@dataclass(eq=False)
class InterfaceState:
    """Traces on the interface: ``(3, n1, n2)`` arrays and the front."""

    vplus: np.ndarray
    vminus: np.ndarray
    Bplus: np.ndarray
    Bminus: np.ndarray
    f: FrontField

    def __post_init__(self):
        shape = (3,) + self.f.grid.shape
        for name in ("vplus", "vminus", "Bplus", "Bminus"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    @property
    def dv(self):
        return self.vplus - self.vminus

    @classmethod
    def uniform(cls, grid, vp, vm, Bp, Bm, f=None):
        """Constant traces on ``grid``; ``f`` defaults to the flat front."""
        tile = lambda w: np.broadcast_to(np.asarray(w, float)[:, None, None], (3,) + grid.shape).copy()
        f = FrontField.zeros(grid) if f is None else f
        return cls(tile(vp), tile(vm), tile(Bp), tile(Bm), f)


# ---------------------------------------------------------------- predicates


@dataclass(frozen=True)
class Predicates:
    weak: bool
    spectral: bool
    strong: bool
    margins: tuple  # (weak, spectral, strong)


def _norm_cross(a, b):
    return np.linalg.norm(np.cross(a, b, axis=0), axis=0)


def syrovatskii_predicates(Bp, Bm, du):
    """The three nested stability conditions for a planar sheet.

    * weak: ``|[u]|^2 <= 2(|B+|^2 + |B-|^2)`` and
      ``|B+ x [u]|^2 + |B- x [u]|^2 <= 2 |B+ x B-|^2``;
    * spectral: strict version of the second inequality;
    * strong: ``max(|B+ x [u]|, |B- x [u]|) < |B+ x B-|``.
    """
    Bp, Bm, du = (np.asarray(w, dtype=float) for w in (Bp, Bm, du))
    cpm = _norm_cross(Bp, Bm)
    cp = _norm_cross(Bp, du)
    cm = _norm_cross(Bm, du)
    slack_a = 2.0 * (Bp @ Bp + Bm @ Bm) - du @ du
    slack_b = 2.0 * cpm**2 - cp**2 - cm**2
    strong = cpm - max(cp, cm)
    return Predicates(
        weak=bool(slack_a >= 0.0 and slack_b >= 0.0),
        spectral=bool(slack_b > 0.0),
        strong=bool(strong > 0.0),
        margins=(float(min(slack_a, slack_b)), float(slack_b), float(strong)),
    )


# ---------------------------------------------------------------- hypotheses


@dataclass(frozen=True)
class HypothesisReport:
    ok: bool
    worst_point: tuple  # grid index (i1, i2)
    worst_x: tuple  # coordinates (x1, x2)
    margins: dict = field(default_factory=dict)


def theorem_hypotheses(state, cfg, uniform=False):
    """Pointwise check of ``|B+ x B-| >= d`` and
    ``max(|B+ x [v]|, |B- x [v]|) <= (1 - d) |B+ x B-|`` on the grid.

    ``d = delta0``, or ``delta0 / 2`` for the version required along the
    evolution (``uniform=True``).
    """
    d = cfg.delta0 / 2.0 if uniform else cfg.delta0
    cpm = _norm_cross(state.Bplus, state.Bminus)
    dv = state.dv
    cmax = np.maximum(_norm_cross(state.Bplus, dv), _norm_cross(state.Bminus, dv))
    m_cross = cpm - d
    m_ratio = (1.0 - d) * cpm - cmax
    combined = np.minimum(m_cross, m_ratio)
    idx = np.unravel_index(int(np.argmin(combined)), combined.shape)
    grid = state.f.grid
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cpm > 0, cmax / cpm, np.inf)
    margins = {
        "cross_min": float(cpm.min()),
        "cross_margin": float(m_cross.min()),
        "ratio_max": float(ratio.max()),
        "ratio_margin": float(m_ratio.min()),
        "threshold": d,
    }
    return HypothesisReport(
        ok=bool(combined.min() >= 0.0),
        worst_point=tuple(int(i) for i in idx),
        worst_x=(float(grid.x[0][idx]), float(grid.x[1][idx])),
        margins=margins,
    )


# ---------------------------------------------------------------- lambda


def _grad_norm_factor(f):
    g1, g2 = f.gradient_values()
    return np.sqrt(1.0 + g1**2 + g2**2)


def solve_lambda(state, cfg):
    """Multipliers with ``[v'] = lam+ B+' - lam- B-'`` pointwise on the interface.

    Raises :class:`DegenerateFieldError` where the Cramer determinant falls
    below the floor ``(delta0 / 2) / sqrt(1 + |grad' f|^2)`` implied by the
    uniform cross-product bound.
    """
    Bp, Bm, dv = state.Bplus, state.Bminus, state.dv
    det = Bp[0] * Bm[1] - Bp[1] * Bm[0]
    floor = 0.5 * cfg.delta0 / _grad_norm_factor(state.f)
    bad = np.abs(det) < floor
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise DegenerateFieldError(
            f"|B1+ B2- - B2+ B1-| = {abs(det[idx]):.3e} below floor {floor[idx]:.3e} at grid point {idx}"
        )
    lp = -(Bm[0] * dv[1] - Bm[1] * dv[0]) / det
    lm = -(Bp[0] * dv[1] - Bp[1] * dv[0]) / det
    grid = state.f.grid
    return FrontField.from_values(grid, lp), FrontField.from_values(grid, lm)


def lambda_residual(state, lp, lm):
    """Max over the grid and both tangential components of ``|[v'] - lam+ B+' + lam- B-'|``."""
    a, b = lp.values, lm.values
    r = state.dv[:2] - a * state.Bplus[:2] + b * state.Bminus[:2]
    return float(np.abs(r).max())


def front_gradient_from_B(state, floor=1e-12):
    """Recover ``grad' f`` from ``B1 d1 f + B2 d2 f = B3`` on both sides.

    Returns ``((g1, g2), residual)`` with the residual measured against the
    spectral gradient of the stored front.
    """
    Bp, Bm = state.Bplus, state.Bminus
    det = Bp[0] * Bm[1] - Bp[1] * Bm[0]
    scale = max(float(np.abs(Bp).max() * np.abs(Bm).max()), 1e-300)
    if (np.abs(det) < floor * scale).any() or not np.isfinite(det).all():
        raise DegenerateFieldError("B+ and B- are colinear at some interface point")
    g1 = (Bp[2] * Bm[1] - Bp[1] * Bm[2]) / det
    g2 = (Bp[0] * Bm[2] - Bp[2] * Bm[0]) / det
    s1, s2 = state.f.gradient_values()
    grid = state.f.grid
    residual = float(max(np.abs(g1 - s1).max(), np.abs(g2 - s2).max()))
    return (FrontField.from_values(grid, g1), FrontField.from_values(grid, g2)), residual


# ---------------------------------------------------------------- normal modes


@dataclass(frozen=True)
class NormalModes:
    tau_roots: tuple
    growth_rate: float
    discriminant: float  # 2((eta.H+)^2 + (eta.H-)^2) - (eta.[u])^2


def _dispersion(up, um, Hp, Hm, eta):
    eta = np.asarray(eta, dtype=float)[:2]
    p = float(eta @ np.asarray(up, float)[:2])
    m = float(eta @ np.asarray(um, float)[:2])
    a2 = float(eta @ np.asarray(Hp, float)[:2]) ** 2 + float(eta @ np.asarray(Hm, float)[:2]) ** 2
    return p, m, a2


def planar_normal_modes(up, um, Hp, Hm, eta):
    """Roots ``tau`` of the planar dispersion relation for wave vector ``eta``.

    ``growth_rate`` is ``max(-Im tau)``: the exponential rate of the mode
    ``exp(i tau t)``.
    """
    eta = np.asarray(eta, dtype=float)
    if not np.any(eta[:2]):
        raise ValueError("eta must be nonzero")
    p, m, a2 = _dispersion(up, um, Hp, Hm, eta)
    disc = 2.0 * a2 - (p - m) ** 2
    root = np.sqrt(complex(disc))
    roots = ((-(p + m) + root) / 2.0, (-(p + m) - root) / 2.0)
    growth = max(0.0, max(-r.imag for r in roots))
    return NormalModes(roots, float(growth), float(disc))


def mode_discriminant(up, um, Hp, Hm, theta):
    eta = np.array([np.cos(theta), np.sin(theta)])
    p, m, a2 = _dispersion(up, um, Hp, Hm, eta)
    return 2.0 * a2 - (p - m) ** 2


@dataclass(frozen=True)
class EtaSweep:
    theta: np.ndarray
    discriminant: np.ndarray
    growth_rate: np.ndarray
    min_discriminant: float  # after local refinement
    argmin_theta: float

    @property
    def all_real(self):
        # the boundary D = 0 counts as real; allow rounding of the sampled values
        scale = float(np.abs(self.discriminant).max())
        return bool(self.min_discriminant >= -ROUNDING * scale)

    def rows(self):
        for t, d, g in zip(self.theta, self.discriminant, self.growth_rate):
            yield {"theta": float(t), "eta1": float(np.cos(t)), "eta2": float(np.sin(t)),
                   "discriminant": float(d), "growth_rate": float(g)}


def eta_sweep(up, um, Hp, Hm, n=N_ANGLES, refine=True):
    """Discriminant and growth rate on ``n`` unit wave vectors.

    The dispersion is homogeneous in ``eta``, so the unit circle suffices.
    The sampled minimum is refined by a bounded scalar search between its
    neighbours so that narrow unstable cones are not missed.
    """
    theta = 2.0 * np.pi * np.arange(n) / n
    disc = np.array([mode_discriminant(up, um, Hp, Hm, t) for t in theta])
    growth = np.where(disc < 0.0, np.sqrt(np.maximum(-disc, 0.0)) / 2.0, 0.0)
    j = int(np.argmin(disc))
    best, arg = float(disc[j]), float(theta[j])
    if refine:
        h = 2.0 * np.pi / n
        res = minimize_scalar(
            lambda t: mode_discriminant(up, um, Hp, Hm, t),
            bounds=(theta[j] - h, theta[j] + h), method="bounded",
            options={"xatol": 1e-12},
        )
        if res.fun < best:
            best, arg = float(res.fun), float(res.x)
    return EtaSweep(theta, disc, growth, best, arg)


def min_discriminant_exact(up, um, Hp, Hm):
    """Closed-form minimum of the discriminant on the unit circle: ``lambda_min(M)``."""
    hp, hm = np.asarray(Hp, float)[:2], np.asarray(Hm, float)[:2]
    du = np.asarray(up, float)[:2] - np.asarray(um, float)[:2]
    M = 2.0 * np.outer(hp, hp) + 2.0 * np.outer(hm, hm) - np.outer(du, du)
    return float(np.linalg.eigvalsh(M)[0])
