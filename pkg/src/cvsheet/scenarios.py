"""Preset initial states.

Perturbed scenarios start from a planar sheet between constant tangential
states ``(U+-, H+-)`` plus one linear surface-wave eigenmode of amplitude
``eps`` (front ``eps cos(eta.x')``), made exactly compatible with the
interface and wall constraints and then divergence projected.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import NEUMANN, TwoSlabSolver
from .evolution import (
    PlasmaState,
    complete_state,
    front_geometry,
    interface_state,
    normal_velocity,
    project_divergence,
)
from .lifting import DEFAULT_CUTOFF
from .spectral import MINUS, PLUS, FrontField, VolumeField, gradient, half_grids
from .stability import StabilityConfig, planar_normal_modes, theorem_hypotheses

SCENARIOS = (
    "current-sheet",
    "vortex-sheet-stable",
    "vortex-sheet-boundary",
    "kelvin-helmholtz-unstable",
    "manufactured",
)

_BACKGROUNDS = {
    "current-sheet": dict(u_plus=(0, 0, 0), u_minus=(0, 0, 0), B_plus=(1, 0, 0), B_minus=(0, 1, 0)),
    "vortex-sheet-stable": dict(
        u_plus=(0.15, 0.05, 0), u_minus=(-0.15, -0.05, 0), B_plus=(1, 0, 0), B_minus=(0, 1, 0)
    ),
    "vortex-sheet-boundary": dict(
        u_plus=(0.5, 0.5, 0), u_minus=(-0.5, -0.5, 0), B_plus=(1, 0, 0), B_minus=(0, 1, 0)
    ),
    "kelvin-helmholtz-unstable": dict(
        u_plus=(0.5, 0, 0), u_minus=(-0.5, 0, 0), B_plus=(0, 0, 0), B_minus=(0, 0, 0)
    ),
}

_STABLE = ("current-sheet", "vortex-sheet-stable")


class ScenarioError(ValueError):
    """Unknown scenario or parameters outside their documented range."""


class HypothesisError(RuntimeError):
    """A scenario that promises stability fails the theorem hypotheses."""


@dataclass
class ScenarioParams:
    """Parameters shared by the planar scenarios.

    ``mode`` is the integer wave vector ``(k1, k2)`` of the perturbation,
    ``root`` selects the dispersion root (0 or 1; for complex pairs 0 is the
    growing one).  Background overrides default to the preset values.
    """

    eps: float = 1e-4
    mode: tuple = (1, 0)
    root: int = 0
    u_plus: tuple = None
    u_minus: tuple = None
    B_plus: tuple = None
    B_minus: tuple = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {k: d.pop(k) for k in list(d) if k in cls.__dataclass_fields__ and k != "extra"}
        if "mode" in known:
            known["mode"] = tuple(int(m) for m in known["mode"])
        return cls(**known, extra=d)


def _vec(w):
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise ScenarioError("background vectors need three components")
    if w[2] != 0.0:
        raise ScenarioError("background states must be tangential (third component 0)")
    return w


def _resolve(name, params):
    base = _BACKGROUNDS[name]
    out = {}
    for key in ("u_plus", "u_minus", "B_plus", "B_minus"):
        val = getattr(params, key)
        out[key] = _vec(base[key] if val is None else val)
    return out


def _ordered_roots(modes):
    r = list(modes.tau_roots)
    # growing root (most negative imaginary part) first, then by real part
    return sorted(r, key=lambda t: (round(t.imag, 14), -t.real))


def eigenmode_fields(grids, bg, eps, mode, root=0):
    """Linear surface-wave eigenmode on the flat two-slab domain.

    Returns ``(f, fields)`` where ``fields[side] = (v, B)`` nodal arrays of the
    Eulerian perturbation added to the background, and the chosen ``tau``.
    Perturbations are gradients of harmonic potentials
    ``c cosh(|eta| (1 - |x3|)) e^{i eta.x'}`` matched to the kinematic and
    magnetic interface conditions.
    """
    gp, gm = grids
    torus = gp.torus
    k = np.asarray(mode, dtype=float)
    eta = 2.0 * np.pi * k
    ne = float(np.hypot(*eta))
    if ne == 0.0:
        raise ScenarioError("perturbation wave vector must be nonzero")
    nm = planar_normal_modes(bg["u_plus"], bg["u_minus"], bg["B_plus"], bg["B_minus"], eta)
    tau = _ordered_roots(nm)[root]
    x1, x2 = torus.x
    phase = np.exp(1j * (eta[0] * x1 + eta[1] * x2))
    f = FrontField.from_values(torus, np.real(eps * phase))
    fields = {}
    for s, g, U, H in ((PLUS, gp, bg["u_plus"], bg["B_plus"]), (MINUS, gm, bg["u_minus"], bg["B_minus"])):
        omega = tau + eta @ U[:2]
        a = eta @ H[:2]
        x3 = g.x3
        prof = np.cosh(ne * (1.0 - np.abs(x3)))
        dprof = -s * ne * np.sinh(ne * (1.0 - np.abs(x3)))
        denom = -s * ne * np.sinh(ne)
        out = []
        for value in (1j * omega * eps, 1j * a * eps):
            c = value / denom
            comp = [
                1j * eta[0] * c * phase[:, :, None] * prof,
                1j * eta[1] * c * phase[:, :, None] * prof,
                c * phase[:, :, None] * dprof,
            ]
            out.append(np.real(np.stack(comp)))
        v = out[0] + U[:, None, None, None]
        B = out[1] + H[:, None, None, None]
        fields[s] = (v, B)
    return f, fields, complex(tau)


def make_consistent(grids, f, fields, chi=DEFAULT_CUTOFF):
    """Adjust fields so that the fixed-domain constraints hold on the grid.

    With ``W = J A u`` (so ``W3 = u.N``) each side is corrected by a flat
    Neumann solve to be divergence free with ``W3 = 0`` at the walls, ``B.N = 0``
    and a common ``v.N`` on the interface; then ``u`` is recovered from ``W``.
    """
    g = front_geometry(f, None, grids, chi)
    solver = TwoSlabSolver(grids, None, NEUMANN)
    vn = normal_velocity(g, (fields[PLUS][0], fields[MINUS][0]))
    common = 0.5 * (vn[0] + vn[1])
    common = common - common.mean()
    out = {PLUS: [None, None], MINUS: [None, None]}
    for which in (0, 1):
        W = {}
        for s in (PLUS, MINUS):
            sg = g[s]
            u = fields[s][which]
            W[s] = np.stack([sg.J * u[0], sg.J * u[1], np.einsum("i...,i...->...", sg.N, u)])
        target = common if which == 0 else np.zeros_like(common)
        F = np.stack([
            -_div_flat(W[PLUS], grids[0]),
            -_div_flat(W[MINUS], grids[1]),
        ])
        interface = (W[PLUS][2, :, :, 0] - target, W[MINUS][2, :, :, 0] - target)
        wall = (W[PLUS][2, :, :, -1], W[MINUS][2, :, :, -1])
        res = solver.solve(F, wall=wall, interface=interface)
        for i, s in enumerate((PLUS, MINUS)):
            grid = grids[i]
            Wc = W[s] - gradient(res.Q[i], grid)
            sg = g[s]
            u1 = Wc[0] / sg.J
            u2 = Wc[1] / sg.J
            u3 = Wc[2] + sg.dpsi[0] * u1 + sg.dpsi[1] * u2
            out[s][which] = np.stack([u1, u2, u3])
    return out


def _div_flat(W, grid):
    g = gradient(W[0], grid)[0]
    return g + gradient(W[1], grid)[1] + gradient(W[2], grid)[2]


def planar_state(grids, bg, eps=0.0, mode=(1, 0), root=0, chi=DEFAULT_CUTOFF, project=True):
    """Background plus an ``eps`` eigenmode, consistent, projected and completed."""
    gp, gm = grids
    f, fields, tau = eigenmode_fields(grids, bg, eps, mode, root)
    if eps != 0.0:
        fixed = make_consistent(grids, f, fields, chi)
    else:
        fixed = {s: list(fields[s]) for s in (PLUS, MINUS)}
    state = PlasmaState(
        VolumeField(gp, fixed[PLUS][0]), VolumeField(gm, fixed[MINUS][0]),
        VolumeField(gp, fixed[PLUS][1]), VolumeField(gm, fixed[MINUS][1]),
        VolumeField.zeros(gp), VolumeField.zeros(gm),
        f, FrontField.zeros(gp.torus),
    )
    if project and eps != 0.0:
        state = project_divergence(state, chi)
    return complete_state(state, chi), tau


def manufactured_state(grids, chi=DEFAULT_CUTOFF):
    """Flat front, ``v = (sin 2 pi x2, sin 2 pi x1, 0)`` on both sides and ``B = 0``.

    Its pressure is ``Q = cos(2 pi x1) cos(2 pi x2)`` in closed form.
    """
    gp, gm = grids
    vel = lambda x1, x2, x3: (np.sin(2 * np.pi * x2), np.sin(2 * np.pi * x1), 0.0 * x3)
    state = PlasmaState(
        VolumeField.from_function(gp, vel), VolumeField.from_function(gm, vel),
        VolumeField.zeros(gp, 3), VolumeField.zeros(gm, 3),
        VolumeField.zeros(gp), VolumeField.zeros(gm),
        FrontField.zeros(gp.torus), FrontField.zeros(gp.torus),
    )
    return complete_state(state, chi)


def manufactured_pressure(grid):
    x1, x2, _ = grid.coords
    return np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * x2)


@dataclass
class ScenarioInfo:
    name: str
    background: dict
    tau: complex = None
    hypotheses: object = None


def scenario(name, params=None, n=(32, 32, 17), chi=DEFAULT_CUTOFF, cfg=None, check=True):
    """Build the initial :class:`PlasmaState` of a named scenario.

    Returns ``(state, info)``.  Scenarios that promise stability raise
    :class:`HypothesisError` when the theorem hypotheses fail on the initial
    interface, unless ``check`` is false.
    """
    if name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {name!r}; choose one of {', '.join(SCENARIOS)}")
    if isinstance(params, dict) or params is None:
        params = ScenarioParams.from_dict(params)
    cfg = cfg or StabilityConfig()
    grids = half_grids(*n)
    if name == "manufactured":
        return manufactured_state(grids, chi), ScenarioInfo(name, {})
    if not 0.0 <= params.eps <= 0.05:
        raise ScenarioError("eps must lie in [0, 0.05]")
    if params.root not in (0, 1):
        raise ScenarioError("root must be 0 or 1")
    bg = _resolve(name, params)
    state, tau = planar_state(grids, bg, params.eps, params.mode, params.root, chi)
    hyp = theorem_hypotheses(interface_state(state), cfg)
    if check and name in _STABLE and not hyp.ok:
        raise HypothesisError(
            f"scenario {name!r} fails the stability hypotheses at x' = {hyp.worst_x}: {hyp.margins}"
        )
    return state, ScenarioInfo(name, {k: v.tolist() for k, v in bg.items()}, tau, hyp)
