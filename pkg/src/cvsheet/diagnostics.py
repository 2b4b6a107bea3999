"""Energy functionals, monitored residuals and machine-readable reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .evolution import (
    curl_fields,
    curl_identity_residual,
    curl_transport_residual,
    divergence_residuals,
    front_geometry,
    interface_state,
    normal_velocity,
)
from .lifting import DEFAULT_CUTOFF
from .pressure import PressureProblem, assemble_F, assemble_G, check_compatibility
from .spectral import (
    MINUS,
    PLUS,
    FrontField,
    dxh,
    integrate,
    multi_indices,
    sobolev_norm_torus,
    sobolev_norm_volume,
    sobolev_norm_volume_sq,
    torus_norm_sq,
)
from .stability import (
    DegenerateFieldError,
    StabilityConfig,
    solve_lambda,
    theorem_hypotheses,
)

SCHEMA_VERSION = 1


class LambdaBoundError(ValueError):
    """``max |lambda+-| >= 1``: the quadratic form of ``H`` is not positive."""


# ---------------------------------------------------------------- functionals


def _pair_norm(pair, m):
    return sobolev_norm_volume(pair.plus, m) + sobolev_norm_volume(pair.minus, m)


def functional_E(state, m=3):
    """``(|v|_m + |B|_m)^2 + |Q|_m^2 + |f|^2_{m+1/2} + |f_t|^2_{m-1/2}``.

    Volume norms of a pair are the sums of the two half-slab norms; ``m = 3``
    gives the orders ``(3, 3, 3.5, 2.5)``.
    """
    vb = _pair_norm(state.v, m) + _pair_norm(state.B, m)
    q = _pair_norm(state.Q, m)
    return vb**2 + q**2 + torus_norm_sq(state.f, m + 0.5) + torus_norm_sq(state.f_t, m - 0.5)


def _tangential_sq(a, b, grid, weight):
    """``sum_{|alpha| <= 3} int d^alpha a . d^alpha b * weight`` over tangential alphas."""
    total = 0.0
    for alpha in multi_indices(2, 3):
        da = dxh(a, grid, *alpha)
        db = da if b is a else dxh(b, grid, *alpha)
        prod = np.sum(da * db, axis=0)
        total += float(integrate(prod if weight is None else weight * prod, grid))
    return total


def functional_H(state, lambda_p, lambda_m):
    """``1/2 sum_+- sum_{|alpha|<=3} int |d^a v|^2 - 2 lam d^a v.d^a B + |d^a B|^2``.

    ``lambda_p`` and ``lambda_m`` are front fields (functions of ``x'``)
    used on the plus and minus slab, constant in ``x3``.  Raises
    :class:`LambdaBoundError` unless ``|lambda+-| < 1`` everywhere.
    """
    bound = max(float(np.abs(lambda_p.values).max()), float(np.abs(lambda_m.values).max()))
    if not bound < 1.0:
        raise LambdaBoundError(f"max |lambda| = {bound:.6g} is not below 1")
    total = 0.0
    for lam, v, B in ((lambda_p, state.vp, state.Bp), (lambda_m, state.vm, state.Bm)):
        grid = v.grid
        w = lam.values[:, :, None]
        total += _tangential_sq(v.data, v.data, grid, None)
        total += _tangential_sq(B.data, B.data, grid, None)
        total -= 2.0 * _tangential_sq(v.data, B.data, grid, w)
    return 0.5 * total


def tangential_energy(state):
    """``sum_+- sum_{|alpha|<=3} |d^alpha (v, B)|^2``, the reference quantity for ``H``."""
    total = 0.0
    for v, B in ((state.vp, state.Bp), (state.vm, state.Bm)):
        total += _tangential_sq(v.data, v.data, v.grid, None)
        total += _tangential_sq(B.data, B.data, B.grid, None)
    return total


def functional_K(curls):
    """``1/2 sum_+- sum_{|beta|<=2} |d^beta zeta|^2 + |d^beta xi|^2`` over all directions."""
    total = 0.0
    for s in (PLUS, MINUS):
        total += sobolev_norm_volume_sq(curls.zeta(s), 2) + sobolev_norm_volume_sq(curls.xi(s), 2)
    return 0.5 * total


# ---------------------------------------------------------------- lambda


def lambda_fields(state, cfg):
    """``(lambda+, lambda-)`` on the interface, or ``None`` where undefined.

    When the Cramer system is degenerate but the tangential velocity jump
    vanishes, the multipliers are taken to be zero.
    """
    ist = interface_state(state)
    try:
        return solve_lambda(ist, cfg)
    except DegenerateFieldError:
        if float(np.abs(ist.dv[:2]).max()) == 0.0:
            z = FrontField.zeros(state.f.grid)
            return z, z
        return None


# ---------------------------------------------------------------- residuals


def _pointwise_predicates(ist):
    def cross(a, b):
        return np.linalg.norm(np.cross(a, b, axis=0), axis=0)

    Bp, Bm, du = ist.Bplus, ist.Bminus, ist.dv
    cpm, cp, cm = cross(Bp, Bm), cross(Bp, du), cross(Bm, du)
    slack_a = 2.0 * (np.sum(Bp**2, axis=0) + np.sum(Bm**2, axis=0)) - np.sum(du**2, axis=0)
    slack_b = 2.0 * cpm**2 - cp**2 - cm**2
    return {
        "weak": float(np.minimum(slack_a, slack_b).min()),
        "spectral": float(slack_b.min()),
        "strong": float((cpm - np.maximum(cp, cm)).min()),
    }


def jump_residuals(state, g):
    """Interface and wall constraints of the fixed-domain system, as max norms."""
    vn = normal_velocity(g, (state.vp.data, state.vm.data))
    bn = normal_velocity(g, (state.Bp.data, state.Bm.data))
    ft = state.f_t.values
    return {
        "v_dot_N_jump": float(np.abs(vn[0] - vn[1]).max()),
        "front_speed": float(max(np.abs(ft - vn[0]).max(), np.abs(ft - vn[1]).max())),
        "B_dot_N": float(max(np.abs(bn[0]).max(), np.abs(bn[1]).max())),
        "Q_jump": float(np.abs(state.Qp.data[0, :, :, 0] - state.Qm.data[0, :, :, 0]).max()),
        "wall_v3": float(max(np.abs(state.vp.data[2, :, :, -1]).max(), np.abs(state.vm.data[2, :, :, -1]).max())),
        "wall_B3": float(max(np.abs(state.Bp.data[2, :, :, -1]).max(), np.abs(state.Bm.data[2, :, :, -1]).max())),
    }


def compatibility_residual(state, chi=DEFAULT_CUTOFF):
    """``|sum int J F - int G|`` of the closed-form pressure data of ``state``."""
    gt = front_geometry(state.f, state.f_t, state.grids, chi, check=False)
    F = assemble_F(gt, state.v, state.B)
    G = assemble_G(interface_state(state), state.f_t)
    return abs(check_compatibility(PressureProblem(gt, F.plus, F.minus, G)))


def _quotient(num, den):
    if num == 0.0:
        return 0.0
    return num / den if den > 0.0 else None


def front_quotients(state):
    """Observed ratios ``|grad' f|_{2.5} / |B|_3`` and ``|f_t|_{2.5} / |v|_3``."""
    g1, g2 = state.f.derivative(1, 0), state.f.derivative(0, 1)
    grad_f = math.hypot(sobolev_norm_torus(g1, 2.5), sobolev_norm_torus(g2, 2.5))
    return {
        "grad_f_over_B": _quotient(grad_f, _pair_norm(state.B, 3)),
        "f_t_over_v": _quotient(sobolev_norm_torus(state.f_t, 2.5), _pair_norm(state.v, 3)),
    }


# ---------------------------------------------------------------- report


@dataclass
class EnergyReport:
    """One diagnostic sample; every entry is a JSON-serialisable scalar or dict.

    ``H`` and ``lambda_bound`` are ``None`` when the multipliers are undefined
    (colinear fields with a velocity jump) and ``H`` also when
    ``lambda_bound >= 1``.
    """

    time: float
    E: float
    H: float | None
    K: float
    lambda_bound: float | None
    stability_margins: dict
    flatness: float
    div_residuals: dict
    curl_identity_residual: float
    jump_residuals: dict
    compatibility_residual: float
    front_quotients: dict = field(default_factory=dict)
    curl_transport_residual: float | None = None
    step: int = 0
    wall_time: float | None = None  # seconds since the run started; omitted in reproducible mode

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False, default=_json_default)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report(state, cfg=None, m=3, tendency=None, chi=DEFAULT_CUTOFF, step=0):
    """Evaluate all functionals and residuals of a complete ``state``.

    ``tendency`` (from :func:`~cvsheet.evolution.rhs`) enables the
    transported-curl residual.
    """
    cfg = cfg or StabilityConfig()
    g = front_geometry(state.f, None, state.grids, chi, check=False)
    curls = curl_fields(state, g)
    lam = lambda_fields(state, cfg)
    if lam is None:
        lbound, H = None, None
    else:
        lbound = max(float(np.abs(lam[0].values).max()), float(np.abs(lam[1].values).max()))
        H = functional_H(state, *lam) if lbound < 1.0 else None
    ist = interface_state(state)
    hyp = theorem_hypotheses(ist, cfg, uniform=True)
    margins = dict(_pointwise_predicates(ist))
    margins.update(
        hypotheses_ok=hyp.ok,
        cross_margin=hyp.margins["cross_margin"],
        ratio_margin=hyp.margins["ratio_margin"],
    )
    ctr = None if tendency is None else curl_transport_residual(state, tendency)
    return EnergyReport(
        time=float(state.time),
        E=functional_E(state, m),
        H=H,
        K=functional_K(curls),
        lambda_bound=lbound,
        stability_margins=margins,
        flatness=sobolev_norm_torus(state.f, 2.5),
        div_residuals=divergence_residuals(state, g),
        curl_identity_residual=curl_identity_residual(state, curls, g),
        jump_residuals=jump_residuals(state, g),
        compatibility_residual=compatibility_residual(state, chi),
        front_quotients=front_quotients(state),
        curl_transport_residual=ctr,
        step=int(step),
    )


# ---------------------------------------------------------------- writers


class ReportWriter:
    """Append reports to a JSON-lines file, one object per line."""

    def __init__(self, path, mode="w"):
        self.path = path
        self._fh = open(path, mode, encoding="utf-8", newline="\n")

    def write(self, rep):
        self._fh.write(rep.to_json() + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_reports(path):
    with open(path, encoding="utf-8") as fh:
        return [EnergyReport.from_dict(json.loads(line)) for line in fh if line.strip()]


def flatten(d, prefix=""):
    """Nested dict to ``{"a.b": value}``."""
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def write_csv(reports, path):
    """Flattened CSV projection of a list of reports (columns in sorted order)."""
    rows = [flatten(r.to_dict()) for r in reports]
    cols = sorted({k for r in rows for k in r})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in cols})
