"""Acceptance suite: one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` (or this file as a script).  Each
test prints its verdict with the measured numbers, then asserts it.
"""
import json
import sys

import numpy as np
import pytest

from conftest import admissible_geometry, random_front, smooth_pair
from cvsheet.cli import main
from cvsheet.diagnostics import compatibility_residual, functional_E
from cvsheet.evolution import curl_transport_residual, divergence_residuals, rhs
from cvsheet.geometry import build_geometry, divergence_identity_residual
from cvsheet.lifting import lift, lifting_norm_ratio
from cvsheet.pressure import PressureProblem, pressure_operator, solve_pressure
from cvsheet.scenarios import scenario
from cvsheet.spectral import MINUS, PLUS, FieldPair, FrontField, TorusGrid, VolumeField, dx, half_grids, sobolev_norm_torus
from cvsheet.stability import (
    InterfaceState,
    StabilityConfig,
    eta_sweep,
    lambda_residual,
    min_discriminant_exact,
    planar_normal_modes,
    solve_lambda,
    syrovatskii_predicates,
    theorem_hypotheses,
)
from cvsheet.verification import (
    fit_frequency,
    fit_growth,
    integrate_to,
    mode_coefficient,
    richardson_orders,
    state_vector,
)

N = (32, 32, 17)
SEED = 1234
BAND = 1e-9
REL = 0.05


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


# ---------------------------------------------------------------- 1 lifting


def _mode_front(grid, k1, k2):
    return FrontField.from_function(grid, lambda x1, x2: np.cos(2 * np.pi * (k1 * x1 + k2 * x2)))


def test_criterion_01_lifting(verdict):
    grid = TorusGrid(N[0], N[1])
    rng = np.random.default_rng(SEED)
    kmax = 8
    # the volume and torus norms are diagonal in the Fourier modes, so the
    # largest single-mode ratio in the band bounds every front in the band
    bound = {m: 0.0 for m in range(1, 5)}
    for k1 in range(kmax + 1):
        for k2 in range(-kmax if k1 else 0, kmax + 1):
            f = _mode_front(grid, k1, k2)
            for m in bound:
                bound[m] = max(bound[m], lifting_norm_ratio(f, m, n3=N[2]))
    worst = {"interface": 0.0, "walls": 0.0, "d3_interface": 0.0}
    ratios = {m: [] for m in bound}
    for _ in range(100):
        f = random_front(grid, rng, int(rng.integers(1, kmax + 1)), rng.uniform(0.01, 1.0))
        res = lift(f, n3=N[2]).trace_residuals()
        for key in worst:
            worst[key] = max(worst[key], res[key])
        for m in bound:
            ratios[m].append(lifting_norm_ratio(f, m, n3=N[2]))
    traces_ok = worst["interface"] <= 1e-10 and worst["walls"] <= 1e-10 and worst["d3_interface"] <= 1e-8
    bounded = all(max(ratios[m]) <= bound[m] * (1 + 1e-12) for m in bound)
    consts = ", ".join(f"C{m}={bound[m]:.4g} (max sample {max(ratios[m]):.4g})" for m in bound)
    ok = verdict(1, traces_ok and bounded,
                 f"traces {worst['interface']:.1e}/{worst['walls']:.1e}/{worst['d3_interface']:.1e}; {consts}")
    assert ok


# ---------------------------------------------------------------- 2 Piola


def test_criterion_02_piola(verdict):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        g, _ = admissible_geometry(rng, N, steepness=rng.uniform(0.05, 0.45))
        for s in (PLUS, MINUS):
            sg = g[s]
            for i in range(3):
                div = sum(dx(sg.a[k, i], sg.grid, k + 1) for k in range(3))
                worst = max(worst, float(np.abs(div).max()))
    ok = verdict(2, worst <= 1e-8, f"max |d_k a_ki| over 20 lifts = {worst:.2e}")
    assert ok


# ---------------------------------------------------------------- 3 divergence


def test_criterion_03_transformed_divergence(verdict):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(10):
        g, _ = admissible_geometry(rng, N, steepness=rng.uniform(0.05, 0.45))
        worst = max(worst, divergence_identity_residual(g, smooth_pair(g.grids, rng)))
    ok = verdict(3, worst <= 1e-10, f"max identity residual over 10 fields = {worst:.2e}")
    assert ok


# ---------------------------------------------------------------- 4 pressure


def _cos_cos(x1, x2, x3):
    return np.cos(2 * np.pi * x1) * np.cos(np.pi * x3)


def _pair(g, func):
    return FieldPair(*(VolumeField.from_function(gr, func) for gr in g.grids))


def test_criterion_04_pressure(verdict):
    grids = half_grids(N[0], N[1], 16)
    g = build_geometry(lift(FrontField.zeros(grids[0].torus), grids=grids))
    F = _pair(g, lambda x1, x2, x3: 5 * np.pi**2 * _cos_cos(x1, x2, x3))
    sol = solve_pressure(PressureProblem(g, F.plus, F.minus, FrontField.zeros(grids[0].torus)))
    exact = _pair(g, _cos_cos)
    flat = max(np.abs(sol.Q[s].data - exact[s].data).max() for s in (PLUS, MINUS))

    # psi = 0.1 lift(cos 2 pi x1) has |grad psi| above 1/2, so the admissibility check is skipped
    grids = half_grids(*N)
    f = FrontField.from_function(grids[0].torus, lambda x1, x2: 0.1 * np.cos(2 * np.pi * x1))
    g = build_geometry(lift(f, grids=grids), check=False)
    Q = _pair(g, _cos_cos)
    Fc, G = pressure_operator(g, Q)
    sol = solve_pressure(PressureProblem(g, Fc.plus, Fc.minus, G))
    curved = max(np.abs(sol.Q[s].data - Q[s].data).max() for s in (PLUS, MINUS))

    compat = max(
        compatibility_residual(scenario(name, {"eps": 0.01}, n=N, check=False)[0])
        for name in ("current-sheet", "vortex-sheet-stable", "kelvin-helmholtz-unstable")
    )
    ok = verdict(4, flat <= 1e-8 and curved <= 1e-6 and compat <= 1e-8,
                 f"manufactured {flat:.1e}, curved round trip {curved:.1e}, compatibility {compat:.1e}")
    assert ok


# ---------------------------------------------------------------- 5 stability


def test_criterion_05_stability_cross_validation(verdict):
    rng = np.random.default_rng(SEED)
    agree = disagree = banded = 0
    seen = {True: 0, False: 0}
    for _ in range(1000):
        Bp = np.append(rng.normal(size=2), 0.0)
        Bm = np.append(rng.normal(size=2), 0.0)
        du = np.append(rng.normal(size=2) * rng.uniform(0.0, 3.0), 0.0)
        pred = syrovatskii_predicates(Bp, Bm, du)
        sweep = eta_sweep(du, np.zeros(3), Bp, Bm)
        if abs(pred.margins[1]) <= BAND or abs(sweep.min_discriminant) <= BAND:
            banded += 1
            continue
        holds = pred.margins[1] >= 0.0
        seen[holds] += 1
        if holds == sweep.all_real:
            agree += 1
        else:
            disagree += 1
    Bp, Bm, du = (1, 0, 0), (0, 1, 0), (1, 1, 0)
    p = syrovatskii_predicates(Bp, Bm, du)
    on_boundary = abs(p.margins[1]) <= 1e-12 and p.weak and not p.spectral and not p.strong
    exact = min_discriminant_exact(du, (0, 0, 0), Bp, Bm)
    ok = verdict(5, disagree == 0 and on_boundary and abs(exact) <= 1e-12,
                 f"{agree} agree, {disagree} disagree, {banded} in band "
                 f"({seen[True]} stable, {seen[False]} unstable); boundary example slack "
                 f"{p.margins[1]:.1e}, strong margin {p.margins[2]:.1e}")
    assert ok


# ---------------------------------------------------------------- 6 lambda


def _tangent(f, t1, t2):
    """Vector field tangent to the graph of ``f``: third component ``t . grad f``."""
    g1, g2 = f.gradient_values()
    return np.stack([t1, t2, t1 * g1 + t2 * g2])


def _smooth_values(grid, rng, kmax=3):
    """Random smooth function with unit sup norm."""
    v = random_front(grid, rng, kmax).values
    return v / np.abs(v).max()


def test_criterion_06_lambda(verdict):
    rng = np.random.default_rng(SEED)
    cfg = StabilityConfig(0.5)
    grid = TorusGrid(N[0], N[1])
    bound = 1 - cfg.delta0 / 2
    used = 0
    worst_res = worst_lam = 0.0
    for trial in range(200):
        f = random_front(grid, rng, 3, rng.uniform(0.0, 0.02))
        a = rng.uniform(0.0, 0.2)
        Bp = _tangent(f, 1 + a * _smooth_values(grid, rng), a * _smooth_values(grid, rng))
        Bm = _tangent(f, a * _smooth_values(grid, rng), 1 + a * _smooth_values(grid, rng))
        vm = _tangent(f, 0.3 * _smooth_values(grid, rng), 0.3 * _smooth_values(grid, rng))
        b = rng.uniform(0.0, 0.8)
        vp = vm + _tangent(f, b * _smooth_values(grid, rng), b * _smooth_values(grid, rng))
        state = InterfaceState(vp, vm, Bp, Bm, f)
        if not theorem_hypotheses(state, cfg, uniform=True).ok:
            continue
        used += 1
        lp, lm = solve_lambda(state, cfg)
        worst_res = max(worst_res, lambda_residual(state, lp, lm))
        worst_lam = max(worst_lam, float(np.abs(lp.values).max()), float(np.abs(lm.values).max()))
    ok = verdict(6, used >= 50 and worst_res <= 1e-10 and worst_lam <= bound,
                 f"{used} admissible states: residual {worst_res:.1e}, max|lambda| {worst_lam:.4f} <= {bound}")
    assert ok


# ---------------------------------------------------------------- 7 evolution


def test_criterion_07_evolution(verdict):
    div = [0.0]

    def watch(state, k):
        div[0] = max(div[0], max(divergence_residuals(state).values()))

    steady, _ = scenario("current-sheet", {"eps": 0.0}, n=N)
    end = integrate_to(steady, 1.0, 100, callback=watch)
    drift = float(np.abs(state_vector(end) - state_vector(steady)).max())

    st, _ = scenario("vortex-sheet-stable", {"eps": 1e-3}, n=(16, 8, 17))
    sols = [state_vector(integrate_to(st, 0.3, n, callback=watch)) for n in (14, 28, 56, 112)]
    orders, _ = richardson_orders(sols)

    # tangential refinement at fixed n3; the floor is the normal truncation
    curl = []
    for n1 in (8, 16, 24, 32):
        run, _ = scenario("vortex-sheet-stable", {"eps": 1e-3}, n=(n1, n1, 25))
        run = integrate_to(run, 0.05, 5, callback=watch)
        curl.append(curl_transport_residual(run, rhs(run)))
    spectral = curl[0] / curl[1] >= 1e3 and max(curl[1:]) <= 1e-9

    ok = verdict(7, drift <= 1e-10 and all(abs(o - 4) <= 0.3 for o in orders) and div[0] <= 1e-8 and spectral,
                 f"steady drift {drift:.1e}; orders {', '.join(f'{o:.3f}' for o in orders)}; "
                 f"max divergence {div[0]:.1e}; curl residual {', '.join(f'{c:.1e}' for c in curl)}")
    assert ok


# ---------------------------------------------------------------- 8 and 9 linear regime


def test_criterion_08_09_linear_regime(verdict):
    st, info = scenario("vortex-sheet-stable", {"eps": 1e-4}, n=N)
    strong = syrovatskii_predicates(info.background["B_plus"], info.background["B_minus"],
                                    np.subtract(info.background["u_plus"], info.background["u_minus"])).strong
    E0, f0 = functional_E(st), sobolev_norm_torus(st.f, 2.5)
    times, coeffs = [0.0], [mode_coefficient(st.f, (1, 0))]
    bounded = [True]
    worst = [0.0, 0.0]

    def sample(state, k):
        times.append(state.time)
        coeffs.append(mode_coefficient(state.f, (1, 0)))
        if state.time <= 0.5 + 1e-12:
            e, fn = functional_E(state) / E0, sobolev_norm_torus(state.f, 2.5)
            worst[0], worst[1] = max(worst[0], e), max(worst[1], fn)
            bounded[0] &= e <= 2.0 and fn <= 2 * f0 + 0.01

    integrate_to(st, 1.0, 100, callback=sample)
    freq, expected = fit_frequency(times, coeffs), info.tau.real
    stable_ok = strong and abs(freq - expected) <= REL * abs(expected)

    kh, kinfo = scenario("kelvin-helmholtz-unstable", {"eps": 1e-4}, n=N)
    bg = kinfo.background
    rate = planar_normal_modes(bg["u_plus"], bg["u_minus"], bg["B_plus"], bg["B_minus"], (2 * np.pi, 0)).growth_rate
    kt, kc = [0.0], [mode_coefficient(kh.f, (1, 0))]
    integrate_to(kh, 0.6, 30, callback=lambda s, k: (kt.append(s.time), kc.append(mode_coefficient(s.f, (1, 0)))))
    kt, kc = np.array(kt), np.array(kc)
    window = kt >= 0.1
    growth = fit_growth(kt[window], kc[window])
    kh_ok = abs(growth - rate) <= REL * rate

    ok8 = verdict(8, stable_ok and kh_ok,
                  f"frequency {freq:.6f} vs {expected:.6f}; KH growth {growth:.6f} vs {rate:.6f}")
    ok9 = verdict(9, f0 <= 0.01 and bounded[0],
                  f"|f0|_2.5 = {f0:.2e}; max E/E0 = {worst[0]:.6f}; max |f|_2.5 = {worst[1]:.2e}")
    assert ok8 and ok9


# ---------------------------------------------------------------- 10 determinism


def test_criterion_10_determinism(verdict, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["run", "--scenario", "vortex-sheet-stable", "--n1", "16", "--n2", "16", "--n3", "9",
                     "--eps", "0.001", "--t-end", "0.05", "--reproducible", "--no-plots",
                     "--output-dir", str(out)])
        assert code == 0
        outputs.append({p: (out / p).read_bytes() for p in ("reports.jsonl", "reports.csv", "final.bin")})
    same = all(outputs[0][p] == outputs[1][p] for p in outputs[0])
    lines = outputs[0]["reports.jsonl"].decode().splitlines()
    no_clock = all(json.loads(line)["wall_time"] is None for line in lines)
    ok = verdict(10, same and no_clock, f"{len(lines)} report lines; files byte-identical: {same}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
