"""Command line interface.

Subcommands: ``run``, ``lift``, ``solve-pressure``, ``check-stability``,
``normal-modes`` and ``report``.  Exit codes: 0 ok, 2 configuration error,
3 hypothesis or flatness loss, 4 solver failure, 5 CFL violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_configs
from .runner import EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, exit_code_for, run

log = logging.getLogger("cvsheet")


def _vec3(text):
    parts = [float(p) for p in text.replace(",", " ").split()]
    if len(parts) == 2:
        parts.append(0.0)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 2 or 3 numbers, got {text!r}")
    return np.array(parts)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# ---------------------------------------------------------------- run


_OVERRIDES = ("n1", "n2", "n3", "dt", "cfl", "t_end", "scenario", "output_dir",
              "sample_every", "checkpoint_every", "delta0", "eps0", "chi_support", "energy_order")


def _cmd_run(args):
    cfgs = load_configs(args.config) if args.config else [RunConfig()]
    over = {k: getattr(args, k) for k in _OVERRIDES}
    if args.reproducible:
        over["reproducible"] = True
    if args.no_plots:
        over["plots"] = False
    if args.strict_hypotheses:
        over["strict_hypotheses"] = True
    if args.no_hypothesis_check:
        over["check_hypotheses"] = False
    params = dict(json.loads(args.params)) if args.params else None
    status = EXIT_OK
    for i, cfg in enumerate(cfgs):
        if params is not None:
            over["params"] = {**cfg.params, **params}
        if args.eps is not None:
            over["params"] = {**over.get("params", cfg.params), "eps": args.eps}
        cfg = cfg.replace(**over)
        if len(cfgs) > 1 and args.output_dir is None:
            cfg = cfg.replace(output_dir=f"{cfg.output_dir}/{i:03d}")
        res = run(cfg, resume=args.resume)
        for w in res.warnings:
            log.warning(w)
        print(f"[{cfg.scenario}] exit {res.exit_code}: {res.message}")
        status = status or res.exit_code
    return status


# ---------------------------------------------------------------- lift


def _front_from_args(args):
    from .spectral import FrontField, TorusGrid

    if args.front:
        values = np.load(args.front)
        if values.ndim != 2:
            raise ConfigError(f"{args.front}: expected a 2-d array of front values")
        return FrontField.from_values(TorusGrid(*values.shape), values)
    grid = TorusGrid(args.n1, args.n2)
    k1, k2 = args.mode
    return FrontField.from_function(
        grid, lambda x1, x2: args.amplitude * np.cos(2 * np.pi * (k1 * x1 + k2 * x2))
    )


def _cmd_lift(args):
    from .geometry import DiffeomorphismError, build_geometry
    from .lifting import CutoffProfile, check_diffeomorphism, lift, lifting_norm_ratio

    f = _front_from_args(args)
    chi = CutoffProfile(support=args.chi_support)
    lf = lift(f, chi, n3=args.n3)
    if args.save:
        np.savez(args.save, psi_plus=lf.psi.plus.data[0], psi_minus=lf.psi.minus.data[0],
                 x3_plus=lf.psi.plus.grid.x3, x3_minus=lf.psi.minus.grid.x3, front=f.values)
    dcheck = check_diffeomorphism(lf)
    out = {
        "trace_residuals": lf.trace_residuals(),
        "diffeomorphism": {"ok": dcheck.ok, "margin": dcheck.margin, "max_gradient": dcheck.max_gradient},
        "norm_ratios": {str(m): lifting_norm_ratio(f, m, chi, args.n3) for m in (1, 2, 3)},
    }
    try:
        g = build_geometry(lf)
        out["J_range"] = list(g.J_range())
        out["piola_residual"] = float(g.piola_residual().max())
    except DiffeomorphismError as exc:
        out["error"] = str(exc)
        _emit(out, args.out)
        return EXIT_HYPOTHESIS
    _emit(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- pressure


def _load_state(args):
    from . import checkpoint
    from .scenarios import scenario

    if args.checkpoint:
        return checkpoint.load(args.checkpoint)[0]
    params = json.loads(args.params) if args.params else None
    return scenario(args.scenario, params, n=(args.n1, args.n2, args.n3), check=False)[0]


def _cmd_solve_pressure(args):
    from .evolution import front_geometry, interface_state
    from .pressure import PressureProblem, assemble_F, assemble_G, coercivity_ratio, solve_pressure

    state = _load_state(args)
    g = front_geometry(state.f, state.f_t, state.grids)
    F = assemble_F(g, state.v, state.B)
    G = assemble_G(interface_state(state), state.f_t)
    sol = solve_pressure(PressureProblem(g, F.plus, F.minus, G), tol=args.tol)
    if args.save:
        from . import checkpoint

        checkpoint.save(state.replace(Qp=sol.Qp, Qm=sol.Qm), args.save)
    ratio, floor = coercivity_ratio(g, sol.Q)
    _emit({
        "iterations": sol.iterations,
        "mean": sol.mean,
        "mu": sol.mu,
        "residuals": sol.residuals,
        "coercivity": {"ratio": ratio, "floor": floor},
        "Q_range": [float(min(sol.Qp.data.min(), sol.Qm.data.min())),
                    float(max(sol.Qp.data.max(), sol.Qm.data.max()))],
    }, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- stability


def _cmd_check_stability(args):
    from .stability import StabilityConfig, eta_sweep, min_discriminant_exact, syrovatskii_predicates

    if args.checkpoint:
        from .evolution import interface_state
        from .stability import theorem_hypotheses

        state = _load_state(args)
        cfg = StabilityConfig(args.delta0)
        rep = theorem_hypotheses(interface_state(state), cfg, uniform=args.uniform)
        _emit({"ok": rep.ok, "worst_point": rep.worst_point, "worst_x": rep.worst_x,
               "margins": rep.margins}, args.out)
        return EXIT_OK if rep.ok else EXIT_HYPOTHESIS
    if args.planar:
        _planar_from_file(args)
    du = args.du if args.du is not None else args.up - args.um
    up, um = (args.up, args.um) if args.du is None else (du, np.zeros(3))
    pred = syrovatskii_predicates(args.Bp, args.Bm, du)
    sweep = eta_sweep(up, um, args.Bp, args.Bm, n=args.n)
    if args.sweep_out:
        _write_sweep(sweep, args.sweep_out)
    _emit({
        "weak": pred.weak, "spectral": pred.spectral, "strong": pred.strong,
        "margins": dict(zip(("weak", "spectral", "strong"), pred.margins)),
        "sweep_min_discriminant": sweep.min_discriminant,
        "exact_min_discriminant": min_discriminant_exact(up, um, args.Bp, args.Bm),
        "all_roots_real": sweep.all_real,
    }, args.out)
    return EXIT_OK


def _planar_from_file(args):
    """Fill ``Bp, Bm, up, um, du`` from a JSON object with those keys."""
    try:
        with open(args.planar, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {args.planar}: {exc}") from None
    unknown = sorted(set(data) - {"Bp", "Bm", "up", "um", "du"})
    if unknown:
        raise ConfigError(f"unknown planar keys: {', '.join(unknown)}")
    for key, val in data.items():
        setattr(args, key, _vec3(",".join(str(x) for x in val)))


def _write_sweep(sweep, path):
    import csv

    rows = list(sweep.rows())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _cmd_normal_modes(args):
    from .stability import eta_sweep, planar_normal_modes

    if args.eta is not None:
        nm = planar_normal_modes(args.up, args.um, args.Hp, args.Hm, args.eta)
        _emit({"tau": [[t.real, t.imag] for t in nm.tau_roots], "growth_rate": nm.growth_rate,
               "discriminant": nm.discriminant}, args.out)
        return EXIT_OK
    sweep = eta_sweep(args.up, args.um, args.Hp, args.Hm, n=args.n)
    if args.out:
        _write_sweep(sweep, args.out)
    else:
        _emit({"min_discriminant": sweep.min_discriminant, "argmin_theta": sweep.argmin_theta,
               "max_growth_rate": float(sweep.growth_rate.max()), "all_real": sweep.all_real})
    return EXIT_OK


# ---------------------------------------------------------------- report


def _cmd_report(args):
    from . import checkpoint
    from .diagnostics import report
    from .stability import StabilityConfig

    state, k = checkpoint.load(args.checkpoint)
    rep = report(state, StabilityConfig(args.delta0), m=args.energy_order, step=k)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rep.to_json() + "\n")
    else:
        print(rep.to_json())
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _grid_args(p, n3=17):
    p.add_argument("--n1", type=int, default=32)
    p.add_argument("--n2", type=int, default=32)
    p.add_argument("--n3", type=int, default=n3)


def build_parser():
    ap = argparse.ArgumentParser(prog="cvsheet", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="time-integrate a scenario")
    p.add_argument("--config", help="JSON config file (object or list of objects)")
    for name in ("n1", "n2", "n3", "sample_every", "checkpoint_every", "energy_order"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int)
    for name in ("dt", "cfl", "t_end", "delta0", "eps0", "chi_support", "eps"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    p.add_argument("--scenario")
    p.add_argument("--params", help="JSON object merged into the scenario parameters")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--reproducible", action="store_true")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--strict-hypotheses", action="store_true")
    p.add_argument("--no-hypothesis-check", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("lift", help="lift a single-mode front and check the flattening map")
    _grid_args(p)
    p.add_argument("--mode", type=int, nargs=2, default=(1, 0))
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--chi-support", type=float, default=2.0)
    p.add_argument("--front", help=".npy file of front values on the torus grid (overrides --mode)")
    p.add_argument("--save", help=".npz file for the lifted field")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("solve-pressure", help="solve the pressure problem of a state")
    _grid_args(p)
    p.add_argument("--scenario", default="vortex-sheet-stable")
    p.add_argument("--params")
    p.add_argument("--checkpoint")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--save", help="checkpoint of the state with the solved pressure")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_solve_pressure)

    p = sub.add_parser("check-stability", help="stability predicates of a planar sheet or a state")
    _grid_args(p)
    p.add_argument("--Bp", type=_vec3, default=_vec3("1 0 0"))
    p.add_argument("--Bm", type=_vec3, default=_vec3("0 1 0"))
    p.add_argument("--up", type=_vec3, default=_vec3("0 0 0"))
    p.add_argument("--um", type=_vec3, default=_vec3("0 0 0"))
    p.add_argument("--du", type=_vec3)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--checkpoint")
    p.add_argument("--scenario", default="current-sheet")
    p.add_argument("--params")
    p.add_argument("--delta0", type=float, default=0.5)
    p.add_argument("--uniform", action="store_true")
    p.add_argument("--planar", help="JSON object with Bp, Bm and up, um or du")
    p.add_argument("--sweep-out", help="CSV file for the eta sweep")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_check_stability)

    p = sub.add_parser("normal-modes", help="planar dispersion roots or an eta sweep")
    p.add_argument("--up", type=_vec3, default=_vec3("0 0 0"))
    p.add_argument("--um", type=_vec3, default=_vec3("0 0 0"))
    p.add_argument("--Hp", type=_vec3, default=_vec3("1 0 0"))
    p.add_argument("--Hm", type=_vec3, default=_vec3("0 1 0"))
    p.add_argument("--eta", type=_vec3)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--out", help="CSV file for the sweep")
    p.set_defaults(func=_cmd_normal_modes)

    p = sub.add_parser("report", help="recompute diagnostics from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--delta0", type=float, default=0.5)
    p.add_argument("--energy-order", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        code = exit_code_for(exc)
        log.error("%s", exc)
        return EXIT_CONFIG if code is None else code
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        log.error("%s", exc)
        return code


if __name__ == "__main__":
    sys.exit(main())
