"""Run orchestration: scenario, time loop, sampling, checkpoints and figures."""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import checkpoint
from .config import ConfigError
from .diagnostics import ReportWriter, read_reports, report, write_csv
from .elliptic import SolverError
from .evolution import CFLError, FlatnessError, HypothesisWarning, cfl_limit, step
from .geometry import DiffeomorphismError
from .lifting import CutoffProfile
from .pressure import CompatibilityError
from .scenarios import _STABLE, HypothesisError, ScenarioError, scenario
from .stability import StabilityConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_SOLVER = 4
EXIT_CFL = 5

# fraction of the CFL bound used when dt is derived from it
DT_SAFETY = 0.8
N_SNAPSHOTS = 4


@dataclass
class RunResult:
    exit_code: int
    message: str = ""
    reports: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    state: object = None


def exit_code_for(exc):
    """Documented exit status of an exception raised during a run."""
    if isinstance(exc, (ConfigError, ScenarioError)):
        return EXIT_CONFIG
    if isinstance(exc, (HypothesisError, FlatnessError, DiffeomorphismError)):
        return EXIT_HYPOTHESIS
    if isinstance(exc, (SolverError, CompatibilityError)):
        return EXIT_SOLVER
    if isinstance(exc, CFLError):
        return EXIT_CFL
    return None


def time_grid(cfg, state, chi):
    """``(dt, nsteps)`` covering ``[0, t_end]`` in equal steps."""
    if cfg.dt is not None:
        target = cfg.dt
    else:
        limit = cfl_limit(state, chi, cfg.cfl)
        target = cfg.t_end if math.isinf(limit) else DT_SAFETY * limit
    nsteps = max(1, math.ceil(cfg.t_end / target - 1e-9))
    return cfg.t_end / nsteps, nsteps


def _pick(snapshots, k=N_SNAPSHOTS):
    if len(snapshots) <= k:
        return snapshots
    idx = sorted({round(i * (len(snapshots) - 1) / (k - 1)) for i in range(k)})
    return [snapshots[i] for i in idx]


def run(cfg, resume=None):
    """Execute ``cfg``; never raises for documented failures (see ``exit_code``)."""
    try:
        return _run(cfg, resume)
    except Exception as exc:  # mapped to exit codes below
        code = exit_code_for(exc)
        if code is None:
            raise
        log.error("%s: %s", type(exc).__name__, exc)
        return RunResult(code, f"{type(exc).__name__}: {exc}")


def _run(cfg, resume):
    cfg.validate()
    chi = CutoffProfile(support=cfg.chi_support)
    scfg = StabilityConfig(cfg.delta0, cfg.eps0)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    state, info = scenario(cfg.scenario, cfg.params, n=cfg.shape, chi=chi, cfg=scfg,
                           check=cfg.check_hypotheses)
    dt, nsteps = time_grid(cfg, state, chi)
    jsonl = out / "reports.jsonl"
    start = 0
    reports = []
    if resume is not None:
        state, start = checkpoint.load(resume)
        if state.vp.grid.shape != cfg.shape:
            raise ConfigError("checkpoint grid does not match the configuration")
        if jsonl.exists():
            reports = [r for r in read_reports(jsonl) if r.step <= start]
    result = RunResult(EXIT_OK, state=state)
    result.paths["reports"] = jsonl
    watch = cfg.scenario in _STABLE
    fronts = []
    clock = time.perf_counter()

    def sample(st, k, writer):
        rep = report(st, scfg, m=cfg.energy_order, chi=chi, step=k)
        if not cfg.reproducible:
            rep.wall_time = time.perf_counter() - clock
        writer.write(rep)
        reports.append(rep)
        fronts.append((st.time, st.f))
        if watch and not rep.stability_margins["hypotheses_ok"]:
            msg = f"stability hypotheses lost at t = {st.time:.6g}"
            result.warnings.append(msg)
            if cfg.strict_hypotheses:
                raise HypothesisError(msg)
            warnings.warn(msg, HypothesisWarning, stacklevel=2)
        return rep

    with ReportWriter(jsonl, "w") as writer:
        for rep in reports:
            writer.write(rep)
        if start == 0:
            sample(state, 0, writer)
        for k in range(start + 1, nsteps + 1):
            state = step(state, dt, chi, cfg.cfl)
            if k % cfg.sample_every == 0 or k == nsteps:
                sample(state, k, writer)
            if cfg.checkpoint_every and k % cfg.checkpoint_every == 0:
                result.paths["checkpoint"] = checkpoint.save(state, out / f"checkpoint_{k:06d}.bin", k)
        result.paths["final"] = checkpoint.save(state, out / "final.bin", nsteps)
    result.state = state
    result.reports = reports
    if cfg.csv:
        result.paths["csv"] = out / "reports.csv"
        write_csv(reports, result.paths["csv"])
    if cfg.plots:
        from .plotting import render_all

        figs = render_all(reports, _pick(fronts), out)
        result.paths["figures"] = figs
    result.message = f"{nsteps - start} steps of dt = {dt:.6g} to t = {state.time:.6g}"
    return result
