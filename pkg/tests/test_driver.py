import json
import warnings

import numpy as np
import pytest

from cvsheet import checkpoint
from cvsheet.cli import main
from cvsheet.config import ConfigError, RunConfig, load_configs, save_config
from cvsheet.diagnostics import read_reports
from cvsheet.evolution import HypothesisWarning, divergence_residuals, interface_state
from cvsheet.lifting import DEFAULT_CUTOFF
from cvsheet.runner import EXIT_CFL, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, run, time_grid
from cvsheet.scenarios import SCENARIOS, HypothesisError, ScenarioError, manufactured_pressure, scenario
from cvsheet.stability import StabilityConfig, theorem_hypotheses

SMALL = dict(n1=8, n2=8, n3=9)
ZERO_FIELDS = {"eps": 0.0, "B_plus": [0, 0, 0], "B_minus": [0, 0, 0]}


# ---------------------------------------------------------------- config


def test_config_round_trip(tmp_path):
    cfg = RunConfig(n1=16, n2=8, n3=13, dt=0.01, scenario="vortex-sheet-stable",
                    params={"eps": 1e-3, "mode": [1, 1]}, reproducible=True, output_dir="x")
    save_config(cfg, tmp_path / "c.json")
    [back] = load_configs(tmp_path / "c.json")
    assert back == cfg
    assert RunConfig.from_dict(json.loads(cfg.to_json())) == cfg


@pytest.mark.parametrize("bad", [
    {"n1": 7}, {"n1": 0}, {"n3": 2}, {"t_end": 0.0}, {"delta0": 0.0}, {"delta0": 0.6},
    {"dt": -1.0}, {"scenario": "nope"}, {"sample_every": 0}, {"chi_support": 1.0},
    {"energy_order": 5}, {"unknown_key": 1}, {"params": [1]},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_config_list_and_errors(tmp_path):
    p = tmp_path / "list.json"
    p.write_text(json.dumps([{"n1": 8}, {"n1": 16, "scenario": "manufactured"}]))
    cfgs = load_configs(p)
    assert [c.n1 for c in cfgs] == [8, 16]
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_configs(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        load_configs(tmp_path / "missing.json")


def test_replace_ignores_none():
    cfg = RunConfig()
    assert cfg.replace(n1=None, t_end=0.5).t_end == 0.5


# ---------------------------------------------------------------- scenarios


def test_current_sheet_passes_hypotheses():
    state, info = scenario("current-sheet", {"eps": 0.0}, n=(8, 8, 9))
    assert info.hypotheses.ok
    assert theorem_hypotheses(interface_state(state), StabilityConfig(0.5)).ok


def test_kelvin_helmholtz_fails_hypotheses_without_error():
    _, info = scenario("kelvin-helmholtz-unstable", {"eps": 1e-4}, n=(8, 8, 9))
    assert not info.hypotheses.ok
    assert info.tau.imag != 0.0


def test_stable_scenario_with_bad_background_raises():
    bad = {"u_plus": [2, 0, 0], "u_minus": [-2, 0, 0]}
    with pytest.raises(HypothesisError):
        scenario("vortex-sheet-stable", bad, n=(8, 8, 9))
    scenario("vortex-sheet-stable", bad, n=(8, 8, 9), check=False)


@pytest.mark.parametrize("params", [{"eps": 0.1}, {"eps": -1}, {"root": 2}, {"B_plus": [1, 0, 1]}])
def test_scenario_parameter_ranges(params):
    with pytest.raises(ScenarioError):
        scenario("current-sheet", params, n=(8, 8, 9))


def test_unknown_scenario():
    with pytest.raises(ScenarioError):
        scenario("tearing-mode")


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenarios_are_projected(name):
    state, _ = scenario(name, {"eps": 1e-3}, n=(16, 16, 17), check=False)
    assert max(divergence_residuals(state).values()) <= 1e-8


def test_manufactured_pressure_closed_form():
    state, _ = scenario("manufactured", n=(16, 16, 9))
    for Q in (state.Qp, state.Qm):
        assert np.abs(Q.data[0] - manufactured_pressure(Q.grid)).max() <= 1e-10


# ---------------------------------------------------------------- runs


def small_cfg(tmp_path, **kw):
    base = dict(SMALL, t_end=0.1, output_dir=str(tmp_path / "out"), plots=False, reproducible=True)
    base.update(kw)
    return RunConfig(**base)


def test_zero_state_run_reports_zeros(tmp_path):
    cfg = small_cfg(tmp_path, dt=0.01, params=ZERO_FIELDS, check_hypotheses=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        res = run(cfg)
    assert res.exit_code == EXIT_OK
    reps = read_reports(res.paths["reports"])
    assert [r.step for r in reps] == list(range(11))
    for r in reps:
        d = r.to_dict()
        assert d["E"] == d["H"] == d["K"] == 0.0
        assert all(v == 0.0 for v in d["div_residuals"].values())
        assert all(v == 0.0 for v in d["jump_residuals"].values())
        assert d["flatness"] == 0.0 and d["wall_time"] is None


def test_steady_run_energy_drift(tmp_path):
    cfg = small_cfg(tmp_path, scenario="current-sheet", params={"eps": 0.0}, t_end=1.0, dt=0.01,
                    sample_every=25)
    res = run(cfg)
    assert res.exit_code == EXIT_OK
    E = [r.E for r in res.reports]
    assert res.reports[-1].step == 100
    assert max(E) - min(E) <= 1e-9


def test_time_grid_covers_interval():
    cfg = RunConfig(**SMALL, t_end=0.35, dt=0.1)
    state, _ = scenario("current-sheet", {"eps": 0.0}, n=cfg.shape)
    dt, nsteps = time_grid(cfg, state, DEFAULT_CUTOFF)
    assert nsteps == 4 and dt * nsteps == pytest.approx(0.35, rel=1e-15)
    dt, nsteps = time_grid(cfg.replace(dt=None), state, DEFAULT_CUTOFF)
    assert nsteps >= 1 and dt <= 0.35


def test_run_artifacts(tmp_path):
    cfg = small_cfg(tmp_path, scenario="vortex-sheet-stable", params={"eps": 1e-3}, t_end=0.05,
                    plots=True, checkpoint_every=1)
    res = run(cfg)
    assert res.exit_code == EXIT_OK, res.message
    out = tmp_path / "out"
    for name in ("config.json", "reports.jsonl", "reports.csv", "final.bin",
                 "run_energy.png", "run_margins.png", "run_fronts.png"):
        assert (out / name).stat().st_size > 0, name
    assert RunConfig.from_dict(json.loads((out / "config.json").read_text())) == cfg
    assert res.reports[0].wall_time is None


def test_wall_time_recorded_outside_reproducible_mode(tmp_path):
    res = run(small_cfg(tmp_path, dt=0.05, reproducible=False, params={"eps": 0.0}))
    assert all(r.wall_time is not None and r.wall_time >= 0.0 for r in res.reports)


def test_cfl_violation_exit_code(tmp_path):
    res = run(small_cfg(tmp_path, scenario="vortex-sheet-stable", params={"eps": 1e-3}, dt=0.1))
    assert res.exit_code == EXIT_CFL


def test_hypothesis_exit_code(tmp_path):
    cfg = small_cfg(tmp_path, scenario="vortex-sheet-stable", params={"u_plus": [2, 0, 0], "u_minus": [-2, 0, 0]})
    assert run(cfg).exit_code == EXIT_HYPOTHESIS


def test_config_error_exit_code(tmp_path):
    cfg = small_cfg(tmp_path, params={"eps": 0.5})
    assert run(cfg).exit_code == EXIT_CONFIG


def test_strict_hypotheses_turn_warning_into_failure(tmp_path):
    cfg = small_cfg(tmp_path, params=ZERO_FIELDS, check_hypotheses=False, dt=0.05)
    with pytest.warns(HypothesisWarning):
        assert run(cfg).exit_code == EXIT_OK
    assert run(cfg.replace(strict_hypotheses=True)).exit_code == EXIT_HYPOTHESIS


def test_resume_is_bit_identical(tmp_path):
    cfg = small_cfg(tmp_path, scenario="vortex-sheet-stable", params={"eps": 1e-3}, t_end=0.06,
                    dt=0.01, checkpoint_every=1)
    full = run(cfg)
    assert full.exit_code == EXIT_OK
    out = tmp_path / "out"
    ref_reports = (out / "reports.jsonl").read_bytes()
    ref_final = (out / "final.bin").read_bytes()
    resumed = run(cfg, resume=out / "checkpoint_000003.bin")
    assert resumed.exit_code == EXIT_OK
    assert (out / "reports.jsonl").read_bytes() == ref_reports
    assert (out / "final.bin").read_bytes() == ref_final


# ---------------------------------------------------------------- CLI


def test_cli_run_and_report(tmp_path, capsys):
    out = tmp_path / "cli"
    code = main(["run", "--scenario", "current-sheet", "--n1", "8", "--n2", "8", "--n3", "9",
                 "--t-end", "0.02", "--eps", "0.001", "--output-dir", str(out), "--no-plots",
                 "--reproducible"])
    assert code == EXIT_OK
    assert "exit 0" in capsys.readouterr().out
    assert main(["report", str(out / "final.bin")]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    last = read_reports(out / "reports.jsonl")[-1]
    assert rep["E"] == pytest.approx(last.E, rel=1e-12)


def test_cli_config_list(tmp_path, capsys):
    cfgs = [dict(SMALL, t_end=0.01, plots=False, output_dir=str(tmp_path / "many"), params={"eps": 0.0}),
            dict(SMALL, t_end=0.01, plots=False, output_dir=str(tmp_path / "many"), scenario="manufactured")]
    (tmp_path / "c.json").write_text(json.dumps(cfgs))
    assert main(["run", "--config", str(tmp_path / "c.json")]) == EXIT_OK
    assert (tmp_path / "many" / "000" / "reports.jsonl").exists()
    assert (tmp_path / "many" / "001" / "reports.jsonl").exists()


@pytest.mark.parametrize("argv,code", [
    (["run", "--n1", "7", "--output-dir", "{tmp}/a"], EXIT_CONFIG),
    (["run", "--scenario", "nope", "--output-dir", "{tmp}/a"], EXIT_CONFIG),
    (["run", "--config", "{tmp}/missing.json"], EXIT_CONFIG),
    (["frobnicate"], EXIT_CONFIG),
    (["run", "--n1", "8", "--n2", "8", "--n3", "9", "--scenario", "vortex-sheet-stable", "--dt", "0.5",
      "--output-dir", "{tmp}/b", "--no-plots"], EXIT_CFL),
    (["run", "--n1", "8", "--n2", "8", "--n3", "9", "--scenario", "vortex-sheet-stable",
      "--params", '{"u_plus": [2, 0, 0]}', "--output-dir", "{tmp}/c", "--no-plots"], EXIT_HYPOTHESIS),
    (["check-stability", "--du", "1,1"], EXIT_OK),
    (["lift", "--amplitude", "0.5", "--mode", "3", "0", "--n1", "16", "--n2", "16"], EXIT_HYPOTHESIS),
])
def test_cli_exit_codes(tmp_path, argv, code, capsys):
    argv = [a.replace("{tmp}", str(tmp_path)) for a in argv]
    assert main(argv) == code


def test_cli_lift_from_file(tmp_path, capsys):
    x = np.arange(16) / 16
    front = 0.02 * np.cos(2 * np.pi * x)[:, None] * np.ones(8)[None, :]
    np.save(tmp_path / "front.npy", front)
    code = main(["lift", "--front", str(tmp_path / "front.npy"), "--n3", "9",
                 "--save", str(tmp_path / "psi.npz"), "--out", str(tmp_path / "lift.json")])
    assert code == EXIT_OK
    rec = json.loads((tmp_path / "lift.json").read_text())
    assert rec["trace_residuals"]["interface"] <= 1e-12
    assert rec["diffeomorphism"]["ok"]
    psi = np.load(tmp_path / "psi.npz")
    assert psi["psi_plus"].shape == (16, 8, 9)
    assert np.abs(psi["psi_plus"][:, :, 0] - front).max() <= 1e-14


def test_cli_solve_pressure_writes_checkpoint(tmp_path, capsys):
    code = main(["solve-pressure", "--n1", "8", "--n2", "8", "--n3", "9", "--params", '{"eps": 0.001}',
                 "--save", str(tmp_path / "q.bin"), "--out", str(tmp_path / "p.json")])
    assert code == EXIT_OK
    rec = json.loads((tmp_path / "p.json").read_text())
    assert rec["residuals"]["interface_jump"] <= 1e-8
    state, _ = checkpoint.load(tmp_path / "q.bin")
    assert np.abs(state.Qp.data[0, :, :, 0] - state.Qm.data[0, :, :, 0]).max() <= 1e-8


def test_cli_check_stability_planar_file(tmp_path, capsys):
    (tmp_path / "p.json").write_text(json.dumps({"Bp": [1, 0, 0], "Bm": [0, 1, 0], "du": [1, 1, 0]}))
    code = main(["check-stability", "--planar", str(tmp_path / "p.json"),
                 "--sweep-out", str(tmp_path / "sweep.csv")])
    assert code == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    assert rec["strong"] is False and rec["spectral"] is False
    assert abs(rec["exact_min_discriminant"]) <= 1e-12
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 257 and lines[0].startswith("theta")


def test_cli_check_stability_checkpoint(tmp_path, capsys):
    state, _ = scenario("current-sheet", {"eps": 0.0}, n=(8, 8, 9))
    checkpoint.save(state, tmp_path / "s.bin")
    assert main(["check-stability", "--checkpoint", str(tmp_path / "s.bin")]) == EXIT_OK
    bad, _ = scenario("kelvin-helmholtz-unstable", {"eps": 1e-3}, n=(8, 8, 9))
    checkpoint.save(bad, tmp_path / "kh.bin")
    assert main(["check-stability", "--checkpoint", str(tmp_path / "kh.bin")]) == EXIT_HYPOTHESIS


def test_cli_normal_modes(tmp_path, capsys):
    assert main(["normal-modes", "--up=0.5,0", "--um=-0.5,0", "--Hp", "0,0", "--Hm", "0,0",
                 "--eta", "6.283185307179586,0"]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    assert rec["growth_rate"] == pytest.approx(np.pi, rel=1e-12)
    assert main(["normal-modes", "--out", str(tmp_path / "m.csv")]) == EXIT_OK
    assert (tmp_path / "m.csv").read_text().count("\n") == 257
