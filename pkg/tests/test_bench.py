"""Benchmark harness and CLI: config parsing, reproducibility, file formats."""

import numpy as np
import pytest

from dynlr.bench import (
    ConfigError,
    ExperimentConfig,
    NumericalFailure,
    RunRecord,
    compare_methods,
    emit_plotdata,
    run_experiment,
    sweep,
)
from dynlr.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, _parse_sweep, main


def quick_cfg(tmp_path, **over):
    """A cheap toy experiment (small n, two steps, three seeds)."""
    base = dict(problem="toy", method="dgn", h=0.05, T=0.1, rank=5,
                oversampling=2, power_iterations=1, seeds=3,
                output=str(tmp_path / "out" / "run"),
                problem_overrides={"n": 60})
    base.update(over)
    return ExperimentConfig(**base)


def write_ini(tmp_path, name="exp.ini", extra="", experiment=None):
    experiment = experiment or {
        "problem": "toy", "method": "dgn", "h": "0.05", "T": "0.1",
        "rank": "5", "oversampling": "2", "power_iterations": "1",
        "seeds": "3", "output": str(tmp_path / "out" / "run"),
    }
    lines = ["[experiment]"] + [f"{k} = {v}" for k, v in experiment.items()]
    text = "\n".join(lines) + "\n[problem]\nn = 60\n" + extra
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# config parsing and validation

def test_from_file_roundtrip(tmp_path):
    path = write_ini(tmp_path)
    cfg = ExperimentConfig.from_file(path)
    assert cfg.problem == "toy" and cfg.method == "dgn"
    assert cfg.h == 0.05 and cfg.T == 0.1
    assert cfg.rank == 5 and cfg.oversampling == 2 and cfg.power_iterations == 1
    assert cfg.seeds == 3
    assert cfg.problem_overrides == {"n": 60}
    assert cfg.solver_overrides == {}


def test_from_file_solver_section(tmp_path):
    path = write_ini(tmp_path, extra="[solver]\nkind = rk4\ndt = 0.001\n")
    cfg = ExperimentConfig.from_file(path)
    assert cfg.solver_overrides == {"kind": "rk4", "dt": 0.001}


def test_from_file_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "nope.ini")


def test_from_file_missing_required(tmp_path):
    path = write_ini(tmp_path, experiment={"problem": "toy", "method": "dgn"})
    with pytest.raises(ConfigError, match="required"):
        ExperimentConfig.from_file(path)


def test_from_file_unknown_key(tmp_path):
    path = write_ini(tmp_path, experiment={
        "problem": "toy", "method": "dgn", "h": "0.05", "T": "0.1",
        "stride": "2"})
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_file(path)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="unknown problem"):
        quick_cfg(tmp_path, problem="heat_3d")
    with pytest.raises(ConfigError, match="unknown method"):
        quick_cfg(tmp_path, method="gradient_descent")
    with pytest.raises(ConfigError, match="tolerance"):
        quick_cfg(tmp_path, method="adgn", tolerance=None)
    with pytest.raises(ConfigError, match="positive"):
        quick_cfg(tmp_path, h=-0.1)
    with pytest.raises(ConfigError, match=">= 1"):
        quick_cfg(tmp_path, seeds=0)
    with pytest.raises(ConfigError, match="schema"):
        quick_cfg(tmp_path, schema=99)


# ---------------------------------------------------------------------------
# running experiments

def test_run_experiment_record_shape(tmp_path):
    cfg = quick_cfg(tmp_path)
    rec = run_experiment(cfg, write=False)
    assert rec.times == [0.0, 0.05, 0.1]
    assert set(rec.raw) >= {"rel_error", "rank"}
    assert all(len(rows) == cfg.seeds for rows in rec.raw.values())
    assert all(len(row) == 3 for rows in rec.raw.values() for row in rows)
    # first output time is t=0: the truncated initial matches the reference
    assert all(row[0] <= 1e-12 for row in rec.raw["rel_error"])
    assert rec.aggregates == rec.recompute_aggregates()
    assert len(rec.seed_seconds) == cfg.seeds
    assert rec.final("rel_error") == rec.aggregates["rel_error"]["median"][-1]


def test_run_experiment_output_every(tmp_path):
    rec = run_experiment(quick_cfg(tmp_path, T=0.2, output_every=2), write=False)
    # every 2nd step plus the final one
    assert rec.times == [0.0, 0.1, 0.2]
    rec = run_experiment(quick_cfg(tmp_path, T=0.15, output_every=2), write=False)
    assert rec.times == [0.0, 0.1, 0.15]


def test_rerun_identical_bytes(tmp_path):
    """Same config run twice emits byte-identical CSVs; the JSON record may
    only differ in its wall-clock timings."""
    import json
    cfg = quick_cfg(tmp_path)
    run_experiment(cfg)
    outputs = sorted((tmp_path / "out").iterdir())
    assert [p.name for p in outputs] == ["run_agg.csv", "run_raw.csv", "run_record.json"]
    first = {p.name: p.read_bytes() for p in outputs}
    run_experiment(cfg)
    second = {p.name: p.read_bytes() for p in sorted((tmp_path / "out").iterdir())}
    for name in ("run_raw.csv", "run_agg.csv"):
        assert first[name] == second[name]
    a, b = (json.loads(first["run_record.json"]), json.loads(second["run_record.json"]))
    for key in ("config", "times", "raw", "aggregates"):
        assert a[key] == b[key]


def test_csv_formats(tmp_path):
    cfg = quick_cfg(tmp_path)
    rec = run_experiment(cfg)
    raw_lines = (tmp_path / "out" / "run_raw.csv").read_text().splitlines()
    assert raw_lines[0] == "seed,time,observable,value"
    n_obs = len(rec.raw)
    assert len(raw_lines) == 1 + n_obs_rows(rec)
    seed, t, name, val = raw_lines[1].split(",")
    assert int(seed) == 0 and float(t) == 0.0
    assert float(val) == rec.raw[name][0][0]  # repr round-trips exactly

    agg_lines = (tmp_path / "out" / "run_agg.csv").read_text().splitlines()
    assert agg_lines[0] == "time,observable,median,q25,q75,min,max"
    assert len(agg_lines) == 1 + n_obs * len(rec.times)


def n_obs_rows(rec):
    return sum(len(rows) * len(rec.times) for rows in rec.raw.values())


def test_record_json_roundtrip(tmp_path):
    cfg = quick_cfg(tmp_path)
    rec = run_experiment(cfg)
    back = RunRecord.from_json(tmp_path / "out" / "run_record.json")
    assert back.times == rec.times
    assert back.raw == rec.raw
    assert back.aggregates == rec.aggregates
    assert back.config == rec.config


def test_record_json_schema_check(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema": 99}')
    with pytest.raises(ConfigError):
        RunRecord.from_json(path)


def test_seed_changes_results_master_seed_reproduces(tmp_path):
    cfg = quick_cfg(tmp_path, seeds=2)
    a = run_experiment(cfg, write=False)
    b = run_experiment(cfg.replace(master_seed=1), write=False)
    c = run_experiment(cfg, write=False)
    assert a.raw["rel_error"] == c.raw["rel_error"]
    assert a.raw["rel_error"] != b.raw["rel_error"]


def test_noninteger_horizon_outputs_on_step_grid(tmp_path):
    # T = 0.12 with h = 0.05: output times stay on the step grid (the
    # integration still takes a short final step to reach T exactly)
    rec = run_experiment(quick_cfg(tmp_path, T=0.12), write=False)
    assert rec.times == [0.0, 0.05, 0.1]


def test_reference_cache_identity(tmp_path):
    cfg = quick_cfg(tmp_path)
    plain = run_experiment(cfg, write=False)
    cached1 = run_experiment(cfg, write=False, use_reference_cache=True)
    cached2 = run_experiment(cfg, write=False, use_reference_cache=True)
    assert cached1.raw["rel_error"] == plain.raw["rel_error"]
    assert cached2.raw["rel_error"] == plain.raw["rel_error"]


def test_worker_pool_matches_serial(tmp_path, monkeypatch):
    cfg = quick_cfg(tmp_path)
    serial = run_experiment(cfg, write=False)
    monkeypatch.setenv("DYNLR_WORKERS", "2")
    pooled = run_experiment(cfg, write=False)
    assert pooled.raw["rel_error"] == serial.raw["rel_error"]


def test_adaptive_initial_state_uses_tolerance(tmp_path):
    cfg = quick_cfg(tmp_path, method="adgn", tolerance=1e-4, h=0.05, T=0.05,
                    seeds=1, problem_overrides={"n": 60, "exact_rank": 6})
    rec = run_experiment(cfg, write=False)
    # rank-6 flow: the tolerance-truncated initial and all steps stay at 6
    assert all(r == 6.0 for row in rec.raw["rank"] for r in row)
    assert rec.final("rel_error") <= 1e-4


def test_numerical_failure_raises(tmp_path):
    # an adaptive tolerance below the rangefinder's reachable floor cannot
    # converge on the full (rapidly rotating) toy problem
    cfg = quick_cfg(tmp_path, method="adgn", tolerance=1e-13, seeds=1)
    with pytest.raises(NumericalFailure):
        run_experiment(cfg, write=False)


# ---------------------------------------------------------------------------
# compare and sweep

def test_compare_self_identical(tmp_path):
    cfg = quick_cfg(tmp_path)
    records, table = compare_methods([cfg, cfg])
    assert records[0].raw["rel_error"] == records[1].raw["rel_error"]
    rows0 = [r for r in table if r["time"] == records[0].times[-1]]
    assert rows0[0]["median"] == rows0[1]["median"]
    lines = (tmp_path / "out" / "run_compare.csv").read_text().splitlines()
    assert lines[0] == "method,time,median,q25,q75"
    assert len(lines) == 1 + 2 * len(records[0].times)


def test_compare_orders_methods(tmp_path):
    # the Galerkin correction removes the O(h^2) modeling error, so dgn
    # beats drsvd by orders of magnitude at identical parameters
    cfgs = [quick_cfg(tmp_path, method=m, seeds=5) for m in ("drsvd", "dgn")]
    records, _ = compare_methods(cfgs, write=False)
    assert records[1].final("rel_error") < 1e-3 * records[0].final("rel_error")


def test_sweep_csv_and_monotone(tmp_path):
    # drsvd's error on this flow is dominated by the O(h^2) modeling term
    cfg = quick_cfg(tmp_path, method="drsvd", seeds=5)
    values = [0.05, 0.025, 0.0125]
    records = sweep(cfg, "h", values)
    finals = [rec.final("rel_error") for rec in records]
    assert finals[2] < finals[1] < finals[0]
    path = tmp_path / "out" / "run_sweep_h.csv"
    lines = path.read_text().splitlines()
    assert lines[0] == "h,seed,rel_error"
    assert len(lines) == 1 + len(values) * cfg.seeds
    val, seed, err = lines[1].split(",")
    assert (float(val), int(seed)) == (0.05, 0)
    assert float(err) == records[0].raw["rel_error"][0][-1]


def test_sweep_unknown_param(tmp_path):
    with pytest.raises(ConfigError, match="unknown sweep parameter"):
        sweep(quick_cfg(tmp_path), "stride", [1, 2], write=False)


# ---------------------------------------------------------------------------
# plot-data emission

@pytest.fixture()
def toy_records(tmp_path):
    cfgs = [quick_cfg(tmp_path, method="drsvd", oversampling=p, seeds=4)
            for p in (0, 4)]
    return [run_experiment(c, write=False, use_reference_cache=True) for c in cfgs]


def test_emit_boxplot(tmp_path, toy_records):
    outdir = tmp_path / "plots"
    paths = emit_plotdata(toy_records, "boxplot", outdir)
    assert paths[-1].name == "manifest.txt"
    lines = (outdir / "boxplot.txt").read_text().splitlines()
    assert lines[0] == "group median q1 q3 lo hi"
    assert len(lines) == 3
    group, med, q1, q3, lo, hi = lines[1].split()
    assert group == "drsvd_r5_p0_q1"
    assert float(lo) <= float(q1) <= float(med) <= float(q3) <= float(hi)
    assert float(med) == toy_records[0].final("rel_error")


def test_emit_error_and_rank_vs_time(tmp_path, toy_records):
    outdir = tmp_path / "plots"
    emit_plotdata(toy_records[0], "error_vs_time", outdir)
    lines = (outdir / "error_vs_time_drsvd_r5_p0_q1.txt").read_text().splitlines()
    assert lines[0] == "t median q25 q75"
    assert len(lines) == 1 + len(toy_records[0].times)
    emit_plotdata(toy_records[0], "rank_vs_time", outdir)
    lines = (outdir / "rank_vs_time_drsvd_r5_p0_q1.txt").read_text().splitlines()
    assert lines[0] == "t median min max"
    assert all(float(line.split()[1]) == 5.0 for line in lines[1:])


def test_emit_pareto(tmp_path, toy_records):
    outdir = tmp_path / "plots"
    emit_plotdata(toy_records, "pareto", outdir)
    lines = (outdir / "pareto.txt").read_text().splitlines()
    assert lines[0] == "method rank median_error median_seconds"
    method, rank, err, sec = lines[1].split()
    assert method == "drsvd" and rank == "5"
    assert float(sec) > 0.0


def test_emit_energy_requires_observable(tmp_path, toy_records):
    with pytest.raises(ConfigError, match="electric_energy"):
        emit_plotdata(toy_records[0], "energy_vs_time", tmp_path / "plots")


def test_emit_energy_vlasov(tmp_path):
    cfg = ExperimentConfig(problem="vlasov_landau", method="dgn", h=0.1, T=0.2,
                           rank=5, oversampling=2, power_iterations=1, seeds=1,
                           output=str(tmp_path / "out" / "vl"))
    rec = run_experiment(cfg, write=False)
    assert "electric_energy" in rec.raw and "reference_energy" in rec.raw
    outdir = tmp_path / "plots"
    emit_plotdata(rec, "energy_vs_time", outdir)
    lines = (outdir / "energy_vs_time_dgn_r5_p2_q1.txt").read_text().splitlines()
    assert lines[0] == "t electric_energy reference_energy"
    t0, ee0, ref0 = lines[1].split()
    # at t=0 the rank-5 state carries the full electric energy of the initial
    assert np.isclose(float(ee0), float(ref0), rtol=1e-6)


def test_emit_manifest_union(tmp_path, toy_records):
    outdir = tmp_path / "plots"
    emit_plotdata(toy_records, "boxplot", outdir)
    emit_plotdata(toy_records, "pareto", outdir)
    entries = (outdir / "manifest.txt").read_text().splitlines()
    assert "boxplot: boxplot.txt" in entries
    assert "pareto: pareto.txt" in entries


def test_emit_unknown_kind(tmp_path, toy_records):
    with pytest.raises(ConfigError, match="unknown plot kind"):
        emit_plotdata(toy_records, "histogram", tmp_path / "plots")


# ---------------------------------------------------------------------------
# CLI

def test_parse_sweep():
    assert _parse_sweep("p=0..3") == ("oversampling", [0, 1, 2, 3])
    assert _parse_sweep("q=1,2") == ("power_iterations", [1, 2])
    assert _parse_sweep("r=5,10,20") == ("rank", [5, 10, 20])
    assert _parse_sweep("h=0.1,0.05") == ("h", [0.1, 0.05])
    with pytest.raises(ConfigError):
        _parse_sweep("p0..3")
    with pytest.raises(ConfigError):
        _parse_sweep("p=a..b")


def test_cli_run_ok(tmp_path, capsys):
    path = write_ini(tmp_path)
    assert main(["run", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "final median relative error" in out
    assert (tmp_path / "out" / "run_record.json").exists()


def test_cli_run_config_error(tmp_path, capsys):
    path = write_ini(tmp_path, experiment={
        "problem": "toy", "method": "simulated_annealing", "h": "0.05", "T": "0.1"})
    assert main(["run", str(path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_run_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.ini")]) == EXIT_CONFIG


def test_cli_run_numerical_failure(tmp_path, capsys):
    path = write_ini(tmp_path, experiment={
        "problem": "toy", "method": "adgn", "h": "0.05", "T": "0.1",
        "tolerance": "1e-13", "output": str(tmp_path / "out" / "run")})
    assert main(["run", str(path)]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_cli_compare_and_sweep(tmp_path, capsys):
    path = write_ini(tmp_path)
    assert main(["compare", str(path), str(path)]) == EXIT_OK
    assert (tmp_path / "out" / "run_compare.csv").exists()
    assert main(["sweep", str(path), "--param", "p=0,4"]) == EXIT_OK
    assert (tmp_path / "out" / "run_sweep_oversampling.csv").exists()
    assert main(["sweep", str(path), "--param", "bogus"]) == EXIT_CONFIG


def test_cli_emit(tmp_path, capsys):
    path = write_ini(tmp_path)
    assert main(["run", str(path)]) == EXIT_OK
    record = tmp_path / "out" / "run_record.json"
    outdir = tmp_path / "plots"
    assert main(["emit", str(record), "--kind", "boxplot",
                 "--outdir", str(outdir)]) == EXIT_OK
    assert (outdir / "boxplot.txt").exists()
    assert (outdir / "manifest.txt").exists()
