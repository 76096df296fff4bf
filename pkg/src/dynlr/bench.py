"""Benchmark harness: experiment configs, multi-seed batches, statistics,
and CSV/plot-data emission.

An experiment is described by a flat sectioned key-value file (INI syntax,
one file per experiment; see `ExperimentConfig.from_file`). Running it
integrates the chosen method over [0, T] for each seed, measures relative
errors against a dense reference trajectory, aggregates per-time statistics
(median, quartiles, min, max) and writes raw + aggregate CSVs plus a JSON
record that `emit_plotdata` can turn into plain-text plot files.

Reproducibility contract: in serial mode (DYNLR_WORKERS unset or 1) the
config and master seed determine every emitted byte. Seeds fan out across a
thread pool; each worker owns its derived RNG stream and the aggregation is
a deterministic fold in seed order.
"""

from __future__ import annotations

import configparser
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np

from .baselines import BASELINE_MAPS
from .linalg import FactoredMatrix, svd, truncate_tol
from .odes import SolverSpec, reference_solve
from .problems import PROBLEMS, ProblemSpec, make_problem
from .rangefinder import AdaptiveConfig
from .steppers import STEP_MAPS, StepperConfig, integrate, phase_recording

SCHEMA_VERSION = 1

WORKERS_ENV = "DYNLR_WORKERS"


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


class NumericalFailure(RuntimeError):
    """A run aborted inside the numerics (solver blow-up, nonconvergence)."""


def _methods() -> dict:
    return {**STEP_MAPS, **BASELINE_MAPS}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run one experiment; built from a flat key-value
    config file with sections [experiment], [solver] and [problem]."""

    problem: str
    method: str
    h: float
    T: float
    rank: int = 5
    oversampling: int = 0
    corange_oversampling: int = 0
    power_iterations: int = 0
    tolerance: float | None = None  # adaptive methods only
    seeds: int = 1
    master_seed: int = 0
    output_every: int = 1
    output: str = "bench_out/run"
    schema: int = SCHEMA_VERSION
    problem_overrides: dict = dfield(default_factory=dict)
    solver_overrides: dict = dfield(default_factory=dict)

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {self.schema} (expected {SCHEMA_VERSION})")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; known: {sorted(PROBLEMS)}")
        if self.method not in _methods():
            raise ConfigError(f"unknown method {self.method!r}; known: {sorted(_methods())}")
        if self.method in ("adrsvd", "adgn") and self.tolerance is None:
            raise ConfigError(f"method {self.method!r} requires a tolerance")
        if self.h <= 0 or self.T <= 0:
            raise ConfigError("h and T must be positive")
        if self.seeds < 1 or self.output_every < 1:
            raise ConfigError("seeds and output_every must be >= 1")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep key case ('T' vs 't')
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        if "experiment" not in parser:
            raise ConfigError(f"{path}: missing [experiment] section")
        exp = dict(parser["experiment"])
        kwargs = {}
        try:
            for key in ("problem", "method", "output"):
                if key in exp:
                    kwargs[key] = exp.pop(key)
            for key in ("h", "T", "tolerance"):
                if key in exp:
                    kwargs[key] = float(exp.pop(key))
            for key in ("rank", "oversampling", "corange_oversampling", "power_iterations",
                        "seeds", "master_seed", "output_every", "schema"):
                if key in exp:
                    kwargs[key] = int(exp.pop(key))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if exp:
            raise ConfigError(f"{path}: unknown keys in [experiment]: {sorted(exp)}")
        if "problem" not in kwargs or "method" not in kwargs:
            raise ConfigError(f"{path}: 'problem' and 'method' are required")
        if "h" not in kwargs or "T" not in kwargs:
            raise ConfigError(f"{path}: 'h' and 'T' are required")
        kwargs["problem_overrides"] = _parse_values(dict(parser["problem"])) if "problem" in parser else {}
        kwargs["solver_overrides"] = _parse_values(dict(parser["solver"])) if "solver" in parser else {}
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentConfig":
        from dataclasses import replace
        return replace(self, **changes)

    def stepper_config(self, solver: SolverSpec):
        if self.method in ("adrsvd", "adgn"):
            return AdaptiveConfig(tolerance=self.tolerance, solver=solver)
        return StepperConfig(rank=self.rank, oversampling=self.oversampling,
                             corange_oversampling=self.corange_oversampling,
                             power_iterations=self.power_iterations, solver=solver)

    def as_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


def _parse_values(raw: dict) -> dict:
    """Best-effort typing of override strings: int, then float, else str."""
    out = {}
    for key, val in raw.items():
        for cast in (int, float):
            try:
                out[key] = cast(val)
                break
            except ValueError:
                continue
        else:
            out[key] = val
    return out


@dataclass
class RunRecord:
    """Raw per-seed per-time observable values plus their aggregates.

    Aggregates are always recomputable from the stored raw values
    (`recompute_aggregates`); both representations are kept."""

    config: dict
    times: list[float]
    raw: dict[str, list[list[float]]]  # observable -> [seed][time]
    aggregates: dict[str, dict[str, list[float]]] = dfield(default_factory=dict)
    seed_seconds: list[float] = dfield(default_factory=list)
    phase_seconds: dict[str, float] = dfield(default_factory=dict)

    STATS = ("median", "q25", "q75", "min", "max")

    def recompute_aggregates(self) -> dict:
        aggregates = {}
        for name, rows in self.raw.items():
            arr = np.asarray(rows, dtype=float)
            aggregates[name] = {
                "median": np.median(arr, axis=0).tolist(),
                "q25": np.quantile(arr, 0.25, axis=0).tolist(),
                "q75": np.quantile(arr, 0.75, axis=0).tolist(),
                "min": arr.min(axis=0).tolist(),
                "max": arr.max(axis=0).tolist(),
            }
        return aggregates

    def final(self, observable: str, stat: str = "median") -> float:
        return self.aggregates[observable][stat][-1]

    # -- serialization ------------------------------------------------------

    def to_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "schema": SCHEMA_VERSION,
            "config": self.config,
            "times": self.times,
            "raw": self.raw,
            "aggregates": self.aggregates,
            "seed_seconds": self.seed_seconds,
            "phase_seconds": self.phase_seconds,
        }
        path.write_text(json.dumps(payload, indent=1, sort_keys=True))
        return path

    @classmethod
    def from_json(cls, path) -> "RunRecord":
        payload = json.loads(Path(path).read_text())
        if payload.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"{path}: unsupported record schema")
        return cls(config=payload["config"], times=payload["times"], raw=payload["raw"],
                   aggregates=payload["aggregates"], seed_seconds=payload["seed_seconds"],
                   phase_seconds=payload["phase_seconds"])

    def write_csv(self, prefix) -> list[Path]:
        """<prefix>_raw.csv: seed,time,observable,value (long format);
        <prefix>_agg.csv: time,observable,median,q25,q75,min,max."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        raw_path = prefix.with_name(prefix.name + "_raw.csv")
        lines = ["seed,time,observable,value"]
        for name in sorted(self.raw):
            for seed, row in enumerate(self.raw[name]):
                for t, val in zip(self.times, row):
                    lines.append(f"{seed},{t!r},{name},{val!r}")
        raw_path.write_text("\n".join(lines) + "\n")

        agg_path = prefix.with_name(prefix.name + "_agg.csv")
        lines = ["time,observable," + ",".join(self.STATS)]
        for name in sorted(self.aggregates):
            stats = self.aggregates[name]
            for k, t in enumerate(self.times):
                vals = ",".join(repr(stats[s][k]) for s in self.STATS)
                lines.append(f"{t!r},{name},{vals}")
        agg_path.write_text("\n".join(lines) + "\n")
        return [raw_path, agg_path]


# ---------------------------------------------------------------------------
# running experiments

def _reference_states(prob: ProblemSpec, Y0_dense: np.ndarray, times: np.ndarray) -> list[np.ndarray]:
    """Dense reference trajectory started from the (truncated) initial value;
    uses the problem's closed-form propagator when available."""
    propagate = prob.extras.get("propagate")
    if propagate is not None:
        return [Y0_dense if t == 0.0 else propagate(Y0_dense, t) for t in times]
    return reference_solve(prob.field, Y0_dense, times, prob.reference)


def _initial_state(prob: ProblemSpec, cfg: ExperimentConfig) -> FactoredMatrix:
    if cfg.method in ("adrsvd", "adgn"):
        return truncate_tol(svd(prob.initial), cfg.tolerance)
    return prob.initial_factored(cfg.rank)


_REFERENCE_CACHE: dict = {}


def _cached_reference(prob, cfg: ExperimentConfig, Y0_dense, times):
    trunc = cfg.tolerance if cfg.method in ("adrsvd", "adgn") else cfg.rank
    key = (cfg.problem, tuple(sorted(cfg.problem_overrides.items())), trunc,
           tuple(np.round(times, 12)))
    if key not in _REFERENCE_CACHE:
        _REFERENCE_CACHE[key] = _reference_states(prob, Y0_dense, times)
    return _REFERENCE_CACHE[key]


def run_experiment(cfg: ExperimentConfig, write: bool = True,
                   use_reference_cache: bool = False) -> RunRecord:
    """Run one experiment: `seeds` independent integrations, relative errors
    against the dense reference at the output times, aggregation, CSV + JSON
    emission (under `cfg.output` unless write=False)."""
    prob = make_problem(cfg.problem, **cfg.problem_overrides)
    solver = prob.substep
    if cfg.solver_overrides:
        merged = {"kind": solver.kind, "rtol": solver.rtol, "atol": solver.atol, "dt": solver.dt}
        merged.update(cfg.solver_overrides)
        solver = SolverSpec(**merged)
    scfg = cfg.stepper_config(solver)
    method = _methods()[cfg.method]
    Y0 = _initial_state(prob, cfg)
    Y0_dense = Y0.reconstruct()

    n_steps = int(round(cfg.T / cfg.h))
    out_idx = list(range(0, n_steps + 1, cfg.output_every))
    if out_idx[-1] != n_steps:
        out_idx.append(n_steps)
    times = np.array([min(k * cfg.h, cfg.T) for k in out_idx])

    phases: dict[str, float] = {}
    t0 = time.perf_counter()
    if use_reference_cache:
        refs = _cached_reference(prob, cfg, Y0_dense, times)
    else:
        refs = _reference_states(prob, Y0_dense, times)
    phases["reference"] = time.perf_counter() - t0
    ref_norms = [np.linalg.norm(R) for R in refs]

    observables = dict(prob.observables)

    def one_seed(i: int):
        start = time.perf_counter()
        traj = integrate(prob.field, Y0, cfg.T, cfg.h, method, scfg,
                         master_seed=(cfg.master_seed, i), observables=observables)
        if traj.failure is not None:
            raise NumericalFailure(f"seed {i}: {traj.failure}")
        state_at = dict(zip(np.round(traj.times, 12), traj.states))
        errs, obs_rows = [], {name: [] for name in observables}
        for k, t in enumerate(np.round(times, 12)):
            if t not in state_at:
                raise ConfigError(f"output time {t} not on the step grid (h={cfg.h})")
            Y = state_at[t]
            errs.append(float(np.linalg.norm(Y.reconstruct() - refs[k]) / ref_norms[k]))
        idx = {np.round(tt, 12): j for j, tt in enumerate(traj.times)}
        for name in observables:
            obs_rows[name] = [float(traj.observables[name][idx[t]]) for t in np.round(times, 12)]
        obs_rows["rank"] = [float(state_at[t].rank) for t in np.round(times, 12)]
        return errs, obs_rows, time.perf_counter() - start

    workers = int(os.environ.get(WORKERS_ENV, "1"))
    t0 = time.perf_counter()
    with phase_recording(phases):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one_seed, range(cfg.seeds)))
        else:
            results = [one_seed(i) for i in range(cfg.seeds)]
    phases["runs"] = time.perf_counter() - t0

    raw: dict[str, list[list[float]]] = {"rel_error": []}
    seed_seconds = []
    for errs, obs_rows, secs in results:  # deterministic fold in seed order
        raw["rel_error"].append(errs)
        for name, row in obs_rows.items():
            raw.setdefault(name, []).append(row)
        seed_seconds.append(secs)
    if "electric_energy" in observables:
        fn = observables["electric_energy"]
        raw["reference_energy"] = [[float(fn(t, R)) for t, R in zip(times, refs)]]

    record = RunRecord(config=cfg.as_dict(), times=[float(t) for t in times],
                       raw=raw, seed_seconds=seed_seconds, phase_seconds=phases)
    record.aggregates = record.recompute_aggregates()
    if write:
        record.write_csv(cfg.output)
        record.to_json(Path(cfg.output).with_name(Path(cfg.output).name + "_record.json"))
    return record


def compare_methods(cfgs: list[ExperimentConfig], write: bool = True) -> tuple[list[RunRecord], list[dict]]:
    """Run several configs against a shared cached reference and build a
    relative-error-vs-time table (method, t, median, q25, q75)."""
    records = []
    table = []
    for cfg in cfgs:
        rec = run_experiment(cfg, write=write, use_reference_cache=True)
        records.append(rec)
        stats = rec.aggregates["rel_error"]
        for k, t in enumerate(rec.times):
            table.append({"method": cfg.method, "time": t,
                          "median": stats["median"][k],
                          "q25": stats["q25"][k], "q75": stats["q75"][k]})
    if write and cfgs:
        prefix = Path(cfgs[0].output)
        path = prefix.with_name(prefix.name + "_compare.csv")
        lines = ["method,time,median,q25,q75"]
        for row in table:
            lines.append(f"{row['method']},{row['time']!r},{row['median']!r},{row['q25']!r},{row['q75']!r}")
        path.write_text("\n".join(lines) + "\n")
    return records, table


def sweep(cfg: ExperimentConfig, param: str, values: list, write: bool = True) -> list[RunRecord]:
    """Rerun a base config over a range of one parameter (e.g. oversampling
    p = 0..12), tagging each record's output with the value."""
    if param not in cfg.as_dict():
        raise ConfigError(f"unknown sweep parameter {param!r}")
    records = []
    for val in values:
        sub = cfg.replace(**{param: val, "output": f"{cfg.output}_{param}{val}"})
        records.append(run_experiment(sub, write=write, use_reference_cache=True))
    if write and records:
        path = Path(cfg.output + f"_sweep_{param}.csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{param},seed,rel_error"]
        for val, rec in zip(values, records):
            for seed, row in enumerate(rec.raw["rel_error"]):
                lines.append(f"{val},{seed},{row[-1]!r}")
        path.write_text("\n".join(lines) + "\n")
    return records


# ---------------------------------------------------------------------------
# plot-data emission (plain text; no plotting dependency)

PLOT_KINDS = ("boxplot", "error_vs_time", "energy_vs_time", "rank_vs_time", "pareto")


def emit_plotdata(records, kind: str, outdir) -> list[Path]:
    """Write plain-text columnar plot files plus a manifest for one or more
    run records. Returns the written paths (manifest last)."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; known: {PLOT_KINDS}")
    if isinstance(records, RunRecord):
        records = [records]
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    def group_label(rec):
        c = rec.config
        return f"{c['method']}_r{c['rank']}_p{c['oversampling']}_q{c['power_iterations']}"

    if kind == "boxplot":
        lines = ["group median q1 q3 lo hi"]
        for rec in records:
            stats = rec.aggregates["rel_error"]
            lines.append(" ".join([group_label(rec)] + [
                repr(stats[s][-1]) for s in ("median", "q25", "q75", "min", "max")]))
        path = outdir / "boxplot.txt"
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    elif kind == "error_vs_time":
        for rec in records:
            stats = rec.aggregates["rel_error"]
            lines = ["t median q25 q75"]
            for k, t in enumerate(rec.times):
                lines.append(f"{t!r} {stats['median'][k]!r} {stats['q25'][k]!r} {stats['q75'][k]!r}")
            path = outdir / f"error_vs_time_{group_label(rec)}.txt"
            path.write_text("\n".join(lines) + "\n")
            paths.append(path)
    elif kind == "energy_vs_time":
        for rec in records:
            if "electric_energy" not in rec.aggregates:
                raise ConfigError("record has no electric_energy observable")
            stats = rec.aggregates["electric_energy"]
            ref = rec.raw.get("reference_energy")
            lines = ["t electric_energy reference_energy"]
            for k, t in enumerate(rec.times):
                rv = ref[0][k] if ref else stats["median"][k]
                lines.append(f"{t!r} {stats['median'][k]!r} {rv!r}")
            path = outdir / f"energy_vs_time_{group_label(rec)}.txt"
            path.write_text("\n".join(lines) + "\n")
            paths.append(path)
    elif kind == "rank_vs_time":
        for rec in records:
            stats = rec.aggregates["rank"]
            lines = ["t median min max"]
            for k, t in enumerate(rec.times):
                lines.append(f"{t!r} {stats['median'][k]!r} {stats['min'][k]!r} {stats['max'][k]!r}")
            path = outdir / f"rank_vs_time_{group_label(rec)}.txt"
            path.write_text("\n".join(lines) + "\n")
            paths.append(path)
    elif kind == "pareto":
        lines = ["method rank median_error median_seconds"]
        for rec in records:
            med_err = rec.aggregates["rel_error"]["median"][-1]
            med_sec = float(np.median(rec.seed_seconds))
            lines.append(f"{rec.config['method']} {rec.config['rank']} {med_err!r} {med_sec!r}")
        path = outdir / "pareto.txt"
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)

    manifest = outdir / "manifest.txt"
    existing = manifest.read_text().splitlines() if manifest.exists() else []
    entries = sorted(set(existing) | {f"{kind}: {p.name}" for p in paths})
    manifest.write_text("\n".join(entries) + "\n")
    paths.append(manifest)
    return paths
