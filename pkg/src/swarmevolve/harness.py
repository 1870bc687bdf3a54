"""Experiment orchestration: seeded replication, persistence, analysis, plot data.

An experiment is a grid of (selection method, run index) cells. Every cell
gets a seed derived from (master seed, method, index), runs independently,
and is persisted as one JSON record, so an interrupted experiment resumes
by skipping finished cells and reruns are byte-for-byte reproducible.
CSV outputs echo the full resolved configuration as comment lines and use
9 significant digits so repeated executions produce identical files.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .config import (ConfigError, ExperimentConfig, config_dict, config_from_dict,
                     config_hash, derive_seed, load_config, validate_config)
from .evolution import build_trace, init_simulation, run_simulation, step_swarm
from .tasks import RunTrace

log = logging.getLogger("swarmevolve.harness")

FLOAT_FMT = ".9g"


@dataclass
class RunRecord:
    config_hash: str
    method: str
    run_index: int
    seed: int
    trace: RunTrace
    wall_time: float
    final_genomes: list | None = None  # per-agent flat weight vectors at run end


class ExperimentError(RuntimeError):
    """A run failed or persisted records are inconsistent."""


# ---------------------------------------------------------------------------
# record persistence

def record_path(out_dir: Path, method: str, run_index: int) -> Path:
    return Path(out_dir) / "records" / f"{method}-{run_index:03d}.json"


def write_record(out_dir: Path, config: ExperimentConfig, record: RunRecord) -> Path:
    path = record_path(out_dir, record.method, record.run_index)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": config_dict(config),
        "config_hash": record.config_hash,
        "method": record.method,
        "run_index": record.run_index,
        "seed": record.seed,
        "wall_time_s": record.wall_time,
        "swarm_fitness": record.trace.swarm_fitness,
        "final_genomes": record.final_genomes,
    }
    path.write_text(json.dumps(payload, indent=1))
    return path


def read_record(path: Path) -> tuple[ExperimentConfig, RunRecord]:
    payload = json.loads(Path(path).read_text())
    config = config_from_dict(payload["config"])
    trace = RunTrace(payload["swarm_fitness"], payload["method"], payload["seed"])
    record = RunRecord(payload["config_hash"], payload["method"], payload["run_index"],
                       payload["seed"], trace, payload["wall_time_s"],
                       payload.get("final_genomes"))
    return config, record


def load_records(out_dir: Path) -> tuple[ExperimentConfig, list[RunRecord]]:
    """Load every record under out_dir, refusing to mix configurations."""
    paths = sorted(Path(out_dir).glob("records/*.json"))
    if not paths:
        raise ExperimentError(f"no run records found under {out_dir}")
    config = None
    records = []
    for path in paths:
        cfg, record = read_record(path)
        if config is None:
            config = cfg
            expected = config_hash(config)
        if record.config_hash != expected:
            raise ExperimentError(
                f"{path} was produced by a different configuration "
                f"({record.config_hash} != {expected}); refusing to mix records")
        records.append(record)
    order = {m: i for i, m in enumerate(config.methods)}
    records.sort(key=lambda r: (order.get(r.method, len(order)), r.run_index))
    return config, records


# ---------------------------------------------------------------------------
# execution

def _run_cell(config: ExperimentConfig, method: str, run_index: int):
    seed = derive_seed(config.master_seed, method, run_index)
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    sim = init_simulation(config, rng, method=method)
    for _ in range(config.sim_steps):
        step_swarm(sim)
    trace = build_trace(sim, seed)
    # final controllers, flat weight vectors in the documented layout
    genomes = [[float(w) for w in agent.active_genome.weights] for agent in sim.agents]
    return method, run_index, seed, trace.swarm_fitness, genomes, time.perf_counter() - start


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path,
    jobs: int | None = None,
) -> list[RunRecord]:
    """Execute every missing (method, run) cell and persist records incrementally.

    Cells already on disk with a matching config hash are skipped, so a
    partial directory resumes instead of recomputing. A failed cell is
    logged and the rest continue; the failure surfaces as ExperimentError
    after everything else finishes.
    """
    validate_config(config)
    out_dir = Path(out_dir)
    chash = config_hash(config)
    records: dict[tuple[str, int], RunRecord] = {}
    pending: list[tuple[str, int]] = []
    for method in config.methods:
        for run_index in range(config.runs_per_method):
            path = record_path(out_dir, method, run_index)
            if path.is_file():
                _, existing = read_record(path)
                if existing.config_hash == chash:
                    records[(method, run_index)] = existing
                    continue
            pending.append((method, run_index))

    failures = []
    if jobs is not None and jobs <= 1:
        results = map(lambda cell: _run_cell(config, *cell), pending)
        for method, run_index, seed, trace_values, genomes, wall in results:
            record = RunRecord(chash, method, run_index, seed,
                               RunTrace(trace_values, method, seed), wall, genomes)
            write_record(out_dir, config, record)
            records[(method, run_index)] = record
    elif pending:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_cell, config, m, i): (m, i) for m, i in pending}
            for future in as_completed(futures):
                cell = futures[future]
                try:
                    method, run_index, seed, trace_values, genomes, wall = future.result()
                except Exception as exc:  # pragma: no cover - worker crash path
                    log.warning("run %s/%d failed: %s", cell[0], cell[1], exc)
                    failures.append((cell, exc))
                    continue
                record = RunRecord(chash, method, run_index, seed,
                                   RunTrace(trace_values, method, seed), wall, genomes)
                write_record(out_dir, config, record)
                records[(method, run_index)] = record
    if failures:
        raise ExperimentError(f"{len(failures)} run(s) failed; completed cells were kept")
    order = {m: i for i, m in enumerate(config.methods)}
    return sorted(records.values(), key=lambda r: (order[r.method], r.run_index))


# ---------------------------------------------------------------------------
# analysis

@dataclass
class AnalysisResult:
    target: float
    measures: dict[str, list[metrics.MeasureSet]]  # method -> per-run measures
    comparisons: list[metrics.ComparisonCell]
    curves: dict[str, np.ndarray]  # method -> median curve


def analyze(
    records: list[RunRecord],
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
) -> AnalysisResult:
    """Measures for every run, pairwise tests for every measure, median curves.

    Methods with fewer than two runs are excluded from the statistics (with
    a warning) but still get measures and curves. When out_dir is given,
    writes measures_<task>.csv and comparisons_<task>.csv.
    """
    by_method: dict[str, list[RunRecord]] = {}
    for record in records:
        by_method.setdefault(record.method, []).append(record)
    for cell_records in by_method.values():
        cell_records.sort(key=lambda r: r.run_index)

    traces = [r.trace.swarm_fitness for r in records if len(r.trace.swarm_fitness)]
    if not traces:
        raise ExperimentError("no non-empty traces to analyze")
    target = metrics.compute_target(traces, config.target_fraction)

    measures: dict[str, list[metrics.MeasureSet]] = {}
    samples: dict[str, dict[str, list[float]]] = {}
    for method, cell_records in by_method.items():
        sets = [metrics.MeasureSet.from_trace(r.trace.swarm_fitness, target,
                                              config.tail_fraction, config.budget_fraction)
                for r in cell_records if len(r.trace.swarm_fitness)]
        measures[method] = sets
        if len(sets) >= 2:
            samples[method] = {name: [s.value(name) for s in sets]
                               for name in metrics.MEASURE_NAMES}
        else:
            log.warning("method %s has %d run(s); omitted from statistics", method, len(sets))

    comparisons = metrics.pairwise_comparisons(samples, config.methods)
    curves = {method: metrics.median_curve([r.trace.swarm_fitness for r in cell_records])
              for method, cell_records in by_method.items()
              if any(len(r.trace.swarm_fitness) for r in cell_records)}

    result = AnalysisResult(target, measures, comparisons, curves)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_measures_csv(out_dir / f"measures_{config.task}.csv", config, by_method, measures)
        _write_comparisons_csv(out_dir / f"comparisons_{config.task}.csv", config, comparisons)
    return result


def emit_plot_data(
    records: list[RunRecord],
    config: ExperimentConfig,
    out_dir: str | Path,
) -> list[Path]:
    """Write curves_<task>.csv and measures_<task>.csv, enough to redraw every figure."""
    if not records:
        raise ExperimentError("no records to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = analyze(records, config)
    by_method: dict[str, list[RunRecord]] = {}
    for record in records:
        by_method.setdefault(record.method, []).append(record)
    for cell_records in by_method.values():
        cell_records.sort(key=lambda r: r.run_index)

    curves_path = out_dir / f"curves_{config.task}.csv"
    methods = [m for m in config.methods if m in result.curves]
    n_gen = min(len(result.curves[m]) for m in methods)
    with curves_path.open("w") as fh:
        _echo_config(fh, config)
        fh.write("generation," + ",".join(methods) + "\n")
        for g in range(n_gen):
            row = ",".join(format(result.curves[m][g], FLOAT_FMT) for m in methods)
            fh.write(f"{g},{row}\n")

    measures_path = out_dir / f"measures_{config.task}.csv"
    _write_measures_csv(measures_path, config, by_method, result.measures)
    return [curves_path, measures_path]


def _echo_config(fh, config: ExperimentConfig) -> None:
    fh.write(f"# config_hash {config_hash(config)}\n")
    for key, value in config_dict(config).items():
        if key == "methods":
            value = ",".join(value)
        fh.write(f"# {key} {value!r}\n" if isinstance(value, float) else f"# {key} {value}\n")


def _write_measures_csv(path: Path, config: ExperimentConfig, by_method, measures) -> None:
    with path.open("w") as fh:
        _echo_config(fh, config)
        fh.write("method,run,f_c,f_b,g_f,f_a\n")
        for method in config.methods:
            for record, mset in zip(by_method.get(method, []), measures.get(method, [])):
                fh.write(f"{method},{record.run_index},"
                         f"{format(mset.f_c, FLOAT_FMT)},{format(mset.f_b, FLOAT_FMT)},"
                         f"{mset.g_f},{format(mset.f_a, FLOAT_FMT)}\n")


def _write_comparisons_csv(path: Path, config: ExperimentConfig, cells) -> None:
    with path.open("w") as fh:
        _echo_config(fh, config)
        fh.write("method_a,method_b,measure,U,p,significant\n")
        for cell in cells:
            fh.write(f"{cell.method_a},{cell.method_b},{cell.measure},"
                     f"{format(cell.u, FLOAT_FMT)},{format(cell.p, FLOAT_FMT)},"
                     f"{'true' if cell.significant else 'false'}\n")
