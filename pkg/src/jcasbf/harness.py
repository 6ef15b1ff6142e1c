"""Experiment orchestration: convergence, sweeps, and runtime benchmarks.

Every run is driven by an ExperimentSpec and its seed list; outputs are
CSV tables plus SVG views rendered from the same data. Results are
reproducible byte-for-byte except for wall-time columns.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import plotting
from .errors import FormatError, MissingCheckpoint
from .optimizer import SolverConfig, solve
from .scenario import SystemConfig, config_from_json, generate_scenario
from .training import TrainConfig, UnfoldedParams

SWEEP_MODES = ("fixed_step", "backtracking", "unfolded")
BENCH_LAYER_CAP = 500
BENCH_STOP_TOL = 1e-5


@dataclass
class ExperimentSpec:
    """One experiment: system + solver settings, seeds, optional sweep."""

    name: str
    system: SystemConfig = field(default_factory=SystemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    train: TrainConfig | None = None
    sweep: dict | None = None
    seeds: tuple = tuple(range(20))
    output_dir: str = "out"

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.sweep is not None:
            if set(self.sweep) - {"K", "delta"} or not self.sweep:
                raise ValueError("sweep must be {'K': [...]} or {'delta': [...]}")
            for vals in self.sweep.values():
                if not vals:
                    raise ValueError("sweep lists must be nonempty")


def spec_from_json(obj: dict) -> ExperimentSpec:
    """Build a spec from its JSON form (see README for the schema)."""
    if not isinstance(obj, dict) or "name" not in obj:
        raise FormatError("$.name: missing")
    system = config_from_json(obj["system"]) if "system" in obj else SystemConfig()
    solver_kwargs = dict(obj.get("solver", {}))
    train_obj = obj.get("train")
    try:
        solver = SolverConfig(**solver_kwargs)
        train = TrainConfig(**train_obj) if train_obj is not None else None
        return ExperimentSpec(
            name=obj["name"],
            system=system,
            solver=solver,
            train=train,
            sweep=obj.get("sweep"),
            seeds=tuple(obj.get("seeds", range(20))),
            output_dir=obj.get("output_dir", "out"),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"$: {exc}") from exc


def desk_spec(name: str = "desk", **overrides) -> ExperimentSpec:
    """Desk-scale defaults; the full-size preset is `full_spec`."""
    return ExperimentSpec(name=name, **overrides)


def full_spec(name: str = "full", **overrides) -> ExperimentSpec:
    """Full-size configuration (16 antennas, 150 layers, 30 epochs)."""
    overrides.setdefault("system", SystemConfig(Nt=16, Nr=16))
    overrides.setdefault("solver", SolverConfig(L_out=150))
    overrides.setdefault("train", TrainConfig(epochs=30))
    return ExperimentSpec(name=name, **overrides)


def _max_workers() -> int:
    env = os.environ.get("JCAS_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1


def parallel_map(fn, items):
    """Order-preserving map, threaded when JCAS_THREADS > 1."""
    items = list(items)
    workers = _max_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class ResultRow:
    h: float
    min_sinr_db: float
    min_scnr_db: float
    time_s: float


@dataclass
class ResultTable:
    """Grid of results keyed by (mode, sweep value, seed)."""

    axis: str  # "K" or "delta"
    rows: dict = field(default_factory=dict)

    def add(self, mode: str, value, seed: int, row: ResultRow) -> None:
        self.rows[(mode, value, seed)] = row

    def require_complete(self, modes, values, seeds) -> None:
        missing = [
            (m, v, s)
            for m in modes
            for v in values
            for s in seeds
            if (m, v, s) not in self.rows
        ]
        if missing:
            raise RuntimeError(f"result grid incomplete, missing cells: {missing[:5]}")

    def mean(self, mode: str, value, field_name: str) -> float:
        vals = [
            getattr(r, field_name)
            for (m, v, _), r in self.rows.items()
            if m == mode and v == value
        ]
        return float(np.mean(vals))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "mode", self.axis, "seed", "h", "min_sinr_db", "min_scnr_db", "time_s",
            ])
            for (mode, value, seed) in sorted(self.rows):
                r = self.rows[(mode, value, seed)]
                writer.writerow([
                    mode, repr(value), seed,
                    repr(r.h), repr(r.min_sinr_db), repr(r.min_scnr_db), repr(r.time_s),
                ])


def _to_db(x: float) -> float:
    return float(10.0 * np.log10(x))


def _mode_config(base: SolverConfig, mode: str, i_w: int | None = None, **extra) -> SolverConfig:
    """Solver config for one named mode; baselines run with I_w = 1."""
    if mode == "unfolded":
        return replace(base, mode="unfolded", I_w=i_w if i_w else base.I_w, **extra)
    return replace(base, mode=mode, I_w=1, **extra)


def _run_one(scn, cfg, params):
    t0 = time.perf_counter()
    state, trace = solve(scn, cfg, params=params if cfg.mode == "unfolded" else None)
    wall = time.perf_counter() - t0
    return state, trace, wall


def _require_params(params) -> UnfoldedParams:
    if params is None:
        raise MissingCheckpoint(
            "unfolded mode needs a trained checkpoint (pass --checkpoint or --train-first)"
        )
    return params


def run_convergence(spec: ExperimentSpec, params: UnfoldedParams, out_dir, deltas=None):
    """Mean utility trajectory per mode, one CSV/SVG pair per delta.

    Curve groups: fixed-step, backtracking, and the unfolded solver at
    I_w = 2 and I_w = 4. CSV rows are (mode, i_w, layer, mean_h).
    """
    params = _require_params(params)
    os.makedirs(out_dir, exist_ok=True)
    deltas = list(deltas) if deltas is not None else [spec.solver.delta]
    groups = [
        ("fixed_step", 1),
        ("backtracking", 1),
        ("unfolded", 2),
        ("unfolded", 4),
    ]
    written = []
    for delta in deltas:
        scns = [generate_scenario(spec.system, s) for s in spec.seeds]
        rows = []
        series = []
        for mode, i_w in groups:
            cfg = _mode_config(spec.solver, mode, i_w=i_w, delta=delta)
            traces = parallel_map(lambda scn, c=cfg: _run_one(scn, c, params)[1], scns)
            mean_h = np.mean([t.h for t in traces], axis=0)
            label = f"{mode}" if mode != "unfolded" else f"unfolded I_w={i_w}"
            series.append((label, list(range(1, len(mean_h) + 1)), list(mean_h)))
            rows.extend(
                (mode, i_w, layer + 1, mean_h[layer]) for layer in range(len(mean_h))
            )
        tag = f"{spec.name}_delta{delta:g}"
        csv_path = os.path.join(out_dir, f"convergence_{tag}.csv")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mode", "i_w", "layer", "mean_h"])
            for mode, i_w, layer, val in rows:
                writer.writerow([mode, i_w, layer, repr(float(val))])
        svg_path = os.path.join(out_dir, f"convergence_{tag}.svg")
        plotting.write_line_svg(
            svg_path, series,
            title=f"Objective vs outer layer (delta={delta:g})",
            xlabel="outer layer", ylabel="mean objective",
        )
        written.extend([csv_path, svg_path])
    return written


def run_k_sweep(spec: ExperimentSpec, params: UnfoldedParams) -> ResultTable:
    """Solve fresh scenarios for each user count with every mode.

    The same trained parameters serve all K values: the step grid and
    temperatures do not depend on the user count.
    """
    params = _require_params(params)
    k_values = list(spec.sweep["K"])
    table = ResultTable(axis="K")
    for k in k_values:
        system_k = spec.system.with_users(int(k))
        scns = [(seed, generate_scenario(system_k, seed)) for seed in spec.seeds]
        for mode in SWEEP_MODES:
            cfg = _mode_config(spec.solver, mode)

            def cell(item, c=cfg):
                seed, scn = item
                state, trace, wall = _run_one(scn, c, params)
                return seed, ResultRow(
                    h=trace.h[-1],
                    min_sinr_db=_to_db(trace.min_sinr[-1]),
                    min_scnr_db=_to_db(trace.min_scnr[-1]),
                    time_s=wall,
                )

            for seed, row in parallel_map(cell, scns):
                table.add(mode, int(k), seed, row)
    table.require_complete(SWEEP_MODES, [int(k) for k in k_values], spec.seeds)
    return table


def run_delta_sweep(spec: ExperimentSpec, params: UnfoldedParams) -> ResultTable:
    """Trade-off sweep over the objective weight delta.

    Scenarios are shared across delta values (paired comparisons); a
    single checkpoint serves the whole sweep.
    """
    params = _require_params(params)
    deltas = list(spec.sweep["delta"])
    scns = [(seed, generate_scenario(spec.system, seed)) for seed in spec.seeds]
    table = ResultTable(axis="delta")
    for delta in deltas:
        for mode in SWEEP_MODES:
            cfg = _mode_config(spec.solver, mode, delta=float(delta))

            def cell(item, c=cfg):
                seed, scn = item
                state, trace, wall = _run_one(scn, c, params)
                return seed, ResultRow(
                    h=trace.h[-1],
                    min_sinr_db=_to_db(trace.min_sinr[-1]),
                    min_scnr_db=_to_db(trace.min_scnr[-1]),
                    time_s=wall,
                )

            for seed, row in parallel_map(cell, scns):
                table.add(mode, float(delta), seed, row)
    table.require_complete(SWEEP_MODES, [float(d) for d in deltas], spec.seeds)
    return table


BENCH_MODES = ("fixed_step", "backtracking", "unfolded_iw2", "unfolded_iw4")


def _bench_config(base: SolverConfig, mode: str) -> SolverConfig:
    if mode == "unfolded_iw2":
        return _mode_config(base, "unfolded", i_w=2)
    if mode == "unfolded_iw4":
        return _mode_config(base, "unfolded", i_w=4)
    # Baselines run until convergence under a layer cap.
    return replace(
        _mode_config(base, mode),
        L_out=BENCH_LAYER_CAP,
        stop_tol=BENCH_STOP_TOL,
        stop_window=5,
    )


def run_benchmark(spec: ExperimentSpec, params: UnfoldedParams) -> ResultTable:
    """Wall-clock per solve over the K sweep, strictly sequential.

    The unfolded solver keeps its fixed layer schedule; baselines stop at
    a relative objective change of 1e-5 over 5 layers (cap 500). One
    warm-up solve per mode is discarded.
    """
    params = _require_params(params)
    k_values = [int(k) for k in spec.sweep["K"]]
    table = ResultTable(axis="K")
    for mode in BENCH_MODES:
        cfg = _bench_config(spec.solver, mode)
        warm = generate_scenario(spec.system.with_users(k_values[0]), spec.seeds[0])
        _run_one(warm, cfg, params)  # warm-up, discarded
        for k in k_values:
            system_k = spec.system.with_users(k)
            for seed in spec.seeds:
                scn = generate_scenario(system_k, seed)
                state, trace, wall = _run_one(scn, cfg, params)
                table.add(
                    mode, k, seed,
                    ResultRow(
                        h=trace.h[-1],
                        min_sinr_db=_to_db(trace.min_sinr[-1]),
                        min_scnr_db=_to_db(trace.min_scnr[-1]),
                        time_s=wall,
                    ),
                )
    table.require_complete(BENCH_MODES, k_values, spec.seeds)
    return table


def benchmark_summary(table: ResultTable, path) -> None:
    """Per-(mode, K) mean and median run time."""
    cells = {}
    for (mode, value, _), row in table.rows.items():
        cells.setdefault((mode, value), []).append(row.time_s)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "K", "mean_s", "median_s"])
        for (mode, value) in sorted(cells):
            times = cells[(mode, value)]
            writer.writerow(
                [mode, value, repr(float(np.mean(times))), repr(float(np.median(times)))]
            )


def sweep_plots(table: ResultTable, out_dir, prefix: str) -> list:
    """Render per-mode mean curves from a result table."""
    os.makedirs(out_dir, exist_ok=True)
    values = sorted({v for (_, v, _) in table.rows})
    modes = sorted({m for (m, _, _) in table.rows})
    written = []
    for metric, label in (("min_sinr_db", "min SINR [dB]"), ("min_scnr_db", "min SCNR [dB]")):
        series = [
            (mode, values, [table.mean(mode, v, metric) for v in values]) for mode in modes
        ]
        path = os.path.join(out_dir, f"{prefix}_{metric}.svg")
        plotting.write_line_svg(
            path, series, title=f"{label} vs {table.axis}", xlabel=table.axis, ylabel=label,
        )
        written.append(path)
    if table.axis == "delta":
        series = [
            (
                mode,
                [table.mean(mode, v, "min_sinr_db") for v in values],
                [table.mean(mode, v, "min_scnr_db") for v in values],
            )
            for mode in modes
        ]
        path = os.path.join(out_dir, f"{prefix}_tradeoff.svg")
        plotting.write_line_svg(
            path, series, title="Comm-sensing trade-off",
            xlabel="min SINR [dB]", ylabel="min SCNR [dB]", markers=True,
        )
        written.append(path)
    return written
