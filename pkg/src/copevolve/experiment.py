"""Experiment harness: evolve instance sets over a grid of settings and
summarize solver effort and constraint features into report tables.

A plan enumerates cells (objective, constraint template, direction); each
cell is repeated with seeds derived from the master seed through a 64-bit
mixing function, so the whole experiment is reproducible from one integer
and any finished run is skipped on rerun.  Reports are CSV tables; figures
rendered from them are written alongside when plotting is enabled.
"""

from __future__ import annotations

import dataclasses
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .evolver import (
    Direction,
    EvolverConfig,
    GenomeSpec,
    decode,
    evolve,
    run_metadata,
)
from .features import FeatureVector, csv_header, csv_row, feature_vector
from .problems import (
    Bounds,
    ContractViolation,
    CopInstance,
    ObjectiveKind,
    dump_instance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
)
from .solver import SolverConfig, desk_scale_config, paper_scale_config

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# feature extraction draws from its own substream per run
_FEATURE_STREAM = 1


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, *parts: int) -> int:
    """Pure 64-bit seed derivation: fold each part into the running state
    with a splitmix64 finalizer."""
    state = _splitmix64(int(master_seed) ^ 0x243F6A8885A308D3)
    for part in parts:
        state = _splitmix64((state + _GOLDEN + (int(part) & _MASK64)) & _MASK64)
    return state


@dataclass(eq=False)
class ExperimentPlan:
    """Grid of evolver runs plus the shared solver and sampling settings."""

    objectives: list
    dimension: int
    constraint_templates: list
    repeats: int
    directions: tuple = (Direction.EASY, Direction.HARD)
    evolver: EvolverConfig = field(default_factory=lambda: EvolverConfig(Direction.EASY))
    solver: SolverConfig = field(default_factory=SolverConfig)
    master_seed: int = 0
    sample_count: int = 100_000
    output_dir: str | None = None

    def __post_init__(self) -> None:
        self.objectives = [ObjectiveKind.parse(o) for o in self.objectives]
        # normalizing through GenomeSpec rejects unknown tags at load time
        self.constraint_templates = [
            GenomeSpec(dimension=1, constraint_template=t).constraint_template
            for t in self.constraint_templates
        ]
        self.directions = tuple(Direction.parse(d) for d in self.directions)

    def validate(self) -> None:
        if self.repeats < 1:
            raise ContractViolation("repeats must be at least 1")
        if self.dimension < 1:
            raise ContractViolation("dimension must be at least 1")
        if not self.objectives or not self.constraint_templates or not self.directions:
            raise ContractViolation("plan must name objectives, templates and directions")
        if self.sample_count < 1:
            raise ContractViolation("sample count must be at least 1")
        self.solver.validate()

    def bounds(self) -> Bounds:
        return Bounds.symmetric(self.dimension)

    def spec_for(self, template: tuple) -> GenomeSpec:
        return GenomeSpec(dimension=self.dimension, constraint_template=template)

    def cells(self) -> list:
        """Deterministic cell enumeration (objective, template, direction)."""
        return [
            (objective, template, direction)
            for objective in self.objectives
            for template in self.constraint_templates
            for direction in self.directions
        ]

    def to_dict(self) -> dict:
        return {
            "objectives": [o.value for o in self.objectives],
            "dimension": self.dimension,
            "constraint_templates": [list(t) for t in self.constraint_templates],
            "repeats": self.repeats,
            "directions": [d.value for d in self.directions],
            "evolver_config": {
                "population_size": self.evolver.population_size,
                "generations": self.evolver.generations,
                "crossover_rate": self.evolver.crossover_rate,
                "scale_factor": self.evolver.scale_factor,
                "crossover_rule": self.evolver.crossover_rule,
            },
            "solver_config": self.solver.to_dict(),
            "master_seed": self.master_seed,
            "sample_count": self.sample_count,
            "output_dir": self.output_dir,
        }

    _PLAN_FIELDS = frozenset((
        "objectives", "dimension", "constraint_templates", "repeats",
        "directions", "evolver_config", "solver_config", "master_seed",
        "sample_count", "output_dir",
    ))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        # a typo'd optional key would otherwise fall back to the full-size
        # defaults and turn a quick plan into a multi-hour run
        unknown = set(d) - cls._PLAN_FIELDS
        if unknown:
            raise ContractViolation(f"unknown plan fields: {sorted(unknown)}")
        try:
            evolver_fields = dict(d.get("evolver_config", {}))
            evolver_fields.setdefault("direction", Direction.EASY)
            evolver_fields.setdefault("seed", 0)
            plan = cls(
                objectives=d["objectives"],
                dimension=int(d["dimension"]),
                constraint_templates=d["constraint_templates"],
                repeats=int(d["repeats"]),
                directions=tuple(d.get("directions", ["easy", "hard"])),
                evolver=EvolverConfig(**evolver_fields),
                solver=SolverConfig.from_dict(d.get("solver_config", {})),
                master_seed=int(d.get("master_seed", 0)),
                sample_count=int(d.get("sample_count", 100_000)),
                output_dir=d.get("output_dir"),
            )
        except (KeyError, TypeError) as exc:
            raise ContractViolation(f"malformed experiment plan: {exc}") from exc
        plan.validate()
        return plan


def load_plan(path) -> ExperimentPlan:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentPlan.from_dict(json.load(fh))


def desk_scale_plan(master_seed: int = 2026) -> ExperimentPlan:
    """Laptop-scale plan: Sphere in 5-D, one to five linear constraints."""
    dimension = 5
    return ExperimentPlan(
        objectives=[ObjectiveKind.SPHERE],
        dimension=dimension,
        constraint_templates=[("linear",) * k for k in range(1, 6)],
        repeats=10,
        evolver=EvolverConfig(
            Direction.EASY, population_size=8, generations=100, seed=0
        ),
        solver=desk_scale_config(dimension),
        master_seed=master_seed,
        sample_count=100_000,
    )


def paper_scale_plan(master_seed: int = 2026) -> ExperimentPlan:
    """Full-scale protocol: every objective, linear, quadratic and mixed
    five-constraint templates, 30 repeats, 300,000-evaluation budget."""
    dimension = 30
    templates = [("linear",) * k for k in range(1, 6)]
    templates += [("quadratic",) * k for k in range(1, 6)]
    templates += [("linear",) * k + ("quadratic",) * (5 - k) for k in range(1, 5)]
    return ExperimentPlan(
        objectives=[
            ObjectiveKind.SPHERE,
            ObjectiveKind.ACKLEY,
            ObjectiveKind.ROSENBROCK,
            ObjectiveKind.SCHAFFER,
        ],
        dimension=dimension,
        constraint_templates=templates,
        repeats=30,
        evolver=EvolverConfig(Direction.EASY, population_size=40, generations=5000),
        solver=paper_scale_config(dimension),
        master_seed=master_seed,
        sample_count=1_000_000,
    )


def cell_key(objective: ObjectiveKind, template: tuple, direction: Direction) -> str:
    spec = GenomeSpec(dimension=1, constraint_template=template)
    return f"{objective.value}_{spec.template_code()}_{direction.value}"


@dataclass(eq=False)
class RunRecord:
    objective: ObjectiveKind
    template: tuple
    direction: Direction
    run_index: int
    seed: int
    final_fen: int
    instance: CopInstance
    features: FeatureVector | None = None

    @property
    def key(self) -> str:
        return cell_key(self.objective, self.template, self.direction)


@dataclass(eq=False)
class ExperimentReport:
    plan: ExperimentPlan
    records: list
    tables: dict
    csv_paths: dict = field(default_factory=dict)
    figure_paths: list = field(default_factory=list)


def _run_paths(out_dir: str, key: str, run_index: int) -> tuple:
    cell_dir = os.path.join(out_dir, "runs", key)
    stem = os.path.join(cell_dir, f"run_{run_index:02d}")
    return cell_dir, stem + ".instance.json", stem + ".meta.json"


def _execute_run(plan: ExperimentPlan, cell_index: int, run_index: int,
                 out_dir: str) -> dict:
    """Evolve one run of one cell and persist its instance and metadata.

    Skips the work when both output files already exist (resume).
    """
    objective, template, direction = plan.cells()[cell_index]
    key = cell_key(objective, template, direction)
    cell_dir, instance_path, meta_path = _run_paths(out_dir, key, run_index)
    if os.path.exists(instance_path) and os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    seed = derive_seed(plan.master_seed, cell_index, run_index)
    spec = plan.spec_for(template)
    config = dataclasses.replace(
        plan.evolver, direction=direction, seed=seed, solver_config=plan.solver
    )
    best_genome, history = evolve(spec, objective, plan.bounds(), config)
    instance = decode(spec, best_genome, objective, plan.bounds())

    meta = run_metadata(config, history)
    meta.update(
        objective=objective.value,
        template=list(template),
        cell_index=cell_index,
        run_index=run_index,
    )
    os.makedirs(cell_dir, exist_ok=True)
    dump_instance(instance, instance_path)
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return meta


def _collect_record(plan: ExperimentPlan, cell_index: int, run_index: int,
                    out_dir: str, meta: dict) -> RunRecord:
    objective, template, direction = plan.cells()[cell_index]
    key = cell_key(objective, template, direction)
    _, instance_path, _ = _run_paths(out_dir, key, run_index)
    instance = load_instance(instance_path)
    feature_rng = np.random.default_rng(
        derive_seed(plan.master_seed, cell_index, run_index, _FEATURE_STREAM)
    )
    features = feature_vector(instance, plan.sample_count, feature_rng)
    return RunRecord(
        objective=objective,
        template=template,
        direction=direction,
        run_index=run_index,
        seed=int(meta["seed"]),
        final_fen=int(meta["final_fen"]),
        instance=instance,
        features=features,
    )


# plan fields that do not change the bytes of any individual run, so a plan
# differing only in these may reuse an output directory (repeats because the
# per-run seed never depends on it, which makes extending a study legitimate)
_RESUME_NEUTRAL_FIELDS = ("output_dir", "repeats")


def _check_resume_compatible(plan: ExperimentPlan, plan_path: str) -> None:
    """Refuse to reuse run files that an incompatible plan produced.

    Without this, resuming over a directory written by a different plan
    would silently mix its runs into the report: the per-run seeds match
    whenever the master seed does, regardless of the configs.
    """
    try:
        with open(plan_path, "r", encoding="utf-8") as fh:
            existing = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractViolation(
            f"unreadable plan.json in output directory: {exc}") from exc

    def view(d):
        return {k: v for k, v in d.items() if k not in _RESUME_NEUTRAL_FIELDS}

    if not isinstance(existing, dict) or view(existing) != view(plan.to_dict()):
        raise ContractViolation(
            "output directory already holds runs from a different plan; "
            "use a fresh directory")


def run_experiment(plan: ExperimentPlan, out_dir: str | None = None,
                   workers: int = 1, figures: bool = True) -> ExperimentReport:
    """Run (or resume) every cell of the plan, then write the report.

    Returns the report object; CSV tables land in <out>/report, figures in
    <out>/report/figures.
    """
    plan.validate()
    out_dir = out_dir or plan.output_dir
    if not out_dir:
        raise ContractViolation("an output directory is required")
    os.makedirs(out_dir, exist_ok=True)
    plan_path = os.path.join(out_dir, "plan.json")
    if os.path.exists(plan_path):
        _check_resume_compatible(plan, plan_path)
    with open(plan_path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
        fh.write("\n")

    jobs = [
        (cell_index, run_index)
        for cell_index in range(len(plan.cells()))
        for run_index in range(plan.repeats)
    ]
    metas = {}
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                job: pool.submit(_execute_run, plan, job[0], job[1], out_dir)
                for job in jobs
            }
            for job, future in futures.items():
                metas[job] = future.result()
    else:
        for job in jobs:
            metas[job] = _execute_run(plan, job[0], job[1], out_dir)

    records = [
        _collect_record(plan, cell_index, run_index, out_dir, metas[(cell_index, run_index)])
        for cell_index, run_index in jobs
    ]
    tables = summarize(records)
    report = ExperimentReport(plan=plan, records=records, tables=tables)
    report_dir = os.path.join(out_dir, "report")
    report.csv_paths = write_report_csvs(tables, report_dir)
    if figures:
        from . import plotting

        report.figure_paths = plotting.render_report_figures(
            tables, os.path.join(report_dir, "figures")
        )
    return report


def _quartiles(values: list) -> tuple:
    arr = np.asarray(values, dtype=float)
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    return float(q1), float(med), float(q3)


def _template_code(template: tuple) -> str:
    return GenomeSpec(dimension=1, constraint_template=template).template_code()


def summarize(records: list) -> dict:
    """Aggregate run records into the report tables.

    Tables: per-cell FEN summary, per-run FEN, per-cell feasibility-ratio
    summary, median pairwise angles for all-linear templates, five-number
    box data for coefficient stddev and for distance per constraint index,
    and the full per-run feature rows.
    """
    by_cell: dict = {}
    for record in records:
        by_cell.setdefault(record.key, []).append(record)

    cells = []
    for key in sorted(by_cell):
        runs = sorted(by_cell[key], key=lambda r: r.run_index)
        if not runs:
            warnings.warn(f"cell {key} has no completed runs; omitted")
            continue
        cells.append((key, runs))

    fen_summary = []
    fen_runs = []
    ratio_summary = []
    angle_rows = []
    box_coeff = []
    box_distance = []
    feature_rows = []

    for key, runs in cells:
        head = runs[0]
        base = {
            "objective": head.objective.value,
            "template": _template_code(head.template),
            "direction": head.direction.value,
        }
        fens = [r.final_fen for r in runs]
        q1, med, q3 = _quartiles(fens)
        fen_summary.append(dict(base, mean_fen=float(np.mean(fens)), median_fen=med,
                                q1_fen=q1, q3_fen=q3))
        for r in runs:
            fen_runs.append(dict(base, run_index=r.run_index, seed=r.seed,
                                 final_fen=r.final_fen))
        ratios = [r.features.local_feasibility_ratio for r in runs]
        rq1, rmed, rq3 = _quartiles(ratios)
        ratio_summary.append(dict(base, constraint_count=len(head.template),
                                  mean_ratio=float(np.mean(ratios)),
                                  median_ratio=rmed, q1_ratio=rq1, q3_ratio=rq3))

        k = len(head.template)
        if k >= 2 and all(tag == "linear" for tag in head.template):
            pair_index = 0
            for i in range(1, k + 1):
                for j in range(i + 1, k + 1):
                    angles = [
                        r.features.angles[pair_index]
                        for r in runs
                        if r.features.angles[pair_index] is not None
                    ]
                    angle_rows.append(dict(
                        base,
                        pair=f"{i}_{j}",
                        median_angle=float(np.median(angles)) if angles else None,
                        samples=len(angles),
                    ))
                    pair_index += 1

        for index in range(k):
            sds = [r.features.coeff_sd[index] for r in runs]
            dists = [r.features.distances[index] for r in runs]
            for table, values in ((box_coeff, sds), (box_distance, dists)):
                q1v, medv, q3v = _quartiles(values)
                table.append(dict(
                    base,
                    constraint_index=index + 1,
                    min=float(np.min(values)),
                    q1=q1v,
                    median=medv,
                    q3=q3v,
                    max=float(np.max(values)),
                ))

        for r in runs:
            feature_rows.append((f"{key}_run{r.run_index:02d}", r.features))

    return {
        "fen_summary": fen_summary,
        "fen_runs": fen_runs,
        "ratio_summary": ratio_summary,
        "angle_summary": angle_rows,
        "box_coeff_sd": box_coeff,
        "box_distance": box_distance,
        "features": feature_rows,
    }


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _write_table(path: str, rows: list) -> None:
    columns = list(rows[0].keys()) if rows else []
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_value(row[c]) for c in columns))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_csvs(tables: dict, report_dir: str) -> dict:
    os.makedirs(report_dir, exist_ok=True)
    paths = {}
    for name in ("fen_summary", "fen_runs", "ratio_summary", "angle_summary",
                 "box_coeff_sd", "box_distance"):
        path = os.path.join(report_dir, f"{name}.csv")
        _write_table(path, tables[name])
        paths[name] = path

    feature_rows = tables["features"]
    path = os.path.join(report_dir, "features.csv")
    max_k = max((fv.constraint_count for _, fv in feature_rows), default=0)
    lines = [csv_header(max_k)]
    for instance_id, fv in feature_rows:
        lines.append(csv_row(instance_id, fv, max_k))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    paths["features"] = path
    return paths


def emit_raster(instance: CopInstance, resolution: int) -> np.ndarray:
    """0/1 feasibility grid over the bounds of a 2-D instance.

    Row r, column c holds feasibility at (x1, x2) = (xs[c], ys[r]) where xs
    and ys run in ascending coordinate order; boundary points (g = 0) count
    as feasible.
    """
    if instance.dimension != 2:
        raise ContractViolation("raster rendering needs a 2-D instance")
    if resolution < 1:
        raise ContractViolation("resolution must be at least 1")
    xs = np.linspace(instance.bounds.lower[0], instance.bounds.upper[0], resolution)
    ys = np.linspace(instance.bounds.lower[1], instance.bounds.upper[1], resolution)
    xx, yy = np.meshgrid(xs, ys)
    points = np.column_stack([xx.ravel(), yy.ravel()])
    values = instance.constraint_matrix(points)
    feasible = np.all(values <= 0.0, axis=1).astype(np.uint8)
    return feasible.reshape(resolution, resolution)


def write_raster_csv(grid: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in grid:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
