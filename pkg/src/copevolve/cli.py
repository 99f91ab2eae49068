"""Command line entry points.

Subcommands: generate (random instance), solve, evolve, features,
experiment, raster.  Exit codes: 0 success, 2 contract violation, 3 I/O
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import evolver as ev
from . import experiment as ex
from .features import csv_header, csv_row, feature_vector
from .problems import (
    Bounds,
    ContractViolation,
    ObjectiveKind,
    dump_instance,
    instance_to_dict,
    load_instance,
)
from .solver import SolverConfig, desk_scale_config, paper_scale_config, solve


def _parent_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=0, help="master seed")
    parent.add_argument("--out", help="output file or directory")
    parent.add_argument("--workers", type=int, default=1,
                        help="concurrent runs for the experiment harness")
    parent.add_argument("--plan", help="experiment plan JSON file")
    parent.add_argument("--paper-scale", action="store_true",
                        help="use the full-scale protocol defaults")
    return parent


def _template_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--objective", default="sphere",
                        help="sphere, ackley, rosenbrock or schaffer")
    parser.add_argument("--dimension", type=int, default=5)
    parser.add_argument("--linear", type=int, default=1,
                        help="number of linear constraints")
    parser.add_argument("--quadratic", type=int, default=0,
                        help="number of quadratic constraints")
    parser.add_argument("--half-width", type=float, default=5.0,
                        help="variable bounds are [-half-width, half-width]")


def _build_parser() -> argparse.ArgumentParser:
    parent = _parent_flags()
    parser = argparse.ArgumentParser(
        prog="copevolve",
        description="Evolve constraint sets that are easy or hard for an "
                    "epsilon-constrained DE solver, and report their features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[parent],
                       help="write a random constrained instance")
    _template_args(p)

    p = sub.add_parser("solve", parents=[parent], help="solve an instance JSON")
    p.add_argument("--instance", required=True)
    p.add_argument("--config", help="solver config JSON file")
    p.add_argument("--record-history", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("evolve", parents=[parent],
                       help="evolve one instance toward easy or hard")
    _template_args(p)
    p.add_argument("--direction", required=True, choices=["easy", "hard"])
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--config", help="inner solver config JSON file")

    p = sub.add_parser("features", parents=[parent],
                       help="feature CSV row for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("experiment", parents=[parent],
                       help="run an experiment plan and write the report")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("raster", parents=[parent],
                       help="0/1 feasibility grid of a 2-D instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--no-figure", action="store_true")
    return parser


def _make_spec(args) -> ev.GenomeSpec:
    template = ("linear",) * args.linear + ("quadratic",) * args.quadratic
    return ev.GenomeSpec(dimension=args.dimension, constraint_template=template)


def _bounds(args) -> Bounds:
    return Bounds.symmetric(args.dimension, args.half_width)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_generate(args) -> int:
    spec = _make_spec(args)
    rng = np.random.default_rng(args.seed)
    genome = ev.random_genome(spec, rng)
    instance = ev.decode(spec, genome, ObjectiveKind.parse(args.objective), _bounds(args))
    _emit(json.dumps(instance_to_dict(instance), indent=2) + "\n", args.out)
    return 0


def _solver_config(args, dimension: int) -> SolverConfig:
    config = paper_scale_config(dimension) if args.paper_scale \
        else desk_scale_config(dimension)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        merged = config.to_dict()
        merged.update(overrides)
        config = SolverConfig.from_dict(merged)
    return config


def _cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    config = _solver_config(args, instance.dimension)
    result = solve(instance, config, args.seed)
    _emit(result.to_json(), args.out)
    return 0


def _cmd_evolve(args) -> int:
    spec = _make_spec(args)
    bounds = _bounds(args)
    solver_config = _solver_config(args, args.dimension)
    if args.paper_scale:
        population, generations = 40, 5000
    else:
        population, generations = 8, 100
    config = ev.EvolverConfig(
        direction=args.direction,
        population_size=args.population or population,
        generations=args.generations if args.generations is not None else generations,
        solver_config=solver_config,
        seed=args.seed,
    )
    best_genome, history = ev.evolve(
        spec, ObjectiveKind.parse(args.objective), bounds, config
    )
    instance = ev.decode(spec, best_genome, ObjectiveKind.parse(args.objective), bounds)
    out_dir = args.out or "evolved"
    os.makedirs(out_dir, exist_ok=True)
    dump_instance(instance, os.path.join(out_dir, "instance.json"))
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(ev.run_metadata(config, history), fh, indent=2)
        fh.write("\n")
    print(f"final_fen={history[-1]} written to {out_dir}", file=sys.stderr)
    return 0


def _cmd_features(args) -> int:
    instance = load_instance(args.instance)
    rng = np.random.default_rng(args.seed)
    fv = feature_vector(instance, args.samples, rng)
    text = csv_header(fv.constraint_count) + "\n"
    name = os.path.splitext(os.path.basename(args.instance))[0]
    text += csv_row(name, fv) + "\n"
    _emit(text, args.out)
    return 0


def _cmd_experiment(args) -> int:
    if args.plan:
        plan = ex.load_plan(args.plan)
    elif args.paper_scale:
        plan = ex.paper_scale_plan(master_seed=args.seed)
    else:
        plan = ex.desk_scale_plan(master_seed=args.seed)
    if args.plan and args.seed:
        plan = dataclasses.replace(plan, master_seed=args.seed)
    out_dir = args.out or plan.output_dir
    report = ex.run_experiment(plan, out_dir=out_dir, workers=args.workers,
                               figures=not args.no_figures)
    for name in sorted(report.csv_paths):
        print(report.csv_paths[name], file=sys.stderr)
    return 0


def _cmd_raster(args) -> int:
    instance = load_instance(args.instance)
    grid = ex.emit_raster(instance, args.resolution)
    out = args.out or "raster.csv"
    ex.write_raster_csv(grid, out)
    if not args.no_figure:
        from . import plotting

        figure_path = os.path.splitext(out)[0] + ".png"
        plotting.render_raster_figure(grid, instance.bounds, figure_path)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "evolve": _cmd_evolve,
    "features": _cmd_features,
    "experiment": _cmd_experiment,
    "raster": _cmd_raster,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
