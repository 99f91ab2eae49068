"""Constrained-optimization toolkit: an epsilon-constrained differential
evolution solver, a meta-evolver that breeds easy or hard constraint sets for
it, and the constraint features that track the difficulty."""

from .problems import (
    Bounds,
    Constraint,
    ContractViolation,
    CopInstance,
    LinearConstraint,
    ObjectiveKind,
    QuadraticConstraint,
    dump_instance,
    evaluate_constraint,
    evaluate_objective,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    transform_equality,
    violation,
)
from .solver import (
    Individual,
    Ordering,
    SolverConfig,
    SolverResult,
    STATUS_EXHAUSTED,
    STATUS_SOLVED,
    de_rand_1_exp,
    desk_scale_config,
    epsilon_compare,
    epsilon_schedule,
    gradient_mutation,
    initial_epsilon,
    paper_scale_config,
    solve,
)
from .evolver import (
    Direction,
    EvolverConfig,
    GenomeSpec,
    decode,
    encode,
    evolve,
    genome_fitness,
    newsample,
    random_genome,
    repair_genome,
)
from .features import (
    FeatureVector,
    coeff_stats,
    feasibility_ratio,
    feasibility_ratio_sharded,
    feature_vector,
    linear_distance,
    pairwise_angle,
    quadratic_distance,
    quadratic_part_stats,
)
from .experiment import (
    ExperimentPlan,
    ExperimentReport,
    derive_seed,
    desk_scale_plan,
    emit_raster,
    load_plan,
    paper_scale_plan,
    run_experiment,
    summarize,
    write_raster_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
