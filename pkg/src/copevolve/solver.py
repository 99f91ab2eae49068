"""Epsilon-constrained differential evolution with an archive and
gradient-based repair of infeasible children.

The solver ranks candidates by an epsilon-level comparison: points whose
constraint violation is at most the current level eps count as feasible and
are ordered by objective value, everything else is ordered by violation.  The
level starts at a quantile of the violations seen in a random archive and
decays to zero at a control generation, after which the comparison is the
standard lexicographic (violation, objective) order.

A run stops as soon as the best point is exactly feasible with |f| within
``success_tolerance`` (the known optimum value is 0), or when the evaluation
budget ``fen_max`` runs out.  The FEN of a run counts every candidate point
that was fully evaluated, including archive initialization and the
re-evaluations inside gradient-based repair.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import _kernels
from .problems import (
    Bounds,
    ContractViolation,
    CopInstance,
    LinearConstraint,
    ObjectiveKind,
    QuadraticConstraint,
    violation,
)

STATUS_SOLVED = "Solved"
STATUS_EXHAUSTED = "Exhausted"

_OBJECTIVE_IDS = {
    ObjectiveKind.SPHERE: _kernels.OBJ_SPHERE,
    ObjectiveKind.ACKLEY: _kernels.OBJ_ACKLEY,
    ObjectiveKind.ROSENBROCK: _kernels.OBJ_ROSENBROCK,
    ObjectiveKind.SCHAFFER: _kernels.OBJ_SCHAFFER,
}


class Ordering(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(eq=False)
class Individual:
    """A candidate point with its cached objective value and violation."""

    x: np.ndarray
    f: float
    phi: float

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.f = float(self.f)
        self.phi = float(self.phi)
        if self.phi < 0.0:
            raise ContractViolation("violation must be non-negative")

    @classmethod
    def evaluate(cls, instance: CopInstance, x: np.ndarray) -> "Individual":
        x = np.asarray(x, dtype=float)
        return cls(x=x, f=instance.objective_value(x), phi=violation(instance, x))


def epsilon_compare(lhs: tuple, rhs: tuple, eps: float) -> Ordering:
    """Order two (f, phi) pairs under the epsilon-level comparison.

    If both violations are within eps, or the violations are equal, the
    objective values decide; otherwise the violations decide.
    """
    f1, p1 = float(lhs[0]), float(lhs[1])
    f2, p2 = float(rhs[0]), float(rhs[1])
    if eps < 0.0 or p1 < 0.0 or p2 < 0.0:
        raise ContractViolation("eps and violations must be non-negative")
    if (p1 <= eps and p2 <= eps) or p1 == p2:
        a, b = f1, f2
    else:
        a, b = p1, p2
    if a < b:
        return Ordering.LESS
    if a > b:
        return Ordering.GREATER
    return Ordering.EQUAL


def epsilon_schedule(t: int, eps0: float, control_generation: int, exponent: float = 5.0) -> float:
    """Level at generation t: eps0 * (1 - t/Tc)^cp before Tc, 0 afterwards."""
    if t < 0 or eps0 < 0.0 or control_generation <= 0:
        raise ContractViolation("need t >= 0, eps0 >= 0 and a positive control generation")
    if t >= control_generation:
        return 0.0
    return eps0 * (1.0 - t / control_generation) ** exponent


def initial_epsilon(archive: list, level_fraction: float) -> float:
    """Violation of the ceil(q*M)-th best archive member ranked by violation."""
    if not archive:
        raise ContractViolation("archive must be non-empty")
    if not 0.0 < level_fraction <= 1.0:
        raise ContractViolation("level fraction must be in (0, 1]")
    m = len(archive)
    rank = int(math.ceil(level_fraction * m - 1e-12))
    rank = min(max(rank, 1), m)
    phis = np.sort(np.array([ind.phi for ind in archive], dtype=float))
    return float(phis[rank - 1])


def de_rand_1_exp(
    target_index: int,
    population: list,
    scale_factor: float,
    crossover_rate: float,
    rng: np.random.Generator,
    bounds: Bounds | None = None,
) -> np.ndarray:
    """DE/rand/1 with exponential crossover.

    The trial vector copies the target except on a contiguous wrapping block
    that starts at a random coordinate and keeps extending while uniform
    draws stay within the crossover rate; blocked coordinates come from
    x_r3 + F * (x_r1 - x_r2).  At least one coordinate is always donated.
    """
    size = len(population)
    if size < 4:
        raise ContractViolation("population must hold at least 4 individuals")
    if not 0 <= target_index < size:
        raise ContractViolation("target index out of range")
    r1 = int(rng.integers(0, size))
    while r1 == target_index:
        r1 = int(rng.integers(0, size))
    r2 = int(rng.integers(0, size))
    while r2 == target_index or r2 == r1:
        r2 = int(rng.integers(0, size))
    r3 = int(rng.integers(0, size))
    while r3 == target_index or r3 == r1 or r3 == r2:
        r3 = int(rng.integers(0, size))

    x_t = population[target_index].x
    x1, x2, x3 = population[r1].x, population[r2].x, population[r3].x
    n = x_t.size
    start = int(rng.integers(0, n))
    length = 1
    while length < n and rng.random() <= crossover_rate:
        length += 1
    trial = x_t.copy()
    idx = (start + np.arange(length)) % n
    trial[idx] = x3[idx] + scale_factor * (x1[idx] - x2[idx])
    if bounds is not None:
        trial = bounds.clip(trial)
    return trial


def gradient_mutation(x: np.ndarray, instance: CopInstance, repeats: int) -> np.ndarray:
    """Repair an infeasible point by Newton steps on the violated constraints.

    Each repeat solves J dx = C in the least-squares (pseudo-inverse) sense,
    where C holds the positive constraint values and J their analytic
    gradients, then moves x <- clip(x - dx).  Stops early once feasible or
    when every violated gradient is zero.
    """
    x = np.asarray(x, dtype=float).copy()
    if repeats < 0:
        raise ContractViolation("repeat count must be non-negative")
    g = instance.constraint_values(x)
    if not np.any(g > 0.0):
        raise ContractViolation("gradient mutation expects an infeasible point")
    for _ in range(repeats):
        mask = g > 0.0
        if not np.any(mask):
            break
        jac = np.array(
            [c.gradient(x) for c, m in zip(instance.constraints, mask) if m],
            dtype=float,
        )
        if not np.any(jac):
            break
        dx = np.linalg.lstsq(jac, g[mask], rcond=None)[0]
        x = instance.bounds.clip(x - dx)
        g = instance.constraint_values(x)
    return x


@dataclass
class SolverConfig:
    """Knobs of one solver run; see the module docstring for their roles."""

    population_size: int = 40
    archive_size: int = 500
    generations: int = 1500
    crossover_rate: float = 0.5
    scale_factor: float = 0.9
    epsilon_control_generation: int = 1000
    initial_level_fraction: float = 0.9
    gradient_mutation_rate: float = 0.2
    gradient_mutation_repeats: int = 3
    schedule_exponent: float = 5.0
    fen_max: int = 300_000
    success_tolerance: float = 1e-12

    def validate(self) -> None:
        if self.population_size < 4:
            raise ContractViolation("population size must be at least 4")
        if self.archive_size < self.population_size:
            raise ContractViolation("archive size must be at least the population size")
        if self.generations < 0:
            raise ContractViolation("generations must be non-negative")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ContractViolation("crossover rate must lie in [0, 1]")
        if not self.scale_factor > 0.0:
            raise ContractViolation("scale factor must be positive")
        if self.epsilon_control_generation <= 0:
            raise ContractViolation("control generation must be positive")
        if self.epsilon_control_generation > max(self.generations, 1):
            raise ContractViolation("control generation must not exceed generations")
        if not 0.0 < self.initial_level_fraction <= 1.0:
            raise ContractViolation("initial level fraction must lie in (0, 1]")
        if not 0.0 <= self.gradient_mutation_rate <= 1.0:
            raise ContractViolation("gradient mutation rate must lie in [0, 1]")
        if self.gradient_mutation_repeats < 0:
            raise ContractViolation("gradient mutation repeats must be non-negative")
        if not self.schedule_exponent > 0.0:
            raise ContractViolation("schedule exponent must be positive")
        if self.fen_max < 1:
            raise ContractViolation("fen_max must be at least 1")
        if self.success_tolerance < 0.0:
            raise ContractViolation("success tolerance must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ContractViolation(f"unknown solver config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


def paper_scale_config(dimension: int) -> SolverConfig:
    """Full-scale solver settings (archive of 100 points per dimension)."""
    return SolverConfig(archive_size=100 * dimension)


def desk_scale_config(dimension: int) -> SolverConfig:
    """Laptop-scale solver settings with a 50,000-evaluation budget.

    The epsilon horizon is much shorter than at full scale: runs at this
    budget finish within a few hundred generations, and the level must reach
    zero early enough for constraint pressure to express in the FEN.
    """
    fen_max = 50_000
    pop = 40
    return SolverConfig(
        archive_size=100 * dimension,
        generations=int(math.ceil(fen_max / pop)) + 1,
        epsilon_control_generation=50,
        fen_max=fen_max,
    )


@dataclass(eq=False)
class SolverResult:
    status: str
    best: Individual
    fen: int
    epsilon_trace: list

    @property
    def solved(self) -> bool:
        return self.status == STATUS_SOLVED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "fen": self.fen,
            "best_x": self.best.x.tolist(),
            "best_f": self.best.f,
            "best_phi": self.best.phi,
            "epsilon_trace": [[int(t), float(e)] for t, e in self.epsilon_trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _marshal_constraints(instance: CopInstance):
    n = instance.dimension
    lin = [c for c in instance.constraints if isinstance(c, LinearConstraint)]
    quad = [c for c in instance.constraints if isinstance(c, QuadraticConstraint)]
    lin_a = np.array([c.a for c in lin], dtype=float).reshape(len(lin), n)
    lin_b = np.array([c.b for c in lin], dtype=float)
    quad_q = np.array([c.quad for c in quad], dtype=float).reshape(len(quad), n)
    quad_l = np.array([c.lin for c in quad], dtype=float).reshape(len(quad), n)
    quad_b = np.array([c.b for c in quad], dtype=float)
    return lin_a, lin_b, quad_q, quad_l, quad_b


def solve(
    instance: CopInstance,
    config: SolverConfig,
    seed: int,
    record_history: bool = False,
) -> SolverResult:
    """Run one solve; deterministic in (instance, config, seed).

    With ``record_history`` the result carries a ``history`` attribute:
    (f, phi) population snapshots taken after initialization and after each
    generation, used by the elitism property tests.
    """
    config.validate()
    # trips the dimension checks (rosenbrock and schaffer need n >= 2)
    instance.objective_value(np.zeros(instance.dimension))
    lin_a, lin_b, quad_q, quad_l, quad_b = _marshal_constraints(instance)
    out = _kernels.solve_kernel(
        _OBJECTIVE_IDS[instance.objective],
        lin_a,
        lin_b,
        quad_q,
        quad_l,
        quad_b,
        instance.bounds.lower,
        instance.bounds.upper,
        config.population_size,
        config.archive_size,
        config.generations,
        config.crossover_rate,
        config.scale_factor,
        config.epsilon_control_generation,
        config.initial_level_fraction,
        config.gradient_mutation_rate,
        config.gradient_mutation_repeats,
        config.schedule_exponent,
        config.fen_max,
        config.success_tolerance,
        int(seed) & 0xFFFFFFFF,
        1 if record_history else 0,
    )
    (code, fen, best_x, best_f, best_phi, eps_trace, trace_len,
     hist_f, hist_phi, hist_len) = out
    status = STATUS_SOLVED if code == _kernels.STATUS_SOLVED else STATUS_EXHAUSTED
    best = Individual(x=best_x.copy(), f=best_f, phi=best_phi)
    trace = [(t, float(eps_trace[t])) for t in range(trace_len)]
    result = SolverResult(status=status, best=best, fen=int(fen), epsilon_trace=trace)
    if record_history:
        result.history = (hist_f[:hist_len].copy(), hist_phi[:hist_len].copy())
    return result
