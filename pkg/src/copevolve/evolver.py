"""Meta-evolution of constraint sets.

An outer differential evolution searches the space of constraint
coefficients; the fitness of a genome is the number of function evaluations
(FEN) the inner solver needs on the decoded instance.  Minimizing FEN breeds
instances that are easy for the solver, maximizing it breeds hard ones.

A genome is a flat vector holding, for each templated constraint, its offset
b followed by its coefficients (n for a linear constraint, 2n interleaved as
q_1, l_1, ..., q_n, l_n for a quadratic).  Offsets are kept non-positive so
the origin, the known optimum of every objective, stays feasible in every
instance the evolver can produce.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .problems import (
    Bounds,
    ContractViolation,
    CopInstance,
    LinearConstraint,
    ObjectiveKind,
    QuadraticConstraint,
)
from .solver import SolverConfig, solve

LINEAR_TAG = "linear"
QUADRATIC_TAG = "quadratic"


class Direction(enum.Enum):
    EASY = "easy"
    HARD = "hard"

    @classmethod
    def parse(cls, tag) -> "Direction":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ContractViolation(f"unknown direction: {tag!r}") from None


def _normalize_tag(tag: str) -> str:
    t = str(tag).lower()
    if t in (LINEAR_TAG, "l"):
        return LINEAR_TAG
    if t in (QUADRATIC_TAG, "q"):
        return QUADRATIC_TAG
    raise ContractViolation(f"unknown constraint tag: {tag!r}")


@dataclass(eq=False)
class GenomeSpec:
    """Shape of the evolved constraint set and the coefficient box."""

    dimension: int
    constraint_template: tuple
    coeff_lower: float = -5.0
    coeff_upper: float = 5.0

    def __post_init__(self) -> None:
        self.dimension = int(self.dimension)
        self.constraint_template = tuple(
            _normalize_tag(t) for t in self.constraint_template
        )
        self.coeff_lower = float(self.coeff_lower)
        self.coeff_upper = float(self.coeff_upper)
        if self.dimension < 1:
            raise ContractViolation("dimension must be at least 1")
        if not self.constraint_template:
            raise ContractViolation("template must name at least one constraint")
        if not self.coeff_lower < self.coeff_upper:
            raise ContractViolation("coefficient bounds must satisfy lower < upper")
        if self.coeff_lower > 0.0:
            raise ContractViolation("coefficient lower bound must allow b <= 0")

    def _widths(self) -> list:
        n = self.dimension
        return [1 + (n if t == LINEAR_TAG else 2 * n) for t in self.constraint_template]

    @property
    def genome_length(self) -> int:
        return sum(self._widths())

    @property
    def offset_gene_indices(self) -> np.ndarray:
        """Positions of the b genes inside the flat genome."""
        starts = np.cumsum([0] + self._widths()[:-1])
        return starts.astype(int)

    def template_code(self) -> str:
        """Compact tag such as 3L or 2L1Q used in file names and reports."""
        nl = self.constraint_template.count(LINEAR_TAG)
        nq = self.constraint_template.count(QUADRATIC_TAG)
        code = ""
        if nl:
            code += f"{nl}L"
        if nq:
            code += f"{nq}Q"
        return code


def random_genome(spec: GenomeSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform genome in the coefficient box, b genes limited to [lower, 0]."""
    genome = rng.uniform(spec.coeff_lower, spec.coeff_upper, size=spec.genome_length)
    offs = spec.offset_gene_indices
    genome[offs] = rng.uniform(spec.coeff_lower, 0.0, size=offs.size)
    return genome


def repair_genome(spec: GenomeSpec, genome: np.ndarray) -> np.ndarray:
    """Clamp genes into the coefficient box and b genes additionally to <= 0."""
    repaired = np.clip(genome, spec.coeff_lower, spec.coeff_upper)
    offs = spec.offset_gene_indices
    repaired[offs] = np.minimum(repaired[offs], 0.0)
    return repaired


def genome_is_valid(spec: GenomeSpec, genome: np.ndarray) -> bool:
    if genome.shape != (spec.genome_length,):
        return False
    if np.any(genome < spec.coeff_lower) or np.any(genome > spec.coeff_upper):
        return False
    return not np.any(genome[spec.offset_gene_indices] > 0.0)


def decode(
    spec: GenomeSpec,
    genome: np.ndarray,
    objective: ObjectiveKind,
    bounds: Bounds,
) -> CopInstance:
    """Build the instance whose constraints the genome encodes."""
    genome = np.asarray(genome, dtype=float)
    if genome.shape != (spec.genome_length,):
        raise ContractViolation("genome length does not match the spec")
    if bounds.dimension != spec.dimension:
        raise ContractViolation("bounds dimension does not match the spec")
    n = spec.dimension
    constraints = []
    pos = 0
    for tag in spec.constraint_template:
        b = genome[pos]
        pos += 1
        if tag == LINEAR_TAG:
            constraints.append(LinearConstraint(b=b, a=genome[pos:pos + n].copy()))
            pos += n
        else:
            pairs = genome[pos:pos + 2 * n].reshape(n, 2).copy()
            constraints.append(QuadraticConstraint(b=b, pairs=pairs))
            pos += 2 * n
    return CopInstance(objective=objective, bounds=bounds, constraints=constraints)


def encode(instance: CopInstance) -> np.ndarray:
    """Flat gene vector of an instance's constraints (decode round-trip)."""
    if not instance.constraints:
        raise ContractViolation("instance has no constraints to encode")
    return np.concatenate([c.genes() for c in instance.constraints])


def genome_fitness(
    genome: np.ndarray,
    spec: GenomeSpec,
    objective: ObjectiveKind,
    bounds: Bounds,
    solver_config: SolverConfig,
    seed: int,
) -> int:
    """FEN the solver needs on the decoded instance; fen_max when unsolved."""
    instance = decode(spec, genome, objective, bounds)
    result = solve(instance, solver_config, seed)
    return result.fen if result.solved else solver_config.fen_max


BINOMIAL_RULE = "binomial"
LITERAL_AND_RULE = "literal_and"


def newsample(
    target: np.ndarray,
    population: list,
    scale_factor: float,
    crossover_rate: float,
    rng: np.random.Generator,
    spec: GenomeSpec,
    rule: str = BINOMIAL_RULE,
) -> np.ndarray:
    """One DE/rand/1 genome sample with per-gene crossover and repair.

    Three mutually distinct donors are drawn (skipping the target when it is
    a population member), then a cutpoint c and one uniform draw per gene.
    Under the default binomial rule gene i takes the donor expression
    P3_i + F * (P1_i - P2_i) when i == c or draw_i <= CR; the literal_and
    rule fires only when both conditions hold, which leaves at most one gene
    changed and is kept for comparison.
    """
    if len(population) < 4:
        raise ContractViolation("population must hold at least 4 genomes")
    if rule not in (BINOMIAL_RULE, LITERAL_AND_RULE):
        raise ContractViolation(f"unknown crossover rule: {rule!r}")
    size = len(population)
    target_index = -1
    for i, member in enumerate(population):
        if member is target:
            target_index = i
            break

    def draw(*taken):
        r = int(rng.integers(0, size))
        while r in taken or r == target_index:
            r = int(rng.integers(0, size))
        return r

    r1 = draw()
    r2 = draw(r1)
    r3 = draw(r1, r2)
    length = spec.genome_length
    cut = int(rng.integers(0, length))
    draws = rng.random(length)
    if rule == BINOMIAL_RULE:
        fire = (draws <= crossover_rate) | (np.arange(length) == cut)
    else:
        fire = (draws <= crossover_rate) & (np.arange(length) == cut)
    donor = population[r3] + scale_factor * (population[r1] - population[r2])
    sample = np.where(fire, donor, target)
    return repair_genome(spec, sample)


@dataclass(eq=False)
class EvolverConfig:
    direction: Direction
    population_size: int = 40
    generations: int = 5000
    crossover_rate: float = 0.5
    scale_factor: float = 0.9
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    crossover_rule: str = BINOMIAL_RULE

    def __post_init__(self) -> None:
        self.direction = Direction.parse(self.direction)

    def validate(self) -> None:
        if self.population_size < 4:
            raise ContractViolation("evolver population must be at least 4")
        if self.generations < 0:
            raise ContractViolation("generations must be non-negative")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ContractViolation("crossover rate must lie in [0, 1]")
        if not self.scale_factor > 0.0:
            raise ContractViolation("scale factor must be positive")
        if self.crossover_rule not in (BINOMIAL_RULE, LITERAL_AND_RULE):
            raise ContractViolation(f"unknown crossover rule: {self.crossover_rule!r}")
        self.solver_config.validate()


def evolve(
    spec: GenomeSpec,
    objective: ObjectiveKind,
    bounds: Bounds,
    config: EvolverConfig,
) -> tuple:
    """Run the outer DE and return (best genome, per-generation best FEN).

    Cost is FEN for the easy direction and -FEN for hard, replacement keeps
    a trial genome whenever its cost does not exceed its parent's, so the
    population best never worsens.  Every genome is evaluated with the same
    fixed solver seed, which makes the fitness landscape, and therefore the
    whole run, deterministic in the evolver seed.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    sign = 1.0 if config.direction is Direction.EASY else -1.0
    cache: dict = {}

    def cost(genome: np.ndarray) -> float:
        key = genome.tobytes()
        if key not in cache:
            cache[key] = sign * genome_fitness(
                genome, spec, objective, bounds, config.solver_config, config.seed
            )
        return cache[key]

    population = [random_genome(spec, rng) for _ in range(config.population_size)]
    costs = [cost(g) for g in population]
    history = [int(sign * min(costs))]
    for _ in range(config.generations):
        for i in range(config.population_size):
            trial = newsample(
                population[i],
                population,
                config.scale_factor,
                config.crossover_rate,
                rng,
                spec,
                config.crossover_rule,
            )
            assert genome_is_valid(spec, trial)
            trial_cost = cost(trial)
            if trial_cost <= costs[i]:
                population[i] = trial
                costs[i] = trial_cost
        history.append(int(sign * min(costs)))
    best_index = int(np.argmin(costs))
    return population[best_index], history


def run_metadata(config: EvolverConfig, history: list) -> dict:
    """Metadata record written next to an evolved instance."""
    return {
        "direction": config.direction.value,
        "seed": int(config.seed),
        "final_fen": int(history[-1]),
        "generations": int(config.generations),
        "fitness_history": [int(v) for v in history],
    }
