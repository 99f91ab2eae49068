"""Constrained continuous minimization problems.

A problem instance couples a benchmark objective with a box and a list of
inequality constraints g(x) <= 0, each either linear or a separable
(axis-aligned) quadratic.  The constraint violation of a point is the sum of
the positive parts of all constraint values; a point is feasible iff that sum
is exactly zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

# exp(1) evaluated through numpy so the Ackley terms cancel to exactly 0.0
# at the origin.
_E = float(np.exp(1.0))

DEFAULT_HALF_WIDTH = 5.0


class ContractViolation(ValueError):
    """Raised when an operation is called outside its documented contract."""


class ObjectiveKind(Enum):
    """Benchmark objectives, each shifted so the unconstrained minimum is
    exactly 0.0 at the origin."""

    SPHERE = "sphere"
    ACKLEY = "ackley"
    ROSENBROCK = "rosenbrock"
    SCHAFFER = "schaffer"

    @classmethod
    def parse(cls, tag) -> "ObjectiveKind":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ContractViolation(f"unknown objective: {tag!r}") from None


@dataclass(eq=False)
class Bounds:
    """Axis-aligned box, lower[i] < upper[i] for every coordinate."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise ContractViolation("bounds must be equal-length 1-D vectors")
        if self.lower.size < 1:
            raise ContractViolation("bounds need at least one coordinate")
        if not np.all(self.lower < self.upper):
            raise ContractViolation("each lower bound must be strictly below its upper bound")

    @property
    def dimension(self) -> int:
        return self.lower.size

    @classmethod
    def symmetric(cls, dimension: int, half_width: float = DEFAULT_HALF_WIDTH) -> "Bounds":
        if dimension < 1 or half_width <= 0:
            raise ContractViolation("dimension must be >= 1 and half_width > 0")
        w = float(half_width)
        return cls(np.full(dimension, -w), np.full(dimension, w))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform points in the box, one row per point."""
        return rng.uniform(self.lower, self.upper, size=(count, self.dimension))


@dataclass(eq=False)
class LinearConstraint:
    """g(x) = b + a . x <= 0."""

    b: float
    a: np.ndarray

    def __post_init__(self) -> None:
        self.b = float(self.b)
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.a.ndim != 1 or self.a.size < 1:
            raise ContractViolation("linear coefficient vector must be 1-D and non-empty")

    @property
    def dimension(self) -> int:
        return self.a.size

    def value(self, x: np.ndarray) -> float:
        return self.b + float(np.dot(self.a, x))

    def values(self, points: np.ndarray) -> np.ndarray:
        """Constraint values for a (m, n) array of row points."""
        return self.b + points @ self.a

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.a.copy()

    def genes(self) -> np.ndarray:
        """Flat coefficient list (b, a_1, ..., a_n)."""
        return np.concatenate(([self.b], self.a))


@dataclass(eq=False)
class QuadraticConstraint:
    """g(x) = b + sum_i (q_i x_i^2 + l_i x_i) <= 0.

    `pairs` has shape (n, 2); column 0 holds the squared-term coefficients
    q_i, column 1 the linear-term coefficients l_i.  There are no cross
    terms, so the Hessian is diagonal.
    """

    b: float
    pairs: np.ndarray

    def __post_init__(self) -> None:
        self.b = float(self.b)
        self.pairs = np.asarray(self.pairs, dtype=float)
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2 or self.pairs.shape[0] < 1:
            raise ContractViolation("quadratic coefficients must have shape (n, 2)")

    @property
    def dimension(self) -> int:
        return self.pairs.shape[0]

    @property
    def quad(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def lin(self) -> np.ndarray:
        return self.pairs[:, 1]

    def value(self, x: np.ndarray) -> float:
        return self.b + float(np.dot(self.quad, x * x) + np.dot(self.lin, x))

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.b + (points * points) @ self.quad + points @ self.lin

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.quad * x + self.lin

    def genes(self) -> np.ndarray:
        """Flat coefficient list (b, q_1, l_1, ..., q_n, l_n)."""
        return np.concatenate(([self.b], self.pairs.ravel()))


Constraint = Union[LinearConstraint, QuadraticConstraint]


def evaluate_objective(kind: ObjectiveKind, x: np.ndarray) -> float:
    """Objective value at x.  Every kind attains exactly 0.0 at the origin."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ContractViolation("x must be a non-empty 1-D vector")
    n = x.size
    if kind is ObjectiveKind.SPHERE:
        return float(np.dot(x, x))
    if kind is ObjectiveKind.ACKLEY:
        s = float(np.dot(x, x))
        c = float(np.sum(np.cos(2.0 * np.pi * x)))
        # grouped so both parentheses cancel exactly at the origin
        return float((20.0 - 20.0 * math.exp(-0.2 * math.sqrt(s / n)))
                     + (_E - math.exp(c / n)))
    if kind is ObjectiveKind.ROSENBROCK:
        # classic Rosenbrock shifted so the minimizer sits at the origin
        if n < 2:
            raise ContractViolation("rosenbrock needs dimension >= 2")
        y = x + 1.0
        return float(np.sum(100.0 * (y[1:] - y[:-1] ** 2) ** 2 + x[:-1] ** 2))
    if kind is ObjectiveKind.SCHAFFER:
        if n < 2:
            raise ContractViolation("schaffer needs dimension >= 2")
        s = x[:-1] ** 2 + x[1:] ** 2
        return float(np.sum(0.5 + (np.sin(np.sqrt(s)) ** 2 - 0.5) / (1.0 + 0.001 * s) ** 2))
    raise ContractViolation(f"unknown objective kind: {kind!r}")


def evaluate_constraint(constraint: Constraint, x: np.ndarray) -> float:
    """Scalar constraint value g(x); feasible means g(x) <= 0."""
    x = np.asarray(x, dtype=float)
    if x.shape != (constraint.dimension,):
        raise ContractViolation("point dimension does not match the constraint")
    return constraint.value(x)


def transform_equality(h_value: float, tolerance: float = 1e-4) -> float:
    """Relax an equality h(x) = 0 into the inequality |h(x)| - tolerance <= 0."""
    if not tolerance > 0:
        raise ContractViolation("equality tolerance must be positive")
    return abs(h_value) - tolerance


@dataclass(eq=False)
class CopInstance:
    """A constrained problem: objective, box bounds, inequality constraints."""

    objective: ObjectiveKind
    bounds: Bounds
    constraints: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not isinstance(self.objective, ObjectiveKind):
            self.objective = ObjectiveKind.parse(self.objective)
        # the origin is the known optimum of every objective kind
        if not (np.all(self.bounds.lower <= 0.0) and np.all(self.bounds.upper >= 0.0)):
            raise ContractViolation("bounds must contain the origin")
        for c in self.constraints:
            if c.dimension != self.bounds.dimension:
                raise ContractViolation("constraint dimension does not match the bounds")

    @property
    def dimension(self) -> int:
        return self.bounds.dimension

    @property
    def constraint_count(self) -> int:
        return len(self.constraints)

    def objective_value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ContractViolation("point dimension does not match the instance")
        return evaluate_objective(self.objective, x)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([c.value(x) for c in self.constraints], dtype=float)

    def constraint_matrix(self, points: np.ndarray) -> np.ndarray:
        """Constraint values for (m, n) row points, result shape (m, k)."""
        points = np.asarray(points, dtype=float)
        if not self.constraints:
            return np.zeros((points.shape[0], 0))
        return np.column_stack([c.values(points) for c in self.constraints])

    def violation(self, x: np.ndarray) -> float:
        return violation(self, x)

    def violations(self, points: np.ndarray) -> np.ndarray:
        g = self.constraint_matrix(points)
        return np.maximum(g, 0.0).sum(axis=1)


def violation(instance: CopInstance, x: np.ndarray) -> float:
    """Sum of positive parts of all constraint values; 0.0 iff feasible."""
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.dimension,):
        raise ContractViolation("point dimension does not match the instance")
    total = 0.0
    for c in instance.constraints:
        g = c.value(x)
        if g > 0.0:
            total += g
    return total


def _constraint_to_dict(c: Constraint) -> dict:
    if isinstance(c, LinearConstraint):
        return {"type": "linear", "b": c.b, "a": c.a.tolist()}
    if isinstance(c, QuadraticConstraint):
        return {"type": "quadratic", "b": c.b, "pairs": c.pairs.tolist()}
    raise ContractViolation(f"unknown constraint type: {type(c).__name__}")


def _constraint_from_dict(d: dict) -> Constraint:
    kind = d.get("type")
    if kind == "linear":
        return LinearConstraint(b=d["b"], a=np.asarray(d["a"], dtype=float))
    if kind == "quadratic":
        return QuadraticConstraint(b=d["b"], pairs=np.asarray(d["pairs"], dtype=float))
    raise ContractViolation(f"unknown constraint type tag: {kind!r}")


def instance_to_dict(instance: CopInstance) -> dict:
    return {
        "objective": instance.objective.value,
        "dimension": instance.dimension,
        "bounds": {
            "lower": instance.bounds.lower.tolist(),
            "upper": instance.bounds.upper.tolist(),
        },
        "constraints": [_constraint_to_dict(c) for c in instance.constraints],
    }


def instance_from_dict(d: dict) -> CopInstance:
    try:
        objective = ObjectiveKind.parse(d["objective"])
        bounds = Bounds(
            np.asarray(d["bounds"]["lower"], dtype=float),
            np.asarray(d["bounds"]["upper"], dtype=float),
        )
        constraints = [_constraint_from_dict(c) for c in d.get("constraints", [])]
        declared = int(d.get("dimension", bounds.dimension))
    except (KeyError, TypeError) as exc:
        raise ContractViolation(f"malformed instance record: {exc}") from exc
    if declared != bounds.dimension:
        raise ContractViolation("declared dimension does not match the bounds")
    return CopInstance(objective=objective, bounds=bounds, constraints=constraints)


def dump_instance(instance: CopInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


def load_instance(path) -> CopInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
