"""Constraint-set features that track how hard an instance is to solve.

For each constraint: spread statistics of its coefficient list and the
shortest Euclidean distance from the known optimum (the origin) to its zero
surface.  For each constraint pair: the angle between surface normals.  For
the whole set: the constraint count and the fraction of a small box around
the optimum that is feasible, estimated by Monte Carlo.

Distances and intersection points for quadratic surfaces are found by
multi-start Newton iterations; runs that do not converge are discarded, and
when no start converges the value is reported as an infinity sentinel (for
distances) or as missing (for angles).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .problems import (
    Bounds,
    ContractViolation,
    CopInstance,
    LinearConstraint,
    QuadraticConstraint,
)

SURFACE_TOLERANCE = 1e-9
NEWTON_TOLERANCE = 1e-10
NEWTON_MAX_ITER = 200
INTERSECTION_RESIDUAL = 1e-8
RANDOM_STARTS = 8
DEFAULT_SAMPLE_COUNT = 10**6

# fixed stream for the random Newton starts, so the geometric features are
# plain functions of their arguments
_START_SEED = 0x5EED


def coeff_stats(constraint) -> tuple:
    """(sample stddev, population stddev, variance) of the coefficient list.

    The list includes the offset b.  Variance is the population variance,
    i.e. the square of the population stddev.
    """
    return _stats(constraint.genes())


def _stats(values: np.ndarray) -> tuple:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ContractViolation("need at least 2 coefficients for spread statistics")
    sd = float(np.std(values, ddof=1))
    psd = float(np.std(values, ddof=0))
    return sd, psd, psd * psd


def quadratic_part_stats(constraint: QuadraticConstraint) -> tuple:
    """Separate (sd, psd, var) triples for the squared-term and linear-term
    coefficient lists of a quadratic constraint."""
    if not isinstance(constraint, QuadraticConstraint):
        raise ContractViolation("part statistics apply to quadratic constraints only")
    return _stats(constraint.quad), _stats(constraint.lin)


def linear_distance(constraint: LinearConstraint, point: np.ndarray) -> float:
    """Distance |a . p + b| / ||a|| from point to the hyperplane a.x + b = 0.

    A zero coefficient vector has no surface; the distance is reported as
    the +inf sentinel.
    """
    point = np.asarray(point, dtype=float)
    norm = float(np.linalg.norm(constraint.a))
    if norm == 0.0:
        return math.inf
    return abs(constraint.value(point)) / norm


def _newton_starts(point: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Axis points at the vicinity radius around `point` plus random points
    in the box: 2n + 8 starts in a fixed order."""
    n = point.size
    radius = (bounds.upper - bounds.lower) / 10.0
    starts = np.repeat(point[None, :], 2 * n, axis=0)
    for j in range(n):
        starts[2 * j, j] += radius[j]
        starts[2 * j + 1, j] -= radius[j]
    rng = np.random.default_rng(_START_SEED)
    randoms = rng.uniform(bounds.lower, bounds.upper, size=(RANDOM_STARTS, n))
    return np.vstack([starts, randoms])


def _project_to_surface(constraint: QuadraticConstraint, point: np.ndarray,
                        start: np.ndarray) -> tuple:
    """Newton on the stationarity system of min ||x - point||^2 s.t. g(x)=0.

    Unknowns are (x, lambda); returns (x, converged).
    """
    n = point.size
    q = constraint.quad
    x = start.astype(float).copy()
    lam = 0.0
    for _ in range(NEWTON_MAX_ITER):
        grad = constraint.gradient(x)
        residual = np.empty(n + 1)
        residual[:n] = 2.0 * (x - point) + lam * grad
        residual[n] = constraint.value(x)
        if np.max(np.abs(residual)) <= NEWTON_TOLERANCE:
            return x, True
        jac = np.zeros((n + 1, n + 1))
        jac[np.arange(n), np.arange(n)] = 2.0 + 2.0 * lam * q
        jac[:n, n] = grad
        jac[n, :n] = grad
        try:
            step = np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            return x, False
        if not np.all(np.isfinite(step)):
            return x, False
        x = x - step[:n]
        lam = lam - step[n]
    return x, False


def quadratic_distance(constraint: QuadraticConstraint, point: np.ndarray,
                       bounds: Bounds | None = None) -> float:
    """Shortest distance from point to the surface g(x) = 0.

    Runs Newton from every start and keeps the nearest converged projection;
    an empty (or never-found) surface yields the +inf sentinel.  The bounds
    only seed the starts, the surface itself is not box-restricted.
    """
    point = np.asarray(point, dtype=float)
    if bounds is None:
        bounds = Bounds.symmetric(point.size)
    if abs(constraint.value(point)) <= SURFACE_TOLERANCE:
        return 0.0
    best = math.inf
    for start in _newton_starts(point, bounds):
        x, ok = _project_to_surface(constraint, point, start)
        if ok and abs(constraint.value(x)) <= SURFACE_TOLERANCE:
            best = min(best, float(np.linalg.norm(x - point)))
    return best


def _surface_intersection(c1, c2, point: np.ndarray, bounds: Bounds):
    """Point with g1 = g2 = 0 nearest to `point`, or None.

    Gauss-Newton on the residual (g1, g2) from the shared multi-start set;
    candidates are accepted when g1^2 + g2^2 <= 1e-8.
    """
    best = None
    best_dist = math.inf
    for start in _newton_starts(point, bounds):
        x = start.astype(float).copy()
        ok = False
        for _ in range(NEWTON_MAX_ITER):
            residual = np.array([c1.value(x), c2.value(x)])
            sq = float(residual @ residual)
            if not math.isfinite(sq):
                break
            if sq <= 1e-20:
                ok = True
                break
            jac = np.vstack([c1.gradient(x), c2.gradient(x)])
            step, *_ = np.linalg.lstsq(jac, residual, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            x = x - step
            if float(np.linalg.norm(step)) <= 1e-14:
                ok = True
                break
        if not ok:
            continue
        residual = np.array([c1.value(x), c2.value(x)])
        if float(residual @ residual) > INTERSECTION_RESIDUAL:
            continue
        dist = float(np.linalg.norm(x - point))
        if dist < best_dist:
            best_dist = dist
            best = x
    return best


def _fold_angle(n1: np.ndarray, n2: np.ndarray):
    norm1 = float(np.linalg.norm(n1))
    norm2 = float(np.linalg.norm(n2))
    if norm1 == 0.0 or norm2 == 0.0:
        return None
    cosine = abs(float(np.dot(n1, n2))) / (norm1 * norm2)
    return math.degrees(math.acos(min(cosine, 1.0)))


def pairwise_angle(c1, c2, point: np.ndarray, bounds: Bounds | None = None):
    """Angle in degrees between the two constraint normals, folded to [0, 90].

    For two hyperplanes the coefficient vectors serve as normals.  When a
    quadratic is involved, the normals are the analytic gradients at the
    intersection of the two zero surfaces nearest to `point`; if no
    intersection is found (or a gradient vanishes there) the angle is
    missing and None is returned.
    """
    point = np.asarray(point, dtype=float)
    if isinstance(c1, LinearConstraint) and isinstance(c2, LinearConstraint):
        return _fold_angle(c1.a, c2.a)
    if bounds is None:
        bounds = Bounds.symmetric(point.size)
    meet = _surface_intersection(c1, c2, point, bounds)
    if meet is None:
        return None
    return _fold_angle(c1.gradient(meet), c2.gradient(meet))


def vicinity_box(bounds: Bounds) -> tuple:
    """Box around the origin with half-width one tenth of each variable
    range, clipped to the bounds."""
    width = (bounds.upper - bounds.lower) / 10.0
    lo = np.maximum(bounds.lower, -width)
    hi = np.minimum(bounds.upper, width)
    return lo, hi


def feasibility_ratio(instance: CopInstance, sample_count: int,
                      rng: np.random.Generator) -> float:
    """Fraction of uniform vicinity-box samples satisfying every constraint.

    All points are drawn before any evaluation, so the estimate depends only
    on the rng state and the sample count, not on the constraint order.
    """
    if sample_count < 1:
        raise ContractViolation("sample count must be at least 1")
    lo, hi = vicinity_box(instance.bounds)
    points = rng.uniform(lo, hi, size=(sample_count, instance.dimension))
    feasible = 0
    chunk = 1 << 17
    for begin in range(0, sample_count, chunk):
        block = points[begin:begin + chunk]
        values = instance.constraint_matrix(block)
        feasible += int(np.count_nonzero(np.all(values <= 0.0, axis=1)))
    return feasible / sample_count


def feasibility_ratio_sharded(instance: CopInstance, sample_count: int,
                              master_seed: int, shards: int = 16) -> float:
    """Shard the Monte Carlo estimate over independent substreams.

    The substream seeds depend only on the master seed and the shard index,
    so the result is identical however the shards are scheduled.
    """
    if shards < 1:
        raise ContractViolation("need at least one shard")
    base = sample_count // shards
    counts = [base + (1 if i < sample_count % shards else 0) for i in range(shards)]
    total = 0.0
    for index, count in enumerate(counts):
        if count == 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence((int(master_seed), index)))
        total += feasibility_ratio(instance, count, rng) * count
    return total / sample_count


@dataclass(eq=False)
class FeatureVector:
    """All features of one instance.

    `angles` holds one entry per constraint pair (i, j), i < j, in
    lexicographic pair order; missing angles are None.  `quad_parts` maps a
    constraint index to ((sd, psd, var) of its squared-term coefficients,
    (sd, psd, var) of its linear-term coefficients).
    """

    constraint_count: int
    local_feasibility_ratio: float
    distances: list
    coeff_sd: list
    coeff_psd: list
    coeff_var: list
    angles: list
    quad_parts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        k = self.constraint_count
        if len(self.angles) != k * (k - 1) // 2:
            raise ContractViolation("angle list must cover every constraint pair")
        if not 0.0 <= self.local_feasibility_ratio <= 1.0:
            raise ContractViolation("feasibility ratio must lie in [0, 1]")
        if any(d < 0 for d in self.distances):
            raise ContractViolation("distances must be non-negative")


def feature_vector(instance: CopInstance, sample_count: int = DEFAULT_SAMPLE_COUNT,
                   rng: np.random.Generator | None = None) -> FeatureVector:
    """Compute every feature of an instance; distances are taken from the
    known optimum at the origin."""
    if rng is None:
        rng = np.random.default_rng(0)
    origin = np.zeros(instance.dimension)
    distances = []
    sds, psds, variances = [], [], []
    quad_parts = {}
    for index, c in enumerate(instance.constraints):
        if isinstance(c, LinearConstraint):
            distances.append(linear_distance(c, origin))
        else:
            distances.append(quadratic_distance(c, origin, instance.bounds))
            quad_parts[index] = quadratic_part_stats(c)
        sd, psd, var = coeff_stats(c)
        sds.append(sd)
        psds.append(psd)
        variances.append(var)
    angles = [
        pairwise_angle(instance.constraints[i], instance.constraints[j], origin,
                       instance.bounds)
        for i, j in itertools.combinations(range(instance.constraint_count), 2)
    ]
    ratio = feasibility_ratio(instance, sample_count, rng)
    return FeatureVector(
        constraint_count=instance.constraint_count,
        local_feasibility_ratio=ratio,
        distances=distances,
        coeff_sd=sds,
        coeff_psd=psds,
        coeff_var=variances,
        angles=angles,
        quad_parts=quad_parts,
    )


def _format_cell(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def csv_header(max_constraints: int) -> str:
    """Header for feature rows padded to `max_constraints` constraints."""
    k = max_constraints
    columns = ["instance_id", "constraint_count", "ratio"]
    columns += [f"dist_{i}" for i in range(1, k + 1)]
    columns += [f"sd_{i}" for i in range(1, k + 1)]
    columns += [f"psd_{i}" for i in range(1, k + 1)]
    columns += [f"var_{i}" for i in range(1, k + 1)]
    columns += [f"angle_{i}_{j}" for i, j in itertools.combinations(range(1, k + 1), 2)]
    return ",".join(columns)


def csv_row(instance_id: str, features: FeatureVector, max_constraints: int | None = None) -> str:
    """One feature row; short instances leave the padding columns empty."""
    k = max_constraints if max_constraints is not None else features.constraint_count
    if features.constraint_count > k:
        raise ContractViolation("row has more constraints than the header allows")
    pad = k - features.constraint_count
    cells = [str(instance_id), str(features.constraint_count),
             _format_cell(features.local_feasibility_ratio)]
    for values in (features.distances, features.coeff_sd, features.coeff_psd,
                   features.coeff_var):
        cells += [_format_cell(v) for v in values] + [""] * pad
    angle_map = {
        pair: value
        for pair, value in zip(
            itertools.combinations(range(1, features.constraint_count + 1), 2),
            features.angles,
        )
    }
    for pair in itertools.combinations(range(1, k + 1), 2):
        cells.append(_format_cell(angle_map.get(pair)))
    return ",".join(cells)
