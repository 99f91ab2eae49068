import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from copevolve.problems import (
    Bounds,
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

ALL_KINDS = list(ObjectiveKind)


def test_every_objective_is_exactly_zero_at_origin():
    for kind in ALL_KINDS:
        for n in (2, 5, 10, 30):
            assert evaluate_objective(kind, np.zeros(n)) == 0.0


def test_sphere_hand_value():
    assert evaluate_objective(ObjectiveKind.SPHERE, np.array([1.0, 2.0])) == 5.0


def test_rosenbrock_shifted_hand_value():
    # at x = (1, 0): y = (2, 1), 100*(1-4)^2 + 1^2 = 901
    x = np.array([1.0, 0.0])
    assert_allclose(evaluate_objective(ObjectiveKind.ROSENBROCK, x), 901.0, rtol=1e-13)


def test_schaffer_pair_structure():
    # one pair with x1^2 + x2^2 = s: 0.5 + (sin^2(sqrt(s)) - 0.5)/(1 + 0.001 s)^2
    x = np.array([3.0, 4.0])
    s = 25.0
    expected = 0.5 + (math.sin(5.0) ** 2 - 0.5) / (1.0 + 0.001 * s) ** 2
    assert_allclose(evaluate_objective(ObjectiveKind.SCHAFFER, x), expected, rtol=1e-13)


def test_ackley_away_from_origin_is_positive():
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = rng.uniform(-5, 5, size=6)
        if np.linalg.norm(x) > 1e-3:
            assert evaluate_objective(ObjectiveKind.ACKLEY, x) > 0.0


def test_objective_kind_parse():
    assert ObjectiveKind.parse("Sphere") is ObjectiveKind.SPHERE
    assert ObjectiveKind.parse(ObjectiveKind.ACKLEY) is ObjectiveKind.ACKLEY
    with pytest.raises(ContractViolation):
        ObjectiveKind.parse("griewank")


def test_low_dimension_objective_rejected():
    with pytest.raises(ContractViolation):
        evaluate_objective(ObjectiveKind.ROSENBROCK, np.array([1.0]))
    with pytest.raises(ContractViolation):
        evaluate_objective(ObjectiveKind.SCHAFFER, np.array([1.0]))


def test_linear_constraint_examples():
    c = LinearConstraint(b=-2.0, a=np.array([1.0, 1.0]))
    assert evaluate_constraint(c, np.array([0.0, 0.0])) == -2.0
    assert evaluate_constraint(c, np.array([1.0, 1.0])) == 0.0


def test_quadratic_constraint_example():
    c = QuadraticConstraint(b=-1.0, pairs=np.array([[1.0, 0.0]]))
    assert evaluate_constraint(c, np.array([2.0])) == 3.0


def test_constraint_dimension_mismatch():
    c = LinearConstraint(b=0.0, a=np.array([1.0, 1.0]))
    with pytest.raises(ContractViolation):
        evaluate_constraint(c, np.array([1.0, 2.0, 3.0]))


def test_linear_affine_identity():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = rng.integers(2, 8)
        c = LinearConstraint(b=rng.uniform(-5, 0), a=rng.uniform(-5, 5, size=n))
        x = rng.uniform(-5, 5, size=n)
        y = rng.uniform(-5, 5, size=n)
        alpha = rng.uniform(0, 1)
        lhs = c.value(alpha * x + (1 - alpha) * y)
        rhs = alpha * c.value(x) + (1 - alpha) * c.value(y)
        assert abs(lhs - rhs) <= 1e-9


def test_quadratic_matches_direct_sum_oracle():
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        pairs = rng.uniform(-5, 5, size=(n, 2))
        b = rng.uniform(-5, 0)
        c = QuadraticConstraint(b=b, pairs=pairs)
        x = rng.uniform(-5, 5, size=n)
        direct = b
        for i in range(n):
            direct += pairs[i, 0] * x[i] ** 2 + pairs[i, 1] * x[i]
        assert_allclose(c.value(x), direct, rtol=1e-12)


def test_violation_examples():
    bounds = Bounds.symmetric(2)
    feasible = CopInstance(
        objective=ObjectiveKind.SPHERE,
        bounds=bounds,
        constraints=[LinearConstraint(b=-2.0, a=np.array([1.0, 1.0]))],
    )
    assert violation(feasible, np.array([0.0, 0.0])) == 0.0

    two = CopInstance(
        objective=ObjectiveKind.SPHERE,
        bounds=bounds,
        constraints=[
            LinearConstraint(b=1.5, a=np.zeros(2)),
            LinearConstraint(b=-3.0, a=np.zeros(2)),
        ],
    )
    assert violation(two, np.array([0.5, 0.5])) == 1.5

    both = CopInstance(
        objective=ObjectiveKind.SPHERE,
        bounds=bounds,
        constraints=[
            LinearConstraint(b=1.0, a=np.zeros(2)),
            LinearConstraint(b=2.0, a=np.zeros(2)),
        ],
    )
    assert violation(both, np.array([0.0, 0.0])) == 3.0


def test_violation_matches_per_constraint_check():
    rng = np.random.default_rng(13)
    bounds = Bounds.symmetric(4)
    constraints = [
        LinearConstraint(b=rng.uniform(-5, 0), a=rng.uniform(-5, 5, size=4))
        for _ in range(3)
    ] + [
        QuadraticConstraint(b=rng.uniform(-5, 0), pairs=rng.uniform(-5, 5, size=(4, 2)))
        for _ in range(2)
    ]
    instance = CopInstance(objective=ObjectiveKind.ACKLEY, bounds=bounds,
                           constraints=constraints)
    for _ in range(1000):
        x = rng.uniform(-5, 5, size=4)
        brute = sum(max(0.0, c.value(x)) for c in constraints)
        phi = violation(instance, x)
        assert phi >= 0.0
        assert_allclose(phi, brute, rtol=1e-12, atol=0.0)
        if all(c.value(x) <= 0.0 for c in constraints):
            assert phi == 0.0


def test_transform_equality():
    assert transform_equality(0.0, 1e-4) == -1e-4
    assert transform_equality(1e-4, 1e-4) == 0.0
    assert_allclose(transform_equality(0.5, 1e-4), 0.4999)
    with pytest.raises(ContractViolation):
        transform_equality(1.0, 0.0)


def test_bounds_validation():
    with pytest.raises(ContractViolation):
        Bounds(np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ContractViolation):
        Bounds(np.array([0.0]), np.array([1.0, 2.0]))
    b = Bounds.symmetric(3, 2.5)
    assert b.dimension == 3
    assert b.contains(np.zeros(3))
    assert not b.contains(np.array([0.0, 0.0, 3.0]))
    assert_allclose(b.clip(np.array([5.0, -5.0, 1.0])), [2.5, -2.5, 1.0])


def test_instance_requires_origin_inside_bounds():
    with pytest.raises(ContractViolation):
        CopInstance(
            objective=ObjectiveKind.SPHERE,
            bounds=Bounds(np.array([1.0, 1.0]), np.array([2.0, 2.0])),
            constraints=[],
        )


def test_instance_constraint_dimension_checked():
    with pytest.raises(ContractViolation):
        CopInstance(
            objective=ObjectiveKind.SPHERE,
            bounds=Bounds.symmetric(3),
            constraints=[LinearConstraint(b=0.0, a=np.ones(2))],
        )


def test_instance_json_round_trip(tmp_path):
    instance = CopInstance(
        objective=ObjectiveKind.ROSENBROCK,
        bounds=Bounds.symmetric(3),
        constraints=[
            LinearConstraint(b=-1.25, a=np.array([0.5, -2.0, 3.75])),
            QuadraticConstraint(b=-0.5, pairs=np.array([[1.0, 2.0], [0.0, -1.5], [4.0, 0.25]])),
        ],
    )
    d = instance_to_dict(instance)
    assert list(d.keys()) == ["objective", "dimension", "bounds", "constraints"]
    assert d["constraints"][0]["type"] == "linear"
    assert d["constraints"][1]["type"] == "quadratic"

    back = instance_from_dict(json.loads(json.dumps(d)))
    assert instance_to_dict(back) == d

    path = tmp_path / "instance.json"
    dump_instance(instance, path)
    loaded = load_instance(path)
    assert instance_to_dict(loaded) == d


def test_instance_from_dict_rejects_bad_records():
    with pytest.raises(ContractViolation):
        instance_from_dict({"objective": "sphere"})
    good = instance_to_dict(CopInstance(ObjectiveKind.SPHERE, Bounds.symmetric(2), []))
    bad = dict(good, dimension=7)
    with pytest.raises(ContractViolation):
        instance_from_dict(bad)
    bad = dict(good, constraints=[{"type": "cubic", "b": 0.0}])
    with pytest.raises(ContractViolation):
        instance_from_dict(bad)


def test_batch_evaluation_matches_scalar():
    rng = np.random.default_rng(14)
    constraints = [
        LinearConstraint(b=-1.0, a=rng.uniform(-5, 5, size=3)),
        QuadraticConstraint(b=-2.0, pairs=rng.uniform(-5, 5, size=(3, 2))),
    ]
    instance = CopInstance(ObjectiveKind.SPHERE, Bounds.symmetric(3), constraints)
    points = rng.uniform(-5, 5, size=(40, 3))
    matrix = instance.constraint_matrix(points)
    assert matrix.shape == (40, 2)
    for row, x in zip(matrix, points):
        for j, c in enumerate(constraints):
            assert_allclose(row[j], c.value(x), rtol=1e-12)
    vio = instance.violations(points)
    for v, x in zip(vio, points):
        assert_allclose(v, violation(instance, x), rtol=1e-12, atol=0.0)


def test_genes_layout():
    lin = LinearConstraint(b=-1.0, a=np.array([2.0, 3.0]))
    assert_allclose(lin.genes(), [-1.0, 2.0, 3.0])
    quad = QuadraticConstraint(b=-2.0, pairs=np.array([[1.0, 4.0], [2.0, 5.0]]))
    assert_allclose(quad.genes(), [-2.0, 1.0, 4.0, 2.0, 5.0])
