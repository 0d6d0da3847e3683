"""Tests for problem definitions and the augmented-Lagrangian optimizer."""

from __future__ import annotations

import numpy as np
import pytest

from couplekit.bench.analytic import (
    AnalyticConstraint,
    AnalyticProblem,
    constrained_linear,
    double_well,
    quadratic_coupled,
)
from couplekit.core.space import DesignSpace, DesignVariable
from couplekit.errors import UnknownNameError, ValidationError
from couplekit.optimizer.auglag import (
    OptimizationSpec,
    minimize,
    minimize_multistart,
    multistart_points,
)
from couplekit.optimizer.problem import AnalyticChannel, Constraint, ProblemDefinition


@pytest.fixture
def coupled_pair() -> ProblemDefinition:
    return quadratic_coupled(2, [[0.0, 1.0], [1.0, 0.0]], center=[0.2, -0.4]).problem()


# ---------------------------------------------------------------------------
# ProblemDefinition
# ---------------------------------------------------------------------------


class TestProblemDefinition:
    def test_objective_needs_model(self):
        space = DesignSpace((DesignVariable("x1", 0.0, 1.0, 0.5),))
        with pytest.raises(UnknownNameError):
            ProblemDefinition(space, "f", (), {})

    def test_constraint_needs_model(self):
        space = DesignSpace((DesignVariable("x1", 0.0, 1.0, 0.5),))
        f = AnalyticChannel("f", space, lambda x: float(x[0]))
        with pytest.raises(UnknownNameError):
            ProblemDefinition(space, "f", (Constraint("g", 1.0),), {"f": f})

    def test_constraint_direction(self):
        with pytest.raises(ValidationError):
            Constraint("g", 1.0, "<")

    def test_constraint_hat_sign(self):
        problem = constrained_linear().problem()
        assert problem.constraint_hat(np.array([0.2]))[0] == pytest.approx(0.1)
        assert problem.constraint_hat(np.array([0.5]))[0] == pytest.approx(-0.2)

    def test_channel_kinds_and_scaling(self):
        space = DesignSpace((DesignVariable("a", 0.0, 1.0, 0.5), DesignVariable("b", 0.0, 1.0, 0.5)))
        models = {
            "f": AnalyticChannel("f", space, lambda x: 10.0 + x[0], offset=10.0, scale=2.0),
            "g": AnalyticChannel("g", space, lambda x: x[1], offset=0.5, scale=0.25),
            "h": AnalyticChannel("h", space, lambda x: x[0] * x[1]),
        }
        problem = ProblemDefinition(space, "f", (Constraint("g", 0.75),), models)
        kinds = {name: ch.kind for name, ch in problem.channels.items()}
        assert kinds == {"f": "objective", "g": "constraint", "h": "auxiliary"}
        assert problem.channels["g"].mean == 0.5
        assert problem.channels["g"].std == 0.25
        u = np.array([0.4, 0.6])
        assert problem.objective_value(u) == pytest.approx(10.4)
        assert problem.objective_hat(u) == pytest.approx(0.2)
        # (0.6 - 0.5) / 0.25 - (0.75 - 0.5) / 0.25
        assert problem.constraint_hat(u)[0] == pytest.approx(-0.6)

    def test_finite_difference_gradient_fallback(self):
        space = DesignSpace((DesignVariable("a", 0.0, 2.0, 1.0), DesignVariable("b", -1.0, 1.0, 0.0)))
        fn = lambda x: float(x[0] ** 2 * x[1] + 3 * x[1])  # noqa: E731
        exact = AnalyticChannel("f", space, fn, lambda x: np.array([2 * x[0] * x[1], x[0] ** 2 + 3]))
        approx = AnalyticChannel("f", space, fn)
        u = np.array([0.3, 0.8])
        np.testing.assert_allclose(approx.gradient(u), exact.gradient(u), rtol=1e-6)

    def test_reordered_evaluates_identically(self, coupled_pair):
        r = coupled_pair.reordered(["x2", "x1"])
        u = np.array([0.3, 0.9])
        assert r.objective_hat(u[::-1]) == coupled_pair.objective_hat(u)
        np.testing.assert_array_equal(
            r.models["f"].gradient(u[::-1]), coupled_pair.models["f"].gradient(u)[::-1]
        )


# ---------------------------------------------------------------------------
# OptimizationSpec
# ---------------------------------------------------------------------------


class TestOptimizationSpec:
    def test_empty_free_set(self, coupled_pair):
        with pytest.raises(ValidationError):
            OptimizationSpec.build(coupled_pair, [])

    def test_unknown_variable(self, coupled_pair):
        with pytest.raises(UnknownNameError):
            OptimizationSpec.build(coupled_pair, ["x9"])

    def test_frozen_out_of_bounds(self, coupled_pair):
        with pytest.raises(ValidationError):
            OptimizationSpec.build(coupled_pair, ["x1"], {"x2": 5.0})

    def test_multistart_points(self, coupled_pair):
        spec = OptimizationSpec.build(coupled_pair, ["x1", "x2"])
        points = multistart_points(spec, 4, seed=2)
        np.testing.assert_array_equal(points[0], [0.5, 0.5])
        again = multistart_points(spec, 6, seed=2)
        for a, b in zip(points, again):
            np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# minimize / minimize_multistart
# ---------------------------------------------------------------------------


class TestMinimize:
    def test_unconstrained_quadratic(self, coupled_pair):
        result = minimize(OptimizationSpec.build(coupled_pair, ["x1", "x2"]))
        np.testing.assert_allclose(result.x, [0.2, -0.4], atol=1e-6)
        assert result.objective == pytest.approx(0.0, abs=1e-10)
        assert result.feasible
        assert result.status == "converged"

    def test_frozen_variables_stay_put(self, coupled_pair):
        result = minimize(OptimizationSpec.build(coupled_pair, ["x1"], {"x2": 0.6}))
        assert result.x[1] == pytest.approx(0.6, abs=1e-12)
        # x1* = c1 - (x2 - c2)/2
        assert result.x[0] == pytest.approx(0.2 - 0.5, abs=1e-6)

    def test_active_constraint(self):
        result = minimize(OptimizationSpec.build(constrained_linear().problem(), ["x1"]))
        assert result.x[0] == pytest.approx(0.3, abs=1e-5)
        assert result.feasible
        assert result.max_violation <= 1e-6

    def test_infeasible_problem(self):
        space = DesignSpace((DesignVariable("x1", 0.0, 1.0, 0.5),))
        bench = AnalyticProblem(
            "impossible",
            space,
            lambda x: float(x[0]),
            lambda x: np.array([1.0]),
            constraints=(AnalyticConstraint("g", lambda x: float(x[0]), -0.5, "<=", lambda x: np.array([1.0])),),
        )
        result = minimize(OptimizationSpec.build(bench.problem(), ["x1"]))
        assert not result.feasible
        assert result.status == "infeasible"
        assert result.max_violation > 0

    def test_local_minimum_from_nominal(self):
        bench = double_well()
        result = minimize(OptimizationSpec.build(bench.problem(), ["x1"]))
        assert result.x[0] == pytest.approx(bench.notes["local_minimum"], abs=1e-5)

    def test_multistart_finds_global_minimum(self):
        bench = double_well()
        result = minimize_multistart(OptimizationSpec.build(bench.problem(), ["x1"]), 10, seed=0)
        assert result.x[0] == pytest.approx(bench.optimum[0], abs=1e-5)
        assert result.objective == pytest.approx(bench.optimum_value, abs=1e-9)

    def test_single_start_equals_minimize(self):
        spec = OptimizationSpec.build(double_well().problem(), ["x1"])
        a = minimize(spec)
        b = minimize_multistart(spec, 1, seed=5)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.objective == b.objective
        assert a.evaluations == b.evaluations

    def test_best_objective_non_increasing_in_starts(self):
        spec = OptimizationSpec.build(double_well().problem(), ["x1"])
        values = [minimize_multistart(spec, n, seed=3).objective for n in (1, 2, 4, 8)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_evaluations_summed_over_starts(self):
        spec = OptimizationSpec.build(double_well().problem(), ["x1"])
        single = minimize(spec).evaluations
        assert minimize_multistart(spec, 3, seed=0).evaluations > single

    def test_bad_start_count_and_seed(self, coupled_pair):
        spec = OptimizationSpec.build(coupled_pair, ["x1"])
        with pytest.raises(ValidationError):
            minimize_multistart(spec, 0, seed=0)
        with pytest.raises(ValidationError):
            minimize_multistart(spec, 2, seed=-1)

    def test_parallel_starts_match_serial(self):
        spec = OptimizationSpec.build(double_well().problem(), ["x1"])
        a = minimize_multistart(spec, 6, seed=1, workers=1)
        b = minimize_multistart(spec, 6, seed=1, workers=3)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.evaluations == b.evaluations

    def test_reordered_problem_same_optimum(self, coupled_pair):
        a = minimize(OptimizationSpec.build(coupled_pair, ["x1"], {"x2": 0.6}))
        r = coupled_pair.reordered(["x2", "x1"])
        b = minimize(OptimizationSpec.build(r, ["x1"], {"x2": 0.6}))
        np.testing.assert_array_equal(a.x, b.x[::-1])
        assert a.objective == b.objective

    def test_result_to_dict(self, coupled_pair):
        d = minimize(OptimizationSpec.build(coupled_pair, ["x1", "x2"])).to_dict()
        assert set(d["x"]) == {"x1", "x2"}
        assert d["status"] == "converged"
