"""Tests for the analytic benchmarks and the synthetic floating-platform case."""

from __future__ import annotations

import json

import numpy as np
import pytest
from conftest import dense_cell

from couplekit.bench.analytic import BENCHMARKS, benchmark, quadratic_coupled
from couplekit.bench.fowt import (
    ACCEL_LIMIT,
    CHANNELS,
    THETA_LIMIT,
    fowt_space,
    synthetic_fowt,
    write_case,
)
from couplekit.errors import UnknownNameError, ValidationError
from couplekit.strategy.sequence import build_sequence

# ---------------------------------------------------------------------------
# Analytic benchmarks
# ---------------------------------------------------------------------------


class TestAnalytic:
    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_known_optimum_value(self, name):
        bench = benchmark(name)
        if bench.optimum is None:
            pytest.skip("no closed-form optimum")
        assert bench.objective(bench.optimum) == pytest.approx(bench.optimum_value, abs=1e-10)
        assert np.all(bench.optimum >= bench.space.lower)
        assert np.all(bench.optimum <= bench.space.upper)

    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_gradient_matches_objective(self, name):
        bench = benchmark(name)
        if bench.gradient is None:
            pytest.skip("no analytic gradient")
        rng = np.random.default_rng(0)
        h = 1e-6
        for x in bench.space.denormalize(rng.uniform(0.1, 0.9, size=(5, bench.space.dim))):
            fd = np.empty(x.size)
            for i in range(x.size):
                e = np.zeros(x.size)
                e[i] = h
                fd[i] = (bench.objective(x + e) - bench.objective(x - e)) / (2 * h)
            np.testing.assert_allclose(bench.gradient(x), fd, rtol=1e-5, atol=1e-6)

    def test_pair_example(self):
        bench = quadratic_coupled(2, [[0.0, 1.0], [1.0, 0.0]])
        assert bench.objective(np.array([0.5, -0.5])) == pytest.approx(0.25)
        assert bench.scale == 2.0
        assert bench.quadratic.response_slope(0, 1) == -0.5
        oracle = bench.oracle_matrices()
        assert oracle.jx[0, 1] == pytest.approx(0.5)
        assert oracle.jpsi[0, 1] == pytest.approx(0.948683, abs=1e-6)

    def test_oracle_matches_dense_grid(self):
        bench = quadratic_coupled(2, [[0.0, 1.0], [1.0, 0.0]], center=[0.1, -0.1])
        oracle = bench.oracle_matrices(n_sweep=7)
        jx, jpsi = dense_cell(bench.problem(), 0, 1, n_sweep=7)
        assert oracle.jx[0, 1] == pytest.approx(jx, abs=1e-4)
        assert oracle.jpsi[0, 1] == pytest.approx(jpsi, abs=1e-4)

    def test_zero_coupling_oracle(self):
        oracle = quadratic_coupled(3).oracle_matrices()
        off = ~np.eye(3, dtype=bool)
        assert np.all(oracle.jx[off] == 0.0)

    def test_one_strong_pair_grouped(self):
        c = np.array([[0.0, 1.5, 0.1], [1.5, 0.0, 0.1], [0.1, 0.1, 0.0]])
        plan = build_sequence(quadratic_coupled(3, c).oracle_matrices())
        assert sorted(map(len, plan.stages)) == [1, 2]
        assert {0, 1} in [set(s) for s in plan.stages]

    def test_indefinite_rejected(self):
        with pytest.raises(ValidationError):
            quadratic_coupled(2, [[0.0, 3.0], [3.0, 0.0]])

    def test_asymmetric_coupling_rejected(self):
        with pytest.raises(ValidationError):
            quadratic_coupled(2, [[0.0, 1.0], [0.5, 0.0]])

    def test_non_quadratic_has_no_oracle(self):
        with pytest.raises(ValidationError):
            benchmark("cubic_asymmetric").oracle_matrices()

    def test_unknown_benchmark(self):
        with pytest.raises(UnknownNameError):
            benchmark("rosenbrock")

    def test_bad_parameters(self):
        with pytest.raises(ValidationError):
            benchmark("separable", dims=3)


# ---------------------------------------------------------------------------
# Synthetic floating-platform case
# ---------------------------------------------------------------------------


class TestSyntheticFowt:
    def test_space(self):
        space = fowt_space()
        assert space.dim == 8
        low = space.variables[space.index("D_pnt_low")]
        assert (low.lower, low.upper, low.nominal) == (6.6148, 13.6148, 9.6148)
        assert space.variables[space.index("ps_pct")].role == "control"
        assert len(space.fixed_parameters) == 6

    def test_constraint_limits(self):
        case = synthetic_fowt(seed=0, n=20)
        assert [(c.channel, c.limit, c.direction) for c in case.constraints] == [
            ("max_theta_ptfm", THETA_LIMIT, "<="),
            ("max_a_nac", ACCEL_LIMIT, "<="),
        ]
        assert (THETA_LIMIT, ACCEL_LIMIT) == (6.9, 0.7)
        assert case.label == "synthetic"

    def test_dataset_shape_and_bounds(self):
        case = synthetic_fowt(seed=0)
        ds = case.dataset
        assert ds.n_rows == 750
        assert ds.output_names == CHANNELS
        assert np.all(ds.inputs >= case.space.lower) and np.all(ds.inputs <= case.space.upper)
        assert np.all(np.isfinite(ds.outputs))

    def test_regeneration_is_bit_identical(self):
        a = synthetic_fowt(seed=4, n=60).dataset
        b = synthetic_fowt(seed=4, n=60).dataset
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.outputs, b.outputs)

    def test_exact_problem_nominal_feasible(self):
        problem = synthetic_fowt(seed=0, n=100).exact_problem()
        u = problem.space.nominal_unit()
        assert np.all(problem.constraint_hat(u) <= 0)
        assert problem.objective_value(u) == pytest.approx(problem.reference_objective(problem.space.nominal))

    def test_write_case(self, tmp_path):
        paths = write_case(synthetic_fowt(seed=0, n=30), tmp_path)
        assert all(p.exists() for p in paths.values())
        problem = json.loads(paths["problem"].read_text())
        assert problem["objective"] == "m_ptfm"
        assert problem["model_files"]["max_a_nac"] == "models/max_a_nac.json"
        assert len(paths["data"].read_text().splitlines()) == 31
