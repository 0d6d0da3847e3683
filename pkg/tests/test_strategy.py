"""Tests for sequence planning, subset selection and strategy comparison."""

from __future__ import annotations

import numpy as np
import pytest
from conftest import PLATFORM_NAMES

from couplekit.bench.analytic import (
    AnalyticConstraint,
    AnalyticProblem,
    influence_benchmark,
    quadratic_coupled,
    separable,
    sequence_benchmark,
)
from couplekit.core.space import DesignSpace, DesignVariable
from couplekit.dca.report import CouplingReport
from couplekit.dca.sweep import SweepConfig, coupling_matrices
from couplekit.errors import InfeasibleStageError, ValidationError
from couplekit.optimizer.auglag import OptimizationSpec, minimize_multistart
from couplekit.strategy.compare import (
    TABLE_COLUMNS,
    CompareConfig,
    all_sequences,
    compare_strategies,
    distinct_sequence_count,
    fubini,
    random_sequences,
)
from couplekit.strategy.sequence import PlanConfig, SequencePlan, build_sequence, run_sequence
from couplekit.strategy.subset import (
    SubsetSelection,
    enumerate_subsets,
    run_subset,
    select_subset,
    sensitivity_scores,
)


def _stage_sets(plan: SequencePlan) -> list[set[str]]:
    return [set(s) for s in plan.stage_names()]


@pytest.fixture(scope="module")
def sequence_case():
    problem = sequence_benchmark().problem()
    report = coupling_matrices(problem, SweepConfig(n_sweep=11), workers=1)
    return problem, report


@pytest.fixture(scope="module")
def influence_case():
    problem = influence_benchmark().problem()
    report = coupling_matrices(problem, SweepConfig(n_sweep=11), workers=1)
    return problem, report


@pytest.fixture
def decoupled_third():
    """x1 and x2 coupled; x3 independent. The optimum is inside the box."""
    c = np.zeros((3, 3))
    c[0, 1] = c[1, 0] = 1.5
    return quadratic_coupled(3, c, center=[0.3, -0.2, 0.4])


@pytest.fixture
def needs_both():
    """min x1 + x2 subject to x1 + x2 >= 1.5 on [0, 1]^2, nominal at the origin."""
    space = DesignSpace((DesignVariable("x1", 0.0, 1.0, 0.0), DesignVariable("x2", 0.0, 1.0, 0.0)))
    return AnalyticProblem(
        "needs_both",
        space,
        lambda x: float(x[0] + x[1]),
        lambda x: np.array([1.0, 1.0]),
        constraints=(
            AnalyticConstraint("g", lambda x: float(-(x[0] + x[1])), -1.5, "<=", lambda x: np.array([-1.0, -1.0])),
        ),
    ).problem()


# ---------------------------------------------------------------------------
# build_sequence
# ---------------------------------------------------------------------------


class TestBuildSequence:
    def test_platform_matrix(self, platform_report):
        plan = build_sequence(platform_report)
        assert _stage_sets(plan) == [
            {"ps_pct"},
            {"D_pnt_low", "D_outer", "R_cs", "z_keel"},
            {"D_main"},
            {"z_frbrd"},
            {"D_pnt_up"},
        ]

    def test_three_variable_chain(self):
        jx = np.array([
            [np.nan, 0.7, 0.8],
            [0.7, np.nan, 0.8],
            [0.05, 0.05, np.nan],
        ])
        plan = build_sequence(CouplingReport.from_matrices(["x1", "x2", "x3"], jx))
        assert _stage_sets(plan) == [{"x3"}, {"x1", "x2"}]

    def test_no_edges_gives_singletons_in_index_order(self):
        jx = np.zeros((3, 3))
        plan = build_sequence(CouplingReport.from_matrices(["a", "b", "c"], jx))
        assert plan.stages == ((0,), (1,), (2,))

    def test_every_variable_once(self, platform_report):
        plan = build_sequence(platform_report)
        flat = sorted(i for s in plan.stages for i in s)
        assert flat == list(range(len(PLATFORM_NAMES)))

    def test_permutation_invariant(self, platform_report):
        order = list(reversed(PLATFORM_NAMES))
        p = [platform_report.index(n) for n in order]
        permuted = CouplingReport.from_matrices(
            order, platform_report.jx[np.ix_(p, p)], platform_report.jpsi[np.ix_(p, p)]
        )
        assert _stage_sets(build_sequence(permuted)) == _stage_sets(build_sequence(platform_report))

    def test_trace_replays_decisions(self, platform_report):
        plan = build_sequence(platform_report)
        for rec in plan.trace:
            if rec["rule"] == "influence":
                assert rec["passed"] == (rec["value"] >= rec["threshold"])
            elif rec["rule"] == "group":
                assert rec["passed"] == all(v >= rec["threshold"] for v in rec["values"])
        order = [r for r in plan.trace if r["rule"] == "order"]
        assert [set(r["group"]) for r in order] == _stage_sets(plan)
        scores = [r["net_influence"] for r in order]
        assert scores == sorted(scores, reverse=True)

    def test_thresholds_recorded(self, platform_report):
        plan = build_sequence(platform_report, config=PlanConfig(tau_group=0.6, tau_influence=0.2))
        assert plan.thresholds["tau_group"] == 0.6
        assert plan.thresholds["max_entry"] == pytest.approx(0.9)

    def test_threshold_range(self, platform_report):
        with pytest.raises(ValidationError):
            build_sequence(platform_report, tau_group=0.0)
        with pytest.raises(ValidationError):
            build_sequence(platform_report, tau_influence=1.5)


class TestSequencePlan:
    def test_duplicate_variable(self):
        with pytest.raises(ValidationError):
            SequencePlan(("a", "b"), ((0,), (0, 1)))

    def test_empty_stage(self):
        with pytest.raises(ValidationError):
            SequencePlan(("a", "b"), ((0,), ()))

    def test_save_load(self, tmp_path, platform_report):
        plan = build_sequence(platform_report)
        path = tmp_path / "plan.json"
        plan.save(path)
        back = SequencePlan.load(path)
        assert back.stages == plan.stages
        assert back.names == plan.names
        assert len(back.trace) == len(plan.trace)

    def test_describe(self):
        plan = SequencePlan.from_names(["a", "b", "c"], [["c"], ["a", "b"]])
        assert plan.describe() == "{c} -> {a, b}"


# ---------------------------------------------------------------------------
# run_sequence
# ---------------------------------------------------------------------------


class TestRunSequence:
    def test_single_stage_equals_simultaneous(self):
        problem = sequence_benchmark().problem()
        plan = SequencePlan(problem.space.names, (tuple(range(4)),))
        seq = run_sequence(problem, plan, seed=3, n_starts=3)
        sim = minimize_multistart(OptimizationSpec.build(problem, range(4)), 3, seed=3)
        np.testing.assert_array_equal(seq.final.x, sim.x)
        assert seq.final.objective == sim.objective

    def test_unplanned_variables_stay_nominal(self):
        problem = sequence_benchmark().problem()
        plan = SequencePlan.from_names(problem.space.names, [["x1"]])
        res = run_sequence(problem, plan, seed=0, n_starts=2)
        np.testing.assert_array_equal(res.final.x[1:], problem.space.nominal[1:])

    def test_separable_any_order_reaches_optimum(self):
        problem = separable(3).problem()
        for stages in all_sequences(3):
            plan = SequencePlan(problem.space.names, stages)
            assert run_sequence(problem, plan, seed=0, n_starts=1).final.objective == pytest.approx(0.0, abs=1e-8)

    def test_infeasible_stage_stops(self, needs_both):
        plan = SequencePlan.from_names(needs_both.space.names, [["x1"], ["x2"]])
        with pytest.raises(InfeasibleStageError) as exc:
            run_sequence(needs_both, plan, seed=0, n_starts=2)
        assert exc.value.stage == 0
        assert not exc.value.result.feasible

    def test_coupling_plan_beats_every_alternative(self, sequence_case):
        problem, report = sequence_case
        plan = build_sequence(report)
        assert _stage_sets(plan) == [{"x1", "x2"}, {"x4"}, {"x3"}]
        planned = run_sequence(problem, plan, seed=0, n_starts=2).final.objective
        outcomes = [
            run_sequence(problem, SequencePlan(problem.space.names, stages), seed=0, n_starts=2).final.objective
            for stages in all_sequences(4)
        ]
        assert len(outcomes) == 74
        assert planned <= min(outcomes) + 1e-5
        assert max(outcomes) - planned > 1e-3


# ---------------------------------------------------------------------------
# Subsets
# ---------------------------------------------------------------------------


class TestSelectSubset:
    def test_sensitivity_scores(self, ranking_report):
        scores = sensitivity_scores(ranking_report)
        assert PLATFORM_NAMES[int(np.argmax(scores))] == "D_pnt_low"
        mean = sensitivity_scores(ranking_report, "mean")
        assert mean[ranking_report.index("z_keel")] == pytest.approx(0.6)

    def test_single_variable_is_most_sensitive(self, ranking_report):
        for mode in ("coupling_aware", "sensitivity_only"):
            assert select_subset(ranking_report, 1, mode).chosen_names == ["D_pnt_low"]

    def test_coupling_aware_follows_coupling(self, ranking_report):
        sel = select_subset(ranking_report, 2, "coupling_aware")
        assert sel.chosen_names == ["D_pnt_low", "D_main"]
        assert select_subset(ranking_report, 3, "coupling_aware").chosen_names[2] == "z_keel"

    def test_sensitivity_only_follows_ranking(self, ranking_report):
        sel = select_subset(ranking_report, 3, "sensitivity_only")
        assert sel.chosen_names == ["D_pnt_low", "z_keel", "D_outer"]

    def test_all_variables(self, ranking_report):
        sel = select_subset(ranking_report, 8)
        assert sorted(sel.chosen) == list(range(8))

    def test_monotone_in_k(self, ranking_report):
        prev: set[int] = set()
        for k in range(1, 9):
            cur = set(select_subset(ranking_report, k).chosen)
            assert prev <= cur
            prev = cur

    def test_k_range_and_mode(self, ranking_report):
        with pytest.raises(ValidationError):
            select_subset(ranking_report, 0)
        with pytest.raises(ValidationError):
            select_subset(ranking_report, 9)
        with pytest.raises(ValidationError):
            select_subset(ranking_report, 2, "random")

    def test_trace_records_steps(self, ranking_report):
        sel = select_subset(ranking_report, 3)
        steps = [r["step"] for r in sel.trace]
        assert steps == [0, 1, 2, 3]
        assert sel.trace[2]["coupling"] == pytest.approx(0.8)

    def test_save_load(self, tmp_path, ranking_report):
        sel = select_subset(ranking_report, 3)
        path = tmp_path / "subset.json"
        sel.save(path)
        back = SubsetSelection.load(path)
        assert back.chosen == sel.chosen
        assert back.mode == "coupling_aware"


class TestSubsetOptimization:
    def test_coupling_aware_beats_sensitivity_only(self, influence_case):
        problem, report = influence_case
        aware = select_subset(report, 3, "coupling_aware")
        sens = select_subset(report, 3, "sensitivity_only")
        assert aware.chosen_names[0] == "x1"
        assert set(aware.chosen_names) == {"x1", "x2", "x3"}
        assert set(sens.chosen_names) == {"x1", "x2", "x4"}
        a = run_subset(problem, aware, seed=0, n_starts=3)
        s = run_subset(problem, sens, seed=0, n_starts=3)
        assert a.objective < s.objective

    def test_coupling_aware_ranks_near_top(self, influence_case):
        problem, report = influence_case
        aware = set(select_subset(report, 3).chosen_names)
        ranked = enumerate_subsets(problem, 3, seed=0, n_starts=3)
        assert len(ranked) == 10
        rank = next(i for i, (combo, _) in enumerate(ranked) if set(combo) == aware)
        assert rank <= 1

    def test_others_stay_nominal(self, influence_case):
        problem, _ = influence_case
        res = run_subset(problem, ["x2"], seed=0, n_starts=2)
        np.testing.assert_array_equal(np.delete(res.x, 1), np.delete(problem.space.nominal, 1))


# ---------------------------------------------------------------------------
# Random sequences and comparison
# ---------------------------------------------------------------------------


class TestRandomSequences:
    def test_counts(self):
        assert fubini(3) == 13
        assert fubini(4) == 75
        assert distinct_sequence_count(3) == 12
        assert distinct_sequence_count(8) == 1680
        assert len(all_sequences(3)) == 12
        assert len(all_sequences(4)) == 74

    def test_deterministic_and_distinct(self):
        a = random_sequences(5, 10, seed=3)
        assert a == random_sequences(5, 10, seed=3)
        assert len(set(a)) == 10
        for stages in a:
            assert len(stages) >= 2
            assert sorted(i for s in stages for i in s) == list(range(5))

    def test_eight_variable_shape(self):
        for stages in random_sequences(8, 6, seed=1):
            assert tuple(len(s) for s in stages) == (1, 4, 1, 1, 1)

    def test_request_above_available(self, capsys):
        draws = random_sequences(3, 18, seed=0)
        assert len(draws) == 12
        assert "warning: only 12" in capsys.readouterr().out

    def test_negative_count(self):
        with pytest.raises(ValidationError):
            random_sequences(4, -1, seed=0)


class TestCompareStrategies:
    def test_simultaneous_plan_gives_two_rows(self):
        problem = sequence_benchmark().problem()
        plan = SequencePlan(problem.space.names, (tuple(range(4)),))
        table = compare_strategies(problem, plans=[plan], config=CompareConfig(n_starts=3, seed=2, workers=1))
        assert table.strategies == ["baseline", "sequence_1"]
        sim = minimize_multistart(OptimizationSpec.build(problem, range(4)), 3, seed=2)
        assert table.row("sequence_1").objective == sim.objective

    def test_baseline_row(self):
        table = compare_strategies(separable(3).problem(), config=CompareConfig(n_starts=1, workers=1))
        base = table.row("baseline")
        assert base.objective == pytest.approx(0.5)
        assert base.evaluations == 1
        assert base.true_objective == pytest.approx(0.5)

    def test_separable_every_strategy_optimal(self):
        problem = separable(3).problem()
        table = compare_strategies(
            problem, config=CompareConfig(n_random_sequences=4, n_starts=1, workers=1)
        )
        assert table.strategies == [
            "baseline",
            "simultaneous",
            "random_001",
            "random_002",
            "random_003",
            "random_004",
            "random_mean",
            "random_median",
            "random_min",
            "random_max",
        ]
        for row in table.rows[1:]:
            assert row.objective == pytest.approx(0.0, abs=1e-8)

    def test_best_random_matches_coupling_plan(self, decoupled_third):
        problem = decoupled_third.problem()
        plan = build_sequence(decoupled_third.oracle_matrices())
        assert _stage_sets(plan) == [{"x1", "x2"}, {"x3"}]
        table = compare_strategies(
            problem, plans=[plan], config=CompareConfig(n_random_sequences=12, n_starts=2, workers=1)
        )
        assert len(table.random_rows()) == 12
        planned = table.row("sequence_1").objective
        assert table.row("random_min").objective == pytest.approx(planned, abs=1e-6)
        assert table.row("random_max").objective > planned + 1e-4

    def test_infeasible_stage_row(self, needs_both):
        plan = SequencePlan.from_names(needs_both.space.names, [["x1"], ["x2"]])
        table = compare_strategies(needs_both, plans=[plan], config=CompareConfig(n_starts=2, workers=1))
        row = table.row("sequence_1")
        assert not row.feasible
        assert row.description.endswith("(stage 1 infeasible)")
        assert table.row("simultaneous").feasible
        assert not table.row("baseline").feasible

    def test_subset_row(self):
        problem = separable(3).problem()
        sel = SubsetSelection(problem.space.names, (0, 2), "manual")
        table = compare_strategies(problem, subsets=[sel], config=CompareConfig(n_starts=1, workers=1))
        row = table.row("subset_1")
        assert row.description == "manual {x1, x3}"
        assert row.objective == pytest.approx(0.0, abs=1e-8)

    def test_deterministic_apart_from_wall_time(self):
        problem = sequence_benchmark().problem()
        a = compare_strategies(problem, config=CompareConfig(n_random_sequences=5, n_starts=2, workers=1))
        b = compare_strategies(problem, config=CompareConfig(n_random_sequences=5, n_starts=2, workers=3))
        strip = [{k: v for k, v in r.to_dict().items() if k != "wall_seconds"} for r in a.rows]
        assert strip == [{k: v for k, v in r.to_dict().items() if k != "wall_seconds"} for r in b.rows]

    def test_csv(self, tmp_path):
        table = compare_strategies(separable(2).problem(), config=CompareConfig(n_starts=1, workers=1))
        path = tmp_path / "compare.csv"
        assert table.save_csv(path) == 2
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TABLE_COLUMNS)
        assert lines[1].startswith("baseline,")

    def test_unknown_row(self):
        table = compare_strategies(separable(2).problem(), config=CompareConfig(n_starts=1, workers=1))
        with pytest.raises(ValidationError):
            table.row("subset_9")
