"""Side-by-side comparison of optimization strategies on one problem."""

from __future__ import annotations

import dataclasses
import itertools
import math
import statistics
import time
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from couplekit.common import derive_seed, fmt_duration, fmt_float, parallel_map, worker_count, write_csv
from couplekit.errors import InfeasibleStageError, ValidationError
from couplekit.optimizer.auglag import (
    OptimizationResult,
    OptimizationSpec,
    SolverConfig,
    minimize_multistart,
)
from couplekit.optimizer.problem import FEASIBILITY_TOL, ProblemDefinition
from couplekit.strategy.sequence import DEFAULT_STAGE_STARTS, SequencePlan, run_sequence
from couplekit.strategy.subset import SubsetSelection, run_subset

TABLE_COLUMNS = (
    "strategy",
    "description",
    "objective",
    "true_objective",
    "feasible",
    "evaluations",
    "wall_seconds",
)
# one variable, then four, then one at a time
EIGHT_VARIABLE_SHAPE = (1, 4, 1, 1, 1)


@dataclass(slots=True)
class CompareConfig:
    n_random_sequences: int = 0
    n_starts: int = DEFAULT_STAGE_STARTS
    seed: int = 0
    workers: int | None = None


@dataclass(frozen=True, slots=True)
class ComparisonRow:
    strategy: str
    description: str
    objective: float
    true_objective: float | None = None
    feasible: bool = True
    evaluations: int | None = None
    wall_seconds: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy,
            "description": self.description,
            "objective": self.objective,
            "true_objective": self.true_objective,
            "feasible": self.feasible,
            "evaluations": self.evaluations,
            "wall_seconds": self.wall_seconds,
        }

    def csv_cells(self) -> list[str | None]:
        return [
            self.strategy,
            self.description,
            fmt_float(self.objective),
            fmt_float(self.true_objective),
            "true" if self.feasible else "false",
            None if self.evaluations is None else str(self.evaluations),
            None if self.wall_seconds is None else f"{self.wall_seconds:.3f}",
        ]


@dataclass(frozen=True, slots=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    label: str = ""

    def row(self, strategy: str) -> ComparisonRow:
        for r in self.rows:
            if r.strategy == strategy:
                return r
        raise ValidationError(f"no comparison row named {strategy!r}")

    @property
    def strategies(self) -> list[str]:
        return [r.strategy for r in self.rows]

    def random_rows(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.strategy.startswith("random_") and r.strategy[7:].isdigit()]

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "rows": [r.to_dict() for r in self.rows]}

    def save_csv(self, path: Path) -> int:
        return write_csv(Path(path), TABLE_COLUMNS, (r.csv_cells() for r in self.rows))


# ---------------------------------------------------------------------------
# Random sequences
# ---------------------------------------------------------------------------


def fubini(n: int) -> int:
    """Number of ordered set partitions of n items."""
    a = [1]
    for m in range(1, n + 1):
        a.append(sum(math.comb(m, k) * a[m - k] for k in range(1, m + 1)))
    return a[n]


def distinct_sequence_count(n: int) -> int:
    """How many different random sequences exist for n variables."""
    if n == sum(EIGHT_VARIABLE_SHAPE):
        return math.factorial(n) // math.factorial(4)
    return max(fubini(n) - 1, 0)


def _chunk(order: Sequence[int], shape: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    out, pos = [], 0
    for size in shape:
        out.append(tuple(sorted(order[pos : pos + size])))
        pos += size
    return tuple(out)


def _ordered_partitions(items: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], ...]]:
    if not items:
        yield ()
        return
    for size in range(1, len(items) + 1):
        for first in itertools.combinations(items, size):
            rest = tuple(i for i in items if i not in first)
            for tail in _ordered_partitions(rest):
                yield (first, *tail)


def all_sequences(n: int) -> list[tuple[tuple[int, ...], ...]]:
    """Every admissible sequence: the fixed 8-variable shape, else any ordered partition with >= 2 stages."""
    if n == sum(EIGHT_VARIABLE_SHAPE):
        seen: dict[tuple, None] = {}
        for perm in itertools.permutations(range(n)):
            seen.setdefault(_chunk(perm, EIGHT_VARIABLE_SHAPE), None)
        return list(seen)
    return [p for p in _ordered_partitions(tuple(range(n))) if len(p) >= 2]


def random_sequences(
    n: int, count: int, seed: int, verbose: bool = False
) -> list[tuple[tuple[int, ...], ...]]:
    """count distinct random sequences, deterministic under seed.

    Stage shapes are drawn uniformly over compositions of n with at least two
    parts, except for 8 variables where the shape is fixed at 1-4-1-1-1.
    Asking for more than exist returns all of them.
    """
    if count < 0:
        raise ValidationError(f"n_random_sequences must be >= 0, got {count}")
    if count == 0 or n < 2:
        return []
    available = distinct_sequence_count(n)
    if count >= available:
        if count > available:
            print(f"warning: only {available:,} distinct sequences exist; using all of them")
        return all_sequences(n)

    rng = np.random.default_rng(derive_seed(seed, "random_sequences"))
    seen: dict[tuple, None] = {}
    while len(seen) < count:
        if n == sum(EIGHT_VARIABLE_SHAPE):
            shape = EIGHT_VARIABLE_SHAPE
        else:
            cuts = np.zeros(n - 1, dtype=bool)
            while not cuts.any():
                cuts = rng.integers(0, 2, size=n - 1).astype(bool)
            edges = [0, *(i + 1 for i in np.flatnonzero(cuts)), n]
            shape = tuple(b - a for a, b in itertools.pairwise(edges))
        seen.setdefault(_chunk(rng.permutation(n).tolist(), shape), None)
    if verbose:
        print(f"Compare: drew {count:,} random sequences of {available:,} possible")
    return list(seen)


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def _baseline_row(problem: ProblemDefinition) -> ComparisonRow:
    space = problem.space
    u = space.nominal_unit()
    g = problem.constraint_hat(u)
    feasible = bool(g.size == 0 or g.max() <= FEASIBILITY_TOL)
    return ComparisonRow(
        strategy="baseline",
        description="all variables at nominal",
        objective=float(problem.objective_value(u)),
        true_objective=problem.reference_objective(space.nominal),
        feasible=feasible,
        evaluations=1,
        wall_seconds=0.0,
    )


def _row(
    problem: ProblemDefinition,
    strategy: str,
    description: str,
    run: Callable[[], OptimizationResult],
) -> ComparisonRow:
    t0 = time.perf_counter()
    try:
        res = run()
        evaluations = res.evaluations
    except InfeasibleStageError as exc:
        res = exc.result
        description = f"{description} (stage {exc.stage + 1} infeasible)"
        evaluations = res.evaluations
    return ComparisonRow(
        strategy=strategy,
        description=description,
        objective=res.objective,
        true_objective=problem.reference_objective(res.x),
        feasible=res.feasible,
        evaluations=evaluations,
        wall_seconds=time.perf_counter() - t0,
    )


def _sequence_total(problem, plan, seed, n_starts, solver) -> OptimizationResult:
    """Final design point with evaluations summed over every stage."""
    res = run_sequence(problem, plan, seed, n_starts, solver)
    return dataclasses.replace(res.final, evaluations=res.evaluations)


def _is_simultaneous(plan: SequencePlan, dim: int) -> bool:
    return len(plan.stages) == 1 and len(plan.stages[0]) == dim


def _random_summary(rows: Sequence[ComparisonRow]) -> list[ComparisonRow]:
    values = [r.objective for r in rows if r.feasible]
    if not values:
        return []
    desc = f"{len(values)} of {len(rows)} random sequences feasible"
    stats = (
        ("random_mean", statistics.fmean(values)),
        ("random_median", statistics.median(values)),
        ("random_min", min(values)),
        ("random_max", max(values)),
    )
    return [ComparisonRow(name, desc, float(v)) for name, v in stats]


def compare_strategies(
    problem: ProblemDefinition,
    plans: Sequence[SequencePlan] = (),
    subsets: Sequence[SubsetSelection] = (),
    n_random_sequences: int = 0,
    seed: int = 0,
    config: CompareConfig | None = None,
    solver: SolverConfig | None = None,
    verbose: bool = False,
) -> ComparisonTable:
    """Baseline, simultaneous, given plans and subsets, and random sequences, one row each.

    The simultaneous row is skipped when one of the plans already is the
    single all-variable stage. Rows are computed independently (in parallel
    when workers allow) and listed in a fixed order. A config, when given,
    supplies the random-sequence count and seed.
    """
    if config is not None:
        n_random_sequences, seed = config.n_random_sequences, config.seed
    cfg = config or CompareConfig(n_random_sequences=n_random_sequences, seed=seed)
    space = problem.space
    n_starts = cfg.n_starts
    jobs: list[tuple[str, str, Callable[[], OptimizationResult]]] = []

    if not any(_is_simultaneous(p, space.dim) for p in plans):
        spec = OptimizationSpec.build(problem, range(space.dim))
        jobs.append((
            "simultaneous",
            "all variables at once",
            lambda: minimize_multistart(spec, n_starts, seed, solver),
        ))
    for i, plan in enumerate(plans, start=1):
        jobs.append((
            f"sequence_{i}",
            plan.describe(),
            lambda plan=plan: _sequence_total(problem, plan, seed, n_starts, solver),
        ))
    for i, sel in enumerate(subsets, start=1):
        jobs.append((
            f"subset_{i}",
            f"{sel.mode} {sel.describe()}",
            lambda sel=sel: run_subset(problem, sel, seed, n_starts, solver),
        ))
    draws = random_sequences(space.dim, n_random_sequences, seed, verbose=verbose)
    first_random = len(jobs)
    for i, stages in enumerate(draws, start=1):
        plan = SequencePlan(space.names, stages)
        jobs.append((
            f"random_{i:03d}",
            plan.describe(),
            lambda plan=plan: _sequence_total(problem, plan, seed, n_starts, solver),
        ))

    workers = worker_count() if cfg.workers is None else cfg.workers
    if verbose:
        print(f"Compare: {len(jobs) + 1} strategies, {n_starts} starts each, {workers} workers")
    t0 = time.perf_counter()
    rows = parallel_map(lambda job: _row(problem, *job), jobs, workers=workers)
    if verbose:
        print(f"Compare: done in {fmt_duration(time.perf_counter() - t0)}")

    table = [_baseline_row(problem), *rows, *_random_summary(rows[first_random:])]
    return ComparisonTable(tuple(table), problem.label)
