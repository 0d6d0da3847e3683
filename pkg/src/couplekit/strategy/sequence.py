"""Sequential decomposition: group and order variables from the coupling matrix."""

from __future__ import annotations

import json
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from couplekit.common import fmt_duration
from couplekit.dca.report import CouplingReport
from couplekit.errors import InfeasibleStageError, ValidationError
from couplekit.optimizer.auglag import (
    OptimizationResult,
    OptimizationSpec,
    SolverConfig,
    minimize_multistart,
)
from couplekit.optimizer.problem import ProblemDefinition

PLAN_FORMAT = "couplekit.plan/1"
DEFAULT_TAU_GROUP = 0.5
DEFAULT_TAU_INFLUENCE = 0.25
DEFAULT_STAGE_STARTS = 10


@dataclass(slots=True)
class PlanConfig:
    tau_group: float = DEFAULT_TAU_GROUP
    tau_influence: float = DEFAULT_TAU_INFLUENCE


@dataclass(frozen=True, slots=True)
class SequencePlan:
    names: tuple[str, ...]
    stages: tuple[tuple[int, ...], ...]
    thresholds: dict[str, float] = field(default_factory=dict)
    trace: tuple[dict[str, Any], ...] = ()

    def __post_init__(self):
        stages = tuple(tuple(int(i) for i in s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "names", tuple(self.names))
        if not stages or any(not s for s in stages):
            raise ValidationError("a plan needs at least one stage and no empty stages")
        flat = [i for s in stages for i in s]
        if len(set(flat)) != len(flat):
            raise ValidationError("a variable appears in more than one stage")
        if not all(0 <= i < len(self.names) for i in flat):
            raise ValidationError("plan stage index out of range")

    def stage_names(self) -> list[list[str]]:
        return [[self.names[i] for i in s] for s in self.stages]

    def describe(self) -> str:
        return " -> ".join("{" + ", ".join(s) + "}" for s in self.stage_names())

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": PLAN_FORMAT,
            "variables": list(self.names),
            "stages": self.stage_names(),
            "thresholds": dict(self.thresholds),
            "trace": list(self.trace),
        }

    @classmethod
    def from_names(
        cls, names: Sequence[str], stages: Sequence[Sequence[str]], **kwargs
    ) -> SequencePlan:
        names = tuple(names)
        try:
            idx = tuple(tuple(names.index(n) for n in s) for s in stages)
        except ValueError as exc:
            raise ValidationError(f"plan names a variable not in the space ({exc})") from exc
        return cls(names, idx, **kwargs)

    @classmethod
    def from_dict(cls, d: dict[str, Any], names: Sequence[str] | None = None) -> SequencePlan:
        names = tuple(names) if names is not None else tuple(d.get("variables", ()))
        if not names:
            names = tuple(n for s in d["stages"] for n in s)
        return cls.from_names(
            names,
            d["stages"],
            thresholds=dict(d.get("thresholds", {})),
            trace=tuple(d.get("trace", ())),
        )

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path, names: Sequence[str] | None = None) -> SequencePlan:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError(f"plan file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw, names)


# ---------------------------------------------------------------------------
# Plan construction
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def build_sequence(
    report: CouplingReport,
    tau_group: float = DEFAULT_TAU_GROUP,
    tau_influence: float = DEFAULT_TAU_INFLUENCE,
    config: PlanConfig | None = None,
) -> SequencePlan:
    """Stages from J_x: mutual strong pairs are grouped, groups ordered by net influence.

    J_x(A, B) >= tau_influence * max gives an edge B -> A (B steers A).
    Pairs with both directions >= tau_group * max are merged (transitively).
    Groups are ordered by outgoing minus incoming edge weight across group
    boundaries, largest first, then by their smallest variable index.
    """
    if config is not None:
        tau_group, tau_influence = config.tau_group, config.tau_influence
    for label, tau in (("tau_group", tau_group), ("tau_influence", tau_influence)):
        if not 0.0 < tau <= 1.0:
            raise ValidationError(f"{label} must be in (0, 1], got {tau}")
    n = report.dim
    j = np.where(report.mask, 0.0, report.jx)
    unmasked = report.jx[~report.mask]
    if unmasked.size == 0:
        raise ValidationError("coupling report has no unmasked entries")
    jmax = float(unmasked.max())
    infl_cut = tau_influence * jmax
    group_cut = tau_group * jmax
    trace: list[dict[str, Any]] = []

    edges = np.zeros((n, n), dtype=bool)  # edges[a, b]: b -> a
    for a in range(n):
        for b in range(n):
            if a == b or report.mask[a, b]:
                continue
            passed = jmax > 0 and j[a, b] >= infl_cut
            edges[a, b] = passed
            trace.append({
                "rule": "influence",
                "from": report.names[b],
                "to": report.names[a],
                "value": float(j[a, b]),
                "threshold": infl_cut,
                "passed": bool(passed),
            })

    uf = _UnionFind(n)
    for a in range(n):
        for b in range(a + 1, n):
            if report.mask[a, b] or report.mask[b, a]:
                continue
            passed = jmax > 0 and j[a, b] >= group_cut and j[b, a] >= group_cut
            trace.append({
                "rule": "group",
                "pair": [report.names[a], report.names[b]],
                "values": [float(j[a, b]), float(j[b, a])],
                "threshold": group_cut,
                "passed": bool(passed),
            })
            if passed:
                uf.union(a, b)

    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(uf.find(i), []).append(i)
    groups = [tuple(sorted(m)) for m in members.values()]

    def net(group: tuple[int, ...]) -> float:
        inside = set(group)
        out = sum(j[a, b] for a in range(n) for b in inside if a not in inside and edges[a, b])
        inc = sum(j[a, b] for a in inside for b in range(n) if b not in inside and edges[a, b])
        return float(out - inc)

    scored = [(net(g), g) for g in groups]
    scored.sort(key=lambda s: (-s[0], s[1][0]))
    for rank, (score, g) in enumerate(scored):
        trace.append({
            "rule": "order",
            "rank": rank,
            "group": [report.names[i] for i in g],
            "net_influence": score,
        })
    return SequencePlan(
        report.names,
        tuple(g for _, g in scored),
        {"tau_group": tau_group, "tau_influence": tau_influence, "max_entry": jmax},
        tuple(trace),
    )


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class SequenceResult:
    final: OptimizationResult
    stages: tuple[OptimizationResult, ...]

    @property
    def evaluations(self) -> int:
        return sum(r.evaluations for r in self.stages)

    def to_dict(self, plan: SequencePlan | None = None) -> dict[str, Any]:
        d = {"final": self.final.to_dict(), "stages": [r.to_dict() for r in self.stages]}
        if plan is not None:
            d["plan"] = plan.stage_names()
        return d


def _plan_indices(problem: ProblemDefinition, plan: SequencePlan) -> list[tuple[int, ...]]:
    space = problem.space
    return [tuple(space.index(plan.names[i]) for i in s) for s in plan.stages]


def run_sequence(
    problem: ProblemDefinition,
    plan: SequencePlan,
    seed: int,
    n_starts: int = DEFAULT_STAGE_STARTS,
    solver: SolverConfig | None = None,
    workers: int = 1,
    verbose: bool = False,
) -> SequenceResult:
    """Optimize stage by stage; earlier stages stay at their optima, later ones at nominal.

    Stage s uses seed + s and starts from the current design point.
    """
    stages = _plan_indices(problem, plan)
    space = problem.space
    current = space.nominal.copy()
    results: list[OptimizationResult] = []
    for s, free in enumerate(stages):
        t0 = time.perf_counter()
        spec = OptimizationSpec.build(problem, free, start=current)
        res = minimize_multistart(spec, n_starts, seed + s, solver, workers=workers)
        if not res.feasible:
            raise InfeasibleStageError(s, res)
        current = res.x.copy()
        results.append(res)
        if verbose:
            names = ", ".join(space.names[i] for i in free)
            print(
                f"Sequence: stage {s + 1}/{len(stages)} {{{names}}} "
                f"objective={res.objective:.6g} ({fmt_duration(time.perf_counter() - t0)})"
            )
    return SequenceResult(results[-1], tuple(results))
