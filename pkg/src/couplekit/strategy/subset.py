"""Influential-variable subsets from the objective sensitivity and coupling matrices."""

from __future__ import annotations

import itertools
import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from couplekit.dca.report import CouplingReport
from couplekit.errors import ValidationError
from couplekit.optimizer.auglag import (
    OptimizationResult,
    OptimizationSpec,
    SolverConfig,
    minimize_multistart,
)
from couplekit.optimizer.problem import ProblemDefinition

SUBSET_FORMAT = "couplekit.subset/1"
MODES = ("sensitivity_only", "coupling_aware")
SCORES = ("max", "mean")


def sensitivity_scores(report: CouplingReport, score: str = "max") -> np.ndarray:
    """Per-variable column statistic of J_psi over unmasked rows (0 when all masked)."""
    if score not in SCORES:
        raise ValidationError(f"score must be one of {SCORES}, got {score!r}")
    out = np.zeros(report.dim)
    for b in range(report.dim):
        col = report.jpsi[~report.mask[:, b], b]
        if col.size:
            out[b] = float(col.max() if score == "max" else col.mean())
    return out


@dataclass(frozen=True, slots=True)
class SubsetSelection:
    names: tuple[str, ...]
    chosen: tuple[int, ...]
    mode: str
    trace: tuple[dict[str, Any], ...] = ()

    @property
    def chosen_names(self) -> list[str]:
        return [self.names[i] for i in self.chosen]

    def describe(self) -> str:
        return "{" + ", ".join(self.chosen_names) + "}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": SUBSET_FORMAT,
            "variables": list(self.names),
            "mode": self.mode,
            "chosen": self.chosen_names,
            "trace": list(self.trace),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SubsetSelection:
        names = tuple(d["variables"])
        try:
            chosen = tuple(names.index(n) for n in d["chosen"])
        except ValueError as exc:
            raise ValidationError(f"subset names an unknown variable ({exc})") from exc
        return cls(names, chosen, d.get("mode", "manual"), tuple(d.get("trace", ())))

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> SubsetSelection:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError(f"subset file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw)


def select_subset(
    report: CouplingReport, k: int, mode: str = "coupling_aware", score: str = "max"
) -> SubsetSelection:
    """Pick k variables.

    sensitivity_only: the k highest sensitivity scores.
    coupling_aware: start from the most sensitive variable, then repeatedly add
    the variable most strongly coupled (either direction of J_x) to anything
    already chosen. Ties: higher sensitivity, then lower index.
    """
    n = report.dim
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    sens = sensitivity_scores(report, score)
    trace: list[dict[str, Any]] = [
        {"step": 0, "rule": "sensitivity", "scores": {report.names[i]: float(sens[i]) for i in range(n)}}
    ]
    by_sens = sorted(range(n), key=lambda i: (-sens[i], i))

    if mode == "sensitivity_only":
        chosen = by_sens[:k]
        for step, i in enumerate(chosen, start=1):
            trace.append({
                "step": step,
                "candidate": report.names[i],
                "sensitivity": float(sens[i]),
            })
        return SubsetSelection(report.names, tuple(chosen), mode, tuple(trace))

    jx = np.where(report.mask, 0.0, report.jx)
    chosen = [by_sens[0]]
    trace.append({
        "step": 1,
        "candidate": report.names[by_sens[0]],
        "sensitivity": float(sens[by_sens[0]]),
        "coupling": None,
    })
    while len(chosen) < k:
        candidates = []
        for c in range(n):
            if c in chosen:
                continue
            coupling = max(max(jx[s, c], jx[c, s]) for s in chosen)
            candidates.append((float(coupling), float(sens[c]), c))
        candidates.sort(key=lambda t: (-t[0], -t[1], t[2]))
        coupling, s_score, pick = candidates[0]
        chosen.append(pick)
        trace.append({
            "step": len(chosen),
            "candidate": report.names[pick],
            "sensitivity": s_score,
            "coupling": coupling,
            "considered": {report.names[c]: [cp, sc] for cp, sc, c in candidates},
        })
    return SubsetSelection(report.names, tuple(chosen), mode, tuple(trace))


def run_subset(
    problem: ProblemDefinition,
    selection: SubsetSelection | Sequence[str],
    seed: int,
    n_starts: int = 10,
    solver: SolverConfig | None = None,
    workers: int = 1,
) -> OptimizationResult:
    """Optimize only the chosen variables; everything else stays at nominal."""
    names = selection.chosen_names if isinstance(selection, SubsetSelection) else list(selection)
    spec = OptimizationSpec.build(problem, names)
    return minimize_multistart(spec, n_starts, seed, solver, workers=workers)


def enumerate_subsets(
    problem: ProblemDefinition,
    k: int,
    seed: int,
    n_starts: int = 10,
    solver: SolverConfig | None = None,
) -> list[tuple[tuple[str, ...], OptimizationResult]]:
    """Every k-subset optimized, best objective first (feasible before infeasible)."""
    names = problem.space.names
    if not 1 <= k <= len(names):
        raise ValidationError(f"k must be in [1, {len(names)}], got {k}")
    rows = [
        (combo, run_subset(problem, combo, seed, n_starts, solver))
        for combo in itertools.combinations(names, k)
    ]
    rows.sort(key=lambda r: (not r[1].feasible, r[1].objective, r[0]))
    return rows
