"""Coupling reports: J_x and J_psi with per-cell sweep diagnostics."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from couplekit.common import fmt_float, write_csv
from couplekit.errors import ValidationError

REPORT_FORMAT = "couplekit.dca/1"
ASYMMETRY_EPS = 1e-12


def _opt(v: float) -> float | None:
    return None if not math.isfinite(v) else float(v)


def _arr(values) -> np.ndarray:
    return np.array([np.nan if v is None else v for v in values], dtype=float)


@dataclass(frozen=True, slots=True, eq=False)
class CellRecord:
    """One (optimized A, perturbed B) sweep. x_opt/objective are NaN where excluded."""

    optimized: str
    perturbed: str
    grid: np.ndarray
    x_opt: np.ndarray
    objective: np.ndarray
    included: np.ndarray
    dx: np.ndarray
    dpsi: np.ndarray
    flat: int
    statuses: tuple[str, ...]
    evaluations: int
    jx: float
    jpsi: float
    note: str = ""

    @property
    def n_included(self) -> int:
        return int(self.included.sum())

    @property
    def excluded(self) -> int:
        return int(self.grid.size - self.n_included)

    @property
    def available(self) -> bool:
        return math.isfinite(self.jx) and math.isfinite(self.jpsi)

    def to_dict(self) -> dict[str, Any]:
        return {
            "optimized": self.optimized,
            "perturbed": self.perturbed,
            "grid": self.grid.tolist(),
            "x_opt": [_opt(v) for v in self.x_opt],
            "objective": [_opt(v) for v in self.objective],
            "excluded": self.excluded,
            "flat_at_bound": self.flat,
            "dx": self.dx.tolist(),
            "dpsi": self.dpsi.tolist(),
            "statuses": list(self.statuses),
            "evaluations": self.evaluations,
            "jx": _opt(self.jx),
            "jpsi": _opt(self.jpsi),
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> CellRecord:
        x_opt = _arr(d["x_opt"])
        return cls(
            optimized=d["optimized"],
            perturbed=d["perturbed"],
            grid=np.array(d["grid"], dtype=float),
            x_opt=x_opt,
            objective=_arr(d["objective"]),
            included=np.isfinite(x_opt),
            dx=np.array(d["dx"], dtype=float),
            dpsi=np.array(d["dpsi"], dtype=float),
            flat=int(d.get("flat_at_bound", 0)),
            statuses=tuple(d.get("statuses", ())),
            evaluations=int(d.get("evaluations", 0)),
            jx=float("nan") if d["jx"] is None else float(d["jx"]),
            jpsi=float("nan") if d["jpsi"] is None else float(d["jpsi"]),
            note=d.get("note", ""),
        )


@dataclass(frozen=True, slots=True, eq=False)
class CouplingReport:
    """Row A, column B: sensitivity of the re-optimized A (or the objective) to B.

    Diagonal and unavailable cells are masked and stored as NaN.
    """

    names: tuple[str, ...]
    jx: np.ndarray
    jpsi: np.ndarray
    mask: np.ndarray
    cells: dict[tuple[int, int], CellRecord] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        n = len(self.names)
        for m in (self.jx, self.jpsi, self.mask):
            if m.shape != (n, n):
                raise ValidationError(f"report matrices must be {n}x{n}")
        if n == 0:
            raise ValidationError("empty coupling report")
        if not np.all(np.diag(self.mask)):
            raise ValidationError("report diagonal must be masked")
        for mat in (self.jx, self.jpsi):
            vals = mat[~self.mask]
            if not (np.all(np.isfinite(vals)) and np.all(vals >= 0)):
                raise ValidationError("unmasked report entries must be finite and >= 0")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown variable {name!r} in report") from None

    @classmethod
    def from_cells(
        cls,
        names: Sequence[str],
        cells: Sequence[CellRecord],
        config: dict[str, Any] | None = None,
        label: str = "",
    ) -> CouplingReport:
        names = tuple(names)
        n = len(names)
        jx = np.full((n, n), np.nan)
        jpsi = np.full((n, n), np.nan)
        mask = np.eye(n, dtype=bool)
        by_index: dict[tuple[int, int], CellRecord] = {}
        for c in cells:
            a, b = names.index(c.optimized), names.index(c.perturbed)
            by_index[(a, b)] = c
            if c.available:
                jx[a, b], jpsi[a, b] = c.jx, c.jpsi
            else:
                mask[a, b] = True
        return cls(names, jx, jpsi, mask, by_index, dict(config or {}), label)

    @classmethod
    def from_matrices(
        cls,
        names: Sequence[str],
        jx,
        jpsi=None,
        label: str = "",
    ) -> CouplingReport:
        """Report from hand-built matrices; diagonal and NaN entries are masked."""
        jx = np.array(jx, dtype=float)
        jpsi = np.zeros_like(jx) if jpsi is None else np.array(jpsi, dtype=float)
        mask = np.eye(len(names), dtype=bool) | ~np.isfinite(jx) | ~np.isfinite(jpsi)
        jx[mask] = np.nan
        jpsi[mask] = np.nan
        return cls(tuple(names), jx, jpsi, mask, {}, {}, label)

    # -- files -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        def rows(m):
            return [[_opt(v) for v in row] for row in m]

        return {
            "format": REPORT_FORMAT,
            "label": self.label,
            "variables": list(self.names),
            "config": self.config,
            "jx": rows(self.jx),
            "jpsi": rows(self.jpsi),
            "mask": self.mask.tolist(),
            "cells": [self.cells[k].to_dict() for k in sorted(self.cells)],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> CouplingReport:
        if d.get("format") != REPORT_FORMAT:
            raise ValidationError(f"not a coupling report (format {d.get('format')!r})")
        names = tuple(d["variables"])
        cells = {}
        for cd in d.get("cells", []):
            c = CellRecord.from_dict(cd)
            cells[(names.index(c.optimized), names.index(c.perturbed))] = c
        return cls(
            names,
            np.array([[np.nan if v is None else v for v in r] for r in d["jx"]], dtype=float),
            np.array([[np.nan if v is None else v for v in r] for r in d["jpsi"]], dtype=float),
            np.array(d["mask"], dtype=bool),
            cells,
            dict(d.get("config", {})),
            d.get("label", ""),
        )

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> CouplingReport:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError(f"report file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw)

    def write_matrix_csv(self, path: Path, which: str = "jx") -> None:
        """Row header column 'optimized', one column per perturbed variable; masked cells empty."""
        mat = self.jx if which == "jx" else self.jpsi
        rows = (
            [name] + [None if self.mask[i, j] else fmt_float(mat[i, j]) for j in range(self.dim)]
            for i, name in enumerate(self.names)
        )
        write_csv(Path(path), ["optimized", *self.names], rows)


def asymmetry_index(report: CouplingReport) -> np.ndarray:
    """|J(A,B) - J(B,A)| / max(J(A,B), J(B,A), eps); NaN where either side is masked."""
    n = report.dim
    out = np.full((n, n), np.nan)
    for a in range(n):
        for b in range(a + 1, n):
            if report.mask[a, b] or report.mask[b, a]:
                continue
            p, q = report.jx[a, b], report.jx[b, a]
            out[a, b] = out[b, a] = abs(p - q) / max(p, q, ASYMMETRY_EPS)
    return out
