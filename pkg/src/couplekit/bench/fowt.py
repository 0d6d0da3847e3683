"""Synthetic floating-platform case over the 8-variable plant/control design space.

The design variables, bounds, nominals and constraint limits are those of a
semisubmersible platform study; the three response channels are fixed
smooth polynomials in the centered normalized inputs c = u - 0.5, NOT a
hydrodynamic model. Every output carries the label "synthetic".
"""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from couplekit.core.dataset import Dataset, write_dataset
from couplekit.core.sampling import latin_hypercube
from couplekit.core.space import DesignSpace, DesignVariable
from couplekit.optimizer.problem import AnalyticChannel, Constraint, ProblemDefinition, problem_file_dict

LABEL = "synthetic"
DEFAULT_SAMPLES = 750
MASS_NOMINAL = 1.509260e7
THETA_LIMIT = 6.9
ACCEL_LIMIT = 0.7

VARIABLES = (
    DesignVariable("D_main", 6.0, 14.0, 10.0),
    DesignVariable("D_pnt_up", 0.71, 1.11, 0.91),
    DesignVariable("D_pnt_low", 6.6148, 13.6148, 9.6148),
    DesignVariable("D_outer", 10.5, 14.5, 12.5),
    DesignVariable("R_cs", 41.57, 61.57, 51.75),
    DesignVariable("z_keel", -24.0, -16.0, -20.0),
    DesignVariable("z_frbrd", 7.0, 21.0, 15.0),
    DesignVariable("ps_pct", 0.75, 1.0, 0.85, role="control"),
)
FIXED_PARAMETERS = {f"extra_control_{i}": 0.0 for i in range(1, 7)}
CHANNELS = ("m_ptfm", "max_theta_ptfm", "max_a_nac")


def fowt_space() -> DesignSpace:
    return DesignSpace(VARIABLES, dict(FIXED_PARAMETERS))


def _centered(space: DesignSpace, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - space.lower) / space.span - 0.5


def _mass(c: np.ndarray) -> np.ndarray:
    return MASS_NOMINAL * (
        1.0
        + 0.28 * c[..., 3] + 0.20 * c[..., 4] - 0.16 * c[..., 5]
        + 0.10 * c[..., 0] + 0.12 * c[..., 2] + 0.03 * c[..., 1] + 0.07 * c[..., 6]
        + 0.10 * c[..., 3] ** 2 + 0.06 * c[..., 4] ** 2
        + 0.08 * c[..., 3] * c[..., 5] + 0.05 * c[..., 2] * c[..., 0]
    )


def _pitch(c: np.ndarray) -> np.ndarray:
    return (
        6.2
        - 2.6 * c[..., 3] - 1.9 * c[..., 4] + 1.4 * c[..., 5]
        - 0.6 * c[..., 2] - 0.3 * c[..., 0] - 0.9 * c[..., 7]
        + 0.8 * c[..., 3] * c[..., 4] + 1.2 * c[..., 7] * c[..., 3]
        + 0.5 * c[..., 2] * c[..., 3] + 0.4 * c[..., 5] * c[..., 4]
        + 0.6 * c[..., 7] ** 2
    )


def _accel(c: np.ndarray) -> np.ndarray:
    return (
        0.62
        - 0.18 * c[..., 3] - 0.10 * c[..., 4] + 0.12 * c[..., 5]
        - 0.05 * c[..., 6] + 0.22 * c[..., 7]
        - 0.15 * c[..., 7] * c[..., 3] + 0.08 * c[..., 7] * c[..., 5]
        + 0.06 * c[..., 3] ** 2 + 0.04 * c[..., 0] * c[..., 2] + 0.02 * c[..., 1]
    )


_RESPONSES = {"m_ptfm": _mass, "max_theta_ptfm": _pitch, "max_a_nac": _accel}


def response(space: DesignSpace, channel: str) -> Callable[[np.ndarray], float | np.ndarray]:
    """Exact synthetic response in model units; accepts one point or a batch."""
    poly = _RESPONSES[channel]

    def fn(x):
        out = poly(_centered(space, x))
        return float(out) if np.ndim(out) == 0 else out

    return fn


@dataclass(frozen=True, slots=True, eq=False)
class SyntheticCase:
    space: DesignSpace
    dataset: Dataset
    objective: str = "m_ptfm"
    constraints: tuple[Constraint, ...] = (
        Constraint("max_theta_ptfm", THETA_LIMIT, "<="),
        Constraint("max_a_nac", ACCEL_LIMIT, "<="),
    )
    label: str = LABEL

    @property
    def reference(self) -> dict[str, Callable]:
        return {ch: response(self.space, ch) for ch in CHANNELS}

    def problem(self, models) -> ProblemDefinition:
        """Problem over trained surrogates, with the exact responses as reference."""
        return ProblemDefinition(
            self.space, self.objective, self.constraints, models, self.reference, self.label
        )

    def exact_problem(self) -> ProblemDefinition:
        """Problem over the exact responses, standardized with the dataset's mean and stddev."""
        models = {}
        for ch in CHANNELS:
            y = self.dataset.output(ch)
            models[ch] = AnalyticChannel(
                ch, self.space, response(self.space, ch), offset=float(y.mean()), scale=float(y.std(ddof=1))
            )
        return self.problem(models)


def synthetic_fowt(seed: int = 0, n: int = DEFAULT_SAMPLES) -> SyntheticCase:
    """LHS dataset of n designs through the synthetic responses; bit-identical for a seed."""
    space = fowt_space()
    x = latin_hypercube(space, n, seed)
    c = _centered(space, x)
    y = np.column_stack([_RESPONSES[ch](c) for ch in CHANNELS])
    return SyntheticCase(space, Dataset(x, y, space.names, CHANNELS))


def write_case(case: SyntheticCase, out_dir: Path) -> dict[str, Path]:
    """Write space.json, data.csv and problem.json (models expected under models/)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "space": out_dir / "space.json",
        "data": out_dir / "data.csv",
        "problem": out_dir / "problem.json",
    }
    case.space.save(paths["space"])
    write_dataset(paths["data"], case.dataset)
    problem = problem_file_dict(
        "space.json",
        case.objective,
        case.constraints,
        {ch: f"models/{ch}.json" for ch in CHANNELS},
        label=case.label,
    )
    paths["problem"].write_text(json.dumps(problem, indent=2) + "\n", encoding="utf-8")
    return paths
