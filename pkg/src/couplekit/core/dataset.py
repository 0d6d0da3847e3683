"""Training datasets: CSV ingest through DuckDB, output channels, z-scoring."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from couplekit.common import fmt_float, open_db, sql_ident, sql_quote, write_csv
from couplekit.core.space import DesignSpace
from couplekit.errors import DegenerateChannelError, UnknownNameError, ValidationError

CHANNEL_KINDS = ("objective", "constraint", "auxiliary")
MIN_STDDEV = 1e-12


@dataclass(frozen=True, slots=True)
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray
    input_names: tuple[str, ...]
    output_names: tuple[str, ...]
    rejected: int = 0

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.asarray(self.outputs, dtype=float)
        if outputs.ndim == 1:
            outputs = outputs.reshape(-1, 1) if self.output_names else outputs.reshape(-1, 0)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))
        if inputs.shape[0] != outputs.shape[0]:
            raise ValidationError(
                f"row count mismatch: {inputs.shape[0]} input rows, {outputs.shape[0]} output rows"
            )
        if inputs.shape[1] != len(self.input_names):
            raise ValidationError("input column count does not match input_names")
        if outputs.shape[1] != len(self.output_names):
            raise ValidationError("output column count does not match output_names")
        names = self.input_names + self.output_names
        if len(set(names)) != len(names):
            raise ValidationError("dataset column names must be unique")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(outputs))):
            raise ValidationError("dataset contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]

    def output(self, name: str) -> np.ndarray:
        try:
            return self.outputs[:, self.output_names.index(name)]
        except ValueError:
            raise UnknownNameError("output channel", name) from None

    def aligned_inputs(self, space: DesignSpace) -> np.ndarray:
        """Input matrix with columns in the space's variable order."""
        cols = []
        for name in space.names:
            if name not in self.input_names:
                raise UnknownNameError("design variable column", name)
            cols.append(self.input_names.index(name))
        return self.inputs[:, cols]


@dataclass(frozen=True, slots=True)
class OutputChannel:
    """Named output with the (mean, stddev) mapping model units onto z-scores."""

    name: str
    kind: str = "auxiliary"
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValidationError(f"{self.name}: channel kind must be one of {CHANNEL_KINDS}")
        if not self.std > MIN_STDDEV:
            raise DegenerateChannelError(self.name, f"stddev {self.std!r} not positive")

    def standardize(self, value):
        return (value - self.mean) / self.std

    def destandardize(self, z):
        return self.mean + self.std * z

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "mean": self.mean, "std": self.std}


def standardize_channel(
    ds: Dataset, name: str, kind: str = "auxiliary"
) -> tuple[np.ndarray, OutputChannel]:
    """Z-scored column (ddof=1) and the channel carrying its statistics."""
    col = ds.output(name)
    if col.size < 2:
        raise DegenerateChannelError(name, "needs at least 2 rows")
    std = float(np.std(col, ddof=1))
    if not std > MIN_STDDEV:
        raise DegenerateChannelError(name)
    channel = OutputChannel(name, kind, float(np.mean(col)), std)
    return channel.standardize(col), channel


def standardize_outputs(ds: Dataset) -> tuple[Dataset, list[tuple[float, float]]]:
    """Z-score every output column with its sample mean and stddev (ddof=1)."""
    if ds.n_rows < 2:
        raise ValidationError("standardizing outputs needs at least 2 rows")
    stats: list[tuple[float, float]] = []
    cols = []
    for name in ds.output_names:
        z, channel = standardize_channel(ds, name)
        stats.append((channel.mean, channel.std))
        cols.append(z)
    outputs = np.column_stack(cols) if cols else ds.outputs
    return Dataset(ds.inputs, outputs, ds.input_names, ds.output_names, ds.rejected), stats


# ---------------------------------------------------------------------------
# CSV files
# ---------------------------------------------------------------------------


def read_dataset(
    path: Path,
    space: DesignSpace,
    output_names: Sequence[str] | None = None,
    verbose: bool = False,
) -> Dataset:
    """Load a CSV dataset; rows with unparseable or non-finite cells are rejected.

    Input columns are taken by name in the space's order. Outputs are every
    other column in file order unless output_names picks a subset.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"dataset file not found: {path}")
    conn = open_db()
    try:
        try:
            conn.execute(
                "CREATE TABLE raw AS SELECT row_number() OVER () AS _row, * "
                f"FROM read_csv({sql_quote(str(path))}, header=true, all_varchar=true)"
            )
        except Exception as exc:
            raise ValidationError(f"{path}: cannot parse CSV ({exc})") from exc
        columns = [r[0] for r in conn.execute("DESCRIBE raw").fetchall() if r[0] != "_row"]

        for name in space.names:
            if name not in columns:
                raise UnknownNameError("design variable column", name)
        if output_names is None:
            outputs = [c for c in columns if c not in space.names]
        else:
            outputs = list(output_names)
            for name in outputs:
                if name not in columns or name in space.names:
                    raise UnknownNameError("output channel", name)

        selected = list(space.names) + outputs
        casts = ", ".join(
            f"TRY_CAST(trim({sql_ident(c)}) AS DOUBLE) AS {sql_ident(c)}" for c in selected
        )
        keep = " AND ".join(f"isfinite({sql_ident(c)})" for c in selected)
        conn.execute(f"CREATE TABLE typed AS SELECT _row, {casts} FROM raw")
        total = conn.execute("SELECT count(*) FROM typed").fetchone()[0]
        rows = conn.execute(
            f"SELECT {', '.join(sql_ident(c) for c in selected)} FROM typed "
            f"WHERE coalesce({keep}, false) ORDER BY _row"
        ).fetchall()
    finally:
        conn.close()

    rejected = total - len(rows)
    if not rows:
        raise ValidationError(f"{path}: no valid rows ({total:,} rejected)")
    data = np.array(rows, dtype=float).reshape(len(rows), len(selected))
    n_in = space.dim
    if verbose:
        print(f"Dataset: loaded {len(rows):,} rows from {path} ({rejected:,} rejected)")
    return Dataset(data[:, :n_in], data[:, n_in:], space.names, tuple(outputs), rejected)


def write_dataset(path: Path, ds: Dataset) -> None:
    header = list(ds.input_names) + list(ds.output_names)
    values = np.hstack([ds.inputs, ds.outputs])
    write_csv(Path(path), header, ([fmt_float(v) for v in row] for row in values))
