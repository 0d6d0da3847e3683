"""Shared utilities: DuckDB connections, CSV export, hashing, worker pools."""

from __future__ import annotations

import hashlib
import os
import zlib
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import TypeVar

import duckdb
import numpy as np

from couplekit.errors import ValidationError

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "COUPLEKIT_THREADS"


def now_utc() -> datetime:
    return datetime.now(timezone.utc)


def open_db() -> duckdb.DuckDBPyConnection:
    """In-memory DuckDB connection used for CSV reads and writes."""
    return duckdb.connect(":memory:")


def sql_quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def sql_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def fmt_duration(seconds: float) -> str:
    """Format seconds as human-readable duration."""
    if seconds < 10:
        return f"{seconds:.1f}s"
    s = int(seconds)
    if s < 60:
        return f"{s}s"
    m, s = divmod(s, 60)
    if m < 60:
        return f"{m}m{s:02d}s"
    h, m = divmod(m, 60)
    return f"{h}h{m:02d}m"


def fmt_float(value: float | None) -> str | None:
    """Shortest exact text for a float; None stays None (empty CSV cell)."""
    if value is None:
        return None
    return repr(float(value))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> int:
    """Write rows to a CSV file with a header through DuckDB's COPY.

    Cells are written as text; floats should be pre-formatted with fmt_float so
    reloading reproduces them exactly. Returns the row count.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ", ".join(f"{sql_ident(h)} VARCHAR" for h in header)
    placeholders = ", ".join("?" for _ in header)
    data = [[None if v is None else str(v) for v in row] for row in rows]
    conn = open_db()
    try:
        conn.execute(f"CREATE TABLE out_rows ({cols})")
        if data:
            conn.executemany(f"INSERT INTO out_rows VALUES ({placeholders})", data)
        conn.execute(
            f"COPY (SELECT * FROM out_rows) TO {sql_quote(str(path))} "
            "(FORMAT CSV, HEADER true, DELIMITER ',')"
        )
    finally:
        conn.close()
    return len(data)


def derive_seed(seed: int, *keys: int | str) -> int:
    """Child seed from a root seed and a path of ints or names.

    Names go through crc32, so a seed depends on what is computed, not on
    where it sits in a list.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        entropy.append(zlib.crc32(key.encode("utf-8")) if isinstance(key, str) else int(key))
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def worker_count() -> int:
    """Worker threads allowed by COUPLEKIT_THREADS (unset or 0 means all cores)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    n = 0
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 0:
        raise ValidationError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R]:
    """Apply fn to every item; results come back in input order."""
    n = worker_count() if workers is None else workers
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
