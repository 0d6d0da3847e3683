"""Run manifests written next to every CLI artifact."""

from __future__ import annotations

import json
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from couplekit import __version__
from couplekit.common import now_utc, sha256_file

MANIFEST_NAME = "manifest.json"


@dataclass(slots=True)
class RunManifest:
    command: str
    argv: list[str] = field(default_factory=list)
    inputs: dict[str, dict[str, str]] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    seeds: dict[str, int] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    phases: dict[str, float] = field(default_factory=dict)

    def add_input(self, role: str, path: Path) -> None:
        path = Path(path)
        self.inputs[role] = {"path": str(path), "sha256": sha256_file(path)}

    def add_output(self, path: Path) -> None:
        self.outputs.append(str(path))

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = round(time.perf_counter() - t0, 6)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": "couplekit",
            "version": __version__,
            "command": self.command,
            "argv": list(self.argv),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seeds": self.seeds,
            "config": self.config,
            "phases": self.phases,
            "created_at": now_utc().isoformat(),
        }

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path


def manifest_path_for(out: Path, is_dir: bool = False) -> Path:
    """manifest.json inside an output directory, or <stem>.manifest.json beside a file."""
    out = Path(out)
    if is_dir:
        return out / MANIFEST_NAME
    return out.with_name(f"{out.stem}.manifest.json")

