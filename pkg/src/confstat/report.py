"""Analysis reports: JSON for machines, CSV for per-event tables, text for people."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

SCHEMA_VERSION = 1


def load_schema(name: str) -> dict:
    """``name`` is ``"config"`` or ``"report"``."""
    text = resources.files("confstat").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def clean(obj):
    """Convert numpy containers and scalars to JSON values; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def table(columns: dict) -> dict:
    """Column dict of equal-length arrays -> ``{"columns": [...], "rows": [...]}``."""
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=float) for n in names]
    rows = np.stack(cols, axis=1) if cols else np.zeros((0, 0))
    return {"columns": names, "rows": clean(rows)}


def points_columns(points) -> dict:
    pts = np.asarray(points, dtype=float)
    return {f"x{i}": pts[:, i] for i in range(4)}


@dataclass
class AnalysisReport:
    """Everything a run produced; every verdict sits next to its evidence."""

    command: str
    config: dict
    tolerances: dict
    verdicts: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    tool: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tool:
            from . import __version__

            self.tool = {"name": "confstat", "version": __version__}
        for name in ("config", "tolerances", "verdicts", "evidence", "tables", "files", "tool"):
            setattr(self, name, clean(getattr(self, name)))

    def to_dict(self) -> dict:
        return dict(
            schema_version=SCHEMA_VERSION,
            tool=self.tool,
            command=self.command,
            config=self.config,
            tolerances=self.tolerances,
            verdicts=self.verdicts,
            evidence=self.evidence,
            tables=self.tables,
            files=self.files,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisReport":
        jsonschema.validate(data, load_schema("report"))
        return cls(
            data["command"],
            data["config"],
            data["tolerances"],
            data.get("verdicts", {}),
            data.get("evidence", {}),
            data.get("tables", {}),
            data.get("files", {}),
            data["tool"],
        )

    def validate(self) -> None:
        jsonschema.validate(self.to_dict(), load_schema("report"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def loads(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        self.validate()
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "AnalysisReport":
        return cls.loads(Path(path).read_text())

    def write_csv(self, name: str, path) -> None:
        t = self.tables[name]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(t["columns"])
            for row in t["rows"]:
                w.writerow(["" if v is None else repr(float(v)) for v in row])

    def summary(self) -> str:
        lines = [f"confstat {self.tool.get('version', '')} :: {self.command}"]
        model = self.config.get("model", {})
        if model:
            params = ", ".join(f"{k}={v}" for k, v in sorted(model.get("params", {}).items()))
            lines.append(f"model: {model.get('family')}" + (f" ({params})" if params else ""))
        for name, v in self.verdicts.items():
            lines.append(f"{name}: {v['verdict']}")
            for key, val in v.items():
                if key != "verdict" and isinstance(val, (int, float)) and not isinstance(val, bool):
                    lines.append(f"    {key} = {val:.6g}")
        for key, val in self.evidence.items():
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                lines.append(f"{key} = {val:.10g}")
        for key, path in self.files.items():
            lines.append(f"{key}: {path}")
        return "\n".join(lines)
