"""Loading and schema validation for the upstream CSV/JSON artifacts.

The plotting layer consumes files only; all numbers are taken verbatim from
the CSVs (medians, bands and truths are never recomputed here).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

SURFACE_COLUMNS = ("f_a0", "f_a1", "value", "action_probs")
SUMMARY_COLUMNS = ("n", "forecast", "estimator", "median", "q05", "q95",
                   "truth", "replications", "undefined_count", "orientation")


class SchemaError(ValueError):
    """Header of an input file does not match the expected schema."""


def _check_header(got, want, path):
    if tuple(got) != tuple(want):
        missing = [c for c in want if c not in got]
        extra = [c for c in got if c not in want]
        raise SchemaError(
            f"{path}: unexpected columns; expected {list(want)}, got "
            f"{list(got)} (missing {missing}, extra {extra})")


@dataclass(frozen=True)
class SurfaceData:
    f0: tuple
    f1: tuple
    values: tuple  # row-major over (f0, f1)

    def value_at(self, point):
        i = self.f0.index(point[0])
        j = self.f1.index(point[1])
        return self.values[i * len(self.f1) + j]


def load_surface(path) -> SurfaceData:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        _check_header(header, SURFACE_COLUMNS, path)
        rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    f0 = tuple(sorted({r[0] for r in rows}))
    f1 = tuple(sorted({r[1] for r in rows}))
    if len(rows) != len(f0) * len(f1):
        raise ValueError(
            f"{path}: expected a full {len(f0)}x{len(f1)} grid, "
            f"got {len(rows)} rows")
    lookup = {(r[0], r[1]): r[2] for r in rows}
    values = tuple(lookup[(a, b)] for a in f0 for b in f1)
    return SurfaceData(f0, f1, values)


@dataclass(frozen=True)
class Report:
    maximizers: tuple
    correct_forecast: tuple | None
    optimum: float
    metric: str


def load_report(path) -> Report:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("maximizers", "optimum", "metric"):
        if key not in payload:
            raise SchemaError(f"{path}: report is missing the {key!r} field")
    correct = payload.get("correct_forecast")
    return Report(
        maximizers=tuple(tuple(m) for m in payload["maximizers"]),
        correct_forecast=tuple(correct) if correct else None,
        optimum=float(payload["optimum"]),
        metric=payload["metric"],
    )


@dataclass(frozen=True)
class SummaryRow:
    n: int
    forecast: str
    estimator: str
    median: float
    q05: float
    q95: float
    truth: float
    orientation: str


def load_summary(path) -> list:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        _check_header(header, SUMMARY_COLUMNS, path)
        rows = [
            SummaryRow(int(r[0]), r[1], r[2], float(r[3]), float(r[4]),
                       float(r[5]), float(r[6]), r[9])
            for r in reader if r
        ]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows
