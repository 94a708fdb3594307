"""Experiment report structure and CSV/JSON emission.

Every experiment emits one long-format CSV (point, statistic, value, se,
bound) and one JSON report carrying the verdict, a parameter echo and any
experiment-specific extras.  CSV bytes are a pure function of the report
contents; the JSON additionally records wall-clock time.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

__all__ = ["PointStat", "ExperimentReport", "write_report_files"]


@dataclass(frozen=True)
class PointStat:
    point: str
    statistic: str
    value: float
    se: float
    bound: float | None = None


@dataclass
class ExperimentReport:
    """Per-experiment statistics with a pass/fail/inconclusive verdict.

    verdict is "pass" only when every tested point satisfies its inequality
    within its stated tolerance; "inconclusive" marks points whose Monte
    Carlo error swamps the margin being tested.
    """

    name: str
    params: dict[str, Any]
    points: list[PointStat]
    verdict: str
    extras: dict[str, Any] = field(default_factory=dict)
    wallclock_s: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.name,
            "verdict": self.verdict,
            "params": _jsonable(self.params),
            "points": [
                {
                    "point": p.point,
                    "statistic": p.statistic,
                    "value": _jsonable(p.value),
                    "se": _jsonable(p.se),
                    "bound": _jsonable(p.bound),
                }
                for p in self.points
            ],
            "extras": _jsonable(self.extras),
            "wallclock_s": self.wallclock_s,
        }


def _jsonable(obj):
    """Plain-python copy: numpy scalars/arrays become floats/ints/lists."""
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_report_files(report: ExperimentReport, out_dir: Path | str) -> list[Path]:
    """Write <name>.csv and <name>.report.json; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{report.name}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["point", "statistic", "value", "se", "bound"])
        for p in report.points:
            writer.writerow([p.point, p.statistic, _fmt(p.value), _fmt(p.se), _fmt(p.bound)])
    json_path = out / f"{report.name}.report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]
