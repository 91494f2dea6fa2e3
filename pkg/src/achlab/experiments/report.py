"""Self-contained experiment reports whose verdicts can be recomputed from stored data."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

PASS, FAIL, OPEN = "PASS", "FAIL", "OPEN"

# id -> function(tables, tolerance) -> (verdict, fits)
VERDICTS: dict[str, Callable[[dict, dict], tuple[str, dict]]] = {}


def verdict_rule(experiment_id: str):
    def register(fn):
        VERDICTS[experiment_id] = fn
        return fn

    return register


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


@dataclass
class ExperimentReport:
    id: str
    config: dict[str, Any]
    tables: dict[str, list[dict[str, Any]]]
    tolerance: dict[str, Any]
    verdict: str = OPEN
    fits: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, experiment_id: str, config: dict, tables: dict, tolerance: dict) -> ExperimentReport:
        report = cls(experiment_id, _clean(config), _clean(tables), _clean(tolerance))
        report.verdict, report.fits = VERDICTS[experiment_id](report.tables, report.tolerance)
        report.fits = _clean(report.fits)
        return report

    def recompute(self) -> str:
        """Verdict from the stored tables and tolerance alone."""
        return VERDICTS[self.id](self.tables, self.tolerance)[0]

    @property
    def verdict_line(self) -> str:
        return f"VERDICT {self.id} {self.verdict}"

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "config": self.config, "tolerance": self.tolerance, "verdict": self.verdict,
                "fits": self.fits, "tables": self.tables}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentReport:
        return cls(data["id"], data["config"], data["tables"], data["tolerance"], data["verdict"], data.get("fits", {}))

    @classmethod
    def from_json(cls, text: str) -> ExperimentReport:
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Long form: one row per (table, row, column) cell."""
        buf = io.StringIO()
        buf.write(f"# achlab-report/1 id={self.id} verdict={self.verdict}\n")
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        buf.write("# tolerance: " + json.dumps(self.tolerance, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "row", "column", "value"])
        for name, rows in self.tables.items():
            for i, row in enumerate(rows):
                for col, value in row.items():
                    w.writerow([name, i, col, value])
        return buf.getvalue()
