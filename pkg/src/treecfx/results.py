"""Shared per-instance result contract and JSON-lines serialization.

All three generators (focus, ft, rp) emit the same record shape; invalid
results carry nulls for the counterfactual fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

METHODS = ("focus", "ft", "rp")


@dataclass
class CounterfactualResult:
    index: int
    method: str
    original: np.ndarray
    label: int
    valid: bool
    counterfactual: np.ndarray | None = None
    cf_label: int | None = None
    distance: float | None = None
    iteration_found: int | None = None

    def to_json_line(self) -> str:
        rec = {
            "index": self.index,
            "method": self.method,
            "valid": self.valid,
            "distance": self.distance,
            "iteration_found": self.iteration_found,
            "x": [float(v) for v in self.original],
            "x_cf": None if self.counterfactual is None else [float(v) for v in self.counterfactual],
            "y": self.label,
            "y_cf": self.cf_label,
        }
        return json.dumps(rec)

    @classmethod
    def from_json_line(cls, line: str) -> "CounterfactualResult":
        rec = json.loads(line)
        return cls(
            index=int(rec["index"]),
            method=rec["method"],
            original=np.asarray(rec["x"], dtype=float),
            label=int(rec["y"]),
            valid=bool(rec["valid"]),
            counterfactual=None if rec["x_cf"] is None else np.asarray(rec["x_cf"], dtype=float),
            cf_label=None if rec["y_cf"] is None else int(rec["y_cf"]),
            distance=None if rec["distance"] is None else float(rec["distance"]),
            iteration_found=None if rec["iteration_found"] is None else int(rec["iteration_found"]),
        )


def write_results(path, results: list[CounterfactualResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            fh.write(res.to_json_line() + "\n")


def read_results(path) -> list[CounterfactualResult]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(CounterfactualResult.from_json_line(line))
    return out
