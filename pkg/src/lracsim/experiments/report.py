"""Structured study results and their on-disk artifacts."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    """Fixed 17-significant-digit rendering so reruns are byte-identical."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if v is None or isinstance(v, (str, int)):
        return v
    return str(v)


@dataclass
class Check:
    name: str
    value: object
    target: str
    passed: bool
    gating: bool = True

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if not self.gating:
            tag = "INFO"
        return f"[{tag}] {self.name}: {self.value} (target {self.target})"


@dataclass
class ExperimentReport:
    claim: str
    parameters: dict = field(default_factory=dict)
    seed: int | None = None
    per_h: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # (h, replica, error)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    wall_clock: float = 0.0
    extra_tables: dict = field(default_factory=dict)  # name -> (header, rows)
    error: dict | None = None  # machine-readable failure record

    def check(self, name, value, target, passed, gating=True) -> Check:
        c = Check(name, value, target, bool(passed), gating)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks if c.gating)

    def summary_lines(self) -> list[str]:
        return [f"{self.claim} " + c.line() for c in self.checks]

    def to_dict(self) -> dict:
        return _jsonable({
            "claim": self.claim,
            "passed": self.passed,
            "seed": self.seed,
            "parameters": self.parameters,
            "per_h": self.per_h,
            "rates": self.rates,
            "checks": [c.__dict__ for c in self.checks],
            "notes": self.notes,
            "wall_clock_s": self.wall_clock,
            "error": self.error,
        })

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        write_csv(out / "errors.csv", ["h", "replica", "error"], self.errors)
        write_csv(out / "rates.csv", ["name", "exponent", "ci_lo", "ci_hi", "r2"],
                  [[r["name"], r["exponent"], r["ci_lo"], r["ci_hi"], r["r2"]] for r in self.rates])
        for name, (header, rows) in self.extra_tables.items():
            write_csv(out / f"{name}.csv", header, rows)
        return out


def write_csv(path: str | Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
