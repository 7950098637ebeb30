"""Acceptance suite: one PASS/FAIL line per criterion.

Runs ``lracsim all-acceptance`` twice with seed 0 (``--threads 1`` and
``--threads 8``), then checks each criterion from the first run's
artifacts and byte-compares the CSV files of both runs.  Takes roughly
15 minutes on one core.  Also runnable as ``python tests/test_acceptance.py``.
"""
import csv
import json
import sys
from pathlib import Path

import pytest

from lracsim.cli import main
from lracsim.experiments.acceptance import CRITERIA, compare_runs

pytestmark = pytest.mark.slow

SEED = "0"


def _line(tag: str, number: int, name: str, detail: str = "") -> str:
    return f"{tag} {number:2d} {name}" + (f" [{detail}]" if detail else "")


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    a, b = base / "threads1", base / "threads8"
    codes = (main(["all-acceptance", "--out", str(a), "--seed", SEED, "--threads", "1"]),
             main(["all-acceptance", "--out", str(b), "--seed", SEED, "--threads", "8"]))
    return a, b, codes


def _report(run_dir: Path, crit) -> dict:
    d = run_dir / f"c{crit.number:02d}_{crit.name.replace(' ', '_')}"
    return json.loads((d / "report.json").read_text())


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"c{c.number:02d}" for c in CRITERIA])
def test_criterion(runs, crit, capsys):
    a, _, _ = runs
    rep = _report(a, crit)
    failing = [c["name"] for c in rep["checks"] if c["gating"] and not c["passed"]]
    if rep["error"]:
        failing.append(f"{rep['error']['type']}: {rep['error']['message']}")
    with capsys.disabled():
        print("\n" + _line("PASS" if rep["passed"] else "FAIL", crit.number, crit.name, "; ".join(failing)))
    assert rep["passed"], failing


def test_acceptance_csv_consistent(runs):
    a, _, codes = runs
    with open(a / "acceptance.csv") as fh:
        rows = {int(r["criterion"]): r["passed"] == "true" for r in csv.DictReader(fh)}
    assert set(rows) == {c.number for c in CRITERIA}
    assert codes[0] == (0 if all(rows.values()) else 1)


def test_criterion_15_determinism(runs, capsys):
    a, b, codes = runs
    diff = compare_runs(a, b)
    ok = not diff and codes[0] == codes[1]
    with capsys.disabled():
        print("\n" + _line("PASS" if ok else "FAIL", 15, "determinism (threads 1 vs 8)",
                           f"differing: {', '.join(diff[:5])}" if diff else ""))
    assert ok, diff


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
