"""The acceptance suite: one study per criterion, artifacts under one directory."""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path


from ..dynamics import FourierDatum
from ..errors import LracError
from . import convergence, kernels, noise_studies, pathwise, spectral
from .parallel import set_threads
from .report import ExperimentReport, write_csv

STRONG_HS = (1 / 16, 1 / 32, 1 / 64, 1 / 128)
STRONG_REF = 1 / 512
STRONG_U0 = FourierDatum.parse("sin:1:0.5")


@dataclass
class Criterion:
    number: int
    name: str
    runtime_limit: float  # seconds
    gating: bool = True


CRITERIA = [
    Criterion(1, "spectral sandwich", 5),
    Criterion(2, "eigenvalue convergence rate", 10),
    Criterion(3, "inverse-trace boundedness", 10),
    Criterion(4, "operator oracle equivalence", 30),
    Criterion(5, "consistency order", 10),
    Criterion(6, "semigroup convergence", 60),
    Criterion(7, "L2 functionals", 30),
    Criterion(8, "noise exactness", 120),
    Criterion(9, "regularity exponents", 180),
    Criterion(10, "comparison principle", 120),
    Criterion(11, "moment boundedness", 300),
    Criterion(12, "strong convergence rate", 900),
    Criterion(13, "pathwise convergence", 900),
    Criterion(14, "transition-time convergence", 1200),
]


def _failed(claim: str, exc: LracError) -> ExperimentReport:
    rep = getattr(exc, "report", None) or ExperimentReport(claim)
    rep.error = {"type": type(exc).__name__, "message": str(exc)}
    return rep


def _strong_pair(seed: int) -> tuple[ExperimentReport, ExperimentReport]:
    t0 = time.perf_counter()
    table, params = convergence.coupled_error_table(STRONG_HS, STRONG_REF, 0.25, 1.0, 0.1, 0.5, 50, seed, STRONG_U0)
    shared = time.perf_counter() - t0
    strong = convergence.study_strong_convergence(STRONG_HS, STRONG_REF, 0.25, sigma=0.1, T=0.5, p=2.0,
                                                  replicas=50, seed=seed, u0=STRONG_U0, table=table)
    strong.parameters.update(dt=params["dt"], record_every=params["record_every"])
    sweep = convergence.zeta_sweep_oracle(STRONG_HS, STRONG_REF, (0.0, 0.1, 0.25, 0.4), t=0.5)
    strong.extra_tables["zeta_sweep_linear_oracle"] = (
        ["zeta", "exponent", "predicted_min_half_half_minus_zeta"],
        [[r["zeta"], r["exponent"], r["predicted"]] for r in sweep])
    lin = next(r for r in sweep if r["zeta"] == 0.25)["exponent"]
    strong.check("exponent of the exact linear-noise oracle at zeta=0.25", lin, "in [0.35, 0.65]",
                 0.35 <= lin <= 0.65, gating=False)
    strong.wall_clock += shared
    as_rep = convergence.study_as_convergence(STRONG_HS, STRONG_REF, 0.25, sigma=0.1, T=0.5, replicas=50,
                                              seed=seed, u0=STRONG_U0, table=table)
    as_rep.wall_clock += shared
    return strong, as_rep


def _transition(seed: int) -> ExperimentReport:
    try:
        return pathwise.study_transition_times(seed=seed)
    except LracError as exc:
        return _failed("transition", exc)


def _transition_alt(seed: int) -> ExperimentReport:
    try:
        return pathwise.study_transition_times(gamma=1.0, T=50.0, seed=seed, claim="transition_alt")
    except LracError as exc:
        return _failed("transition_alt", exc)


def run_all(out: str | Path, seed: int = 0, threads: int = 1, echo=print) -> list[tuple[Criterion, ExperimentReport]]:
    """Run every criterion, write artifacts under ``out`` and return (criterion, report) pairs."""
    set_threads(threads)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = {
        1: spectral.study_spectral_sandwich,
        2: spectral.study_eigen_gap,
        3: spectral.study_inverse_trace,
        4: lambda: spectral.study_operator_oracle(seed=seed),
        5: spectral.study_consistency,
        6: kernels.study_semigroup_convergence,
        7: kernels.study_l2_functionals,
        8: lambda: noise_studies.study_noise_checks(seed=seed),
        9: lambda: noise_studies.study_regularity(seed=seed),
        10: lambda: pathwise.study_comparison(seed=seed),
        11: lambda: pathwise.study_moments(seed=seed),
        14: lambda: _transition(seed),
    }
    results = {}
    for crit in CRITERIA:
        if crit.number == 13:
            continue  # produced together with 12
        if crit.number == 12:
            results[12], results[13] = _strong_pair(seed)
        else:
            try:
                results[crit.number] = jobs[crit.number]()
            except LracError as exc:
                results[crit.number] = _failed(crit.name, exc)
    extra = {"14_alt": _transition_alt(seed)}

    pairs = []
    for crit in CRITERIA:
        rep = results[crit.number]
        rep.check("runtime (s)", round(rep.wall_clock, 1), f"< {crit.runtime_limit}",
                  rep.wall_clock < crit.runtime_limit)
        rep.write(out / f"c{crit.number:02d}_{crit.name.replace(' ', '_')}")
        pairs.append((crit, rep))
    extra["14_alt"].write(out / "c14_transition_alt_informational")
    if echo is not None:
        for crit, rep in pairs:
            echo(summary_line(crit, rep))
        echo("INFO 14b transition-time convergence, alternative config gamma=1 T=50: "
             + ("pass" if extra["14_alt"].passed else "fail"))
    write_csv(out / "acceptance.csv", ["criterion", "name", "passed"],
              [[c.number, c.name, r.passed] for c, r in pairs])
    write_fingerprint(out)
    return pairs


def summary_line(crit: Criterion, rep: ExperimentReport) -> str:
    tag = "PASS" if rep.passed else "FAIL"
    failing = [c.name for c in rep.checks if c.gating and not c.passed]
    why = f" [failing: {'; '.join(failing)}]" if failing else ""
    if rep.error:
        why += f" [error: {rep.error['type']}]"
    return f"{tag} {crit.number:2d} {crit.name}{why}"


def write_fingerprint(out: Path) -> None:
    """sha256 of every CSV under ``out`` (sorted), for quick run-to-run comparison."""
    lines = []
    for p in sorted(out.rglob("*.csv")):
        if p.name == "fingerprint.csv":
            continue
        lines.append([str(p.relative_to(out)), hashlib.sha256(p.read_bytes()).hexdigest()])
    write_csv(out / "fingerprint.csv", ["file", "sha256"], lines)


def compare_runs(a: str | Path, b: str | Path) -> list[str]:
    """Relative paths of CSV files that differ (or exist in only one run)."""
    a, b = Path(a), Path(b)
    fa = {p.relative_to(a) for p in a.rglob("*.csv")}
    fb = {p.relative_to(b) for p in b.rglob("*.csv")}
    bad = sorted(str(p) for p in fa ^ fb)
    bad += sorted(str(p) for p in fa & fb if (a / p).read_bytes() != (b / p).read_bytes())
    return bad


__all__ = ["CRITERIA", "run_all", "compare_runs", "summary_line"]
