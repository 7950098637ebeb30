"""Command-line entry point: one subcommand per study.

Exit codes: 0 all declared tolerances pass, 1 a study failed (StudyFailed
or any numerical error), 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .dynamics import (DriftSpec, FourierDatum, SimulationConfig, simulate, write_trajectory_binary,
                       write_trajectory_csv)
from .errors import ConfigInvalid, LracError, StudyFailed
from .experiments import acceptance, convergence, kernels, noise_studies, pathwise, spectral
from .experiments.parallel import set_threads
from .experiments.report import ExperimentReport
from .noise import NoisePlan
from .operator import LongRangeOperator

HS_COARSE = "1/16,1/32,1/64,1/128"

DEFAULTS = {
    "eigen": {"n": 64, "zeta": 0.25, "gamma": 1.0, "kernel": "indicator"},
    "consistency": {"hs": "1/16,1/32,1/64,1/128,1/256,1/512", "zetas": "0.1,0.25,0.4", "kernel": "indicator"},
    "semigroup": {"hs": "1/16,1/32,1/64,1/128,1/256,1/512", "zeta": 0.25, "gamma": 1.0, "t0": 0.1,
                  "kernel": "indicator"},
    "noise-check": {"seed": 0, "master_n": 64, "dt_master": 1e-3, "n": 32, "zeta": 0.25, "gamma": 1.0, "T": 0.5},
    "simulate": {"n": 64, "zeta": 0.25, "gamma": 1.0, "sigma": 0.0, "T": 1.0, "dt": 1e-4, "drift": "full",
                 "Z": 2.0, "integrator": "semi-implicit", "u0": "-1", "record_every": 100, "kernel": "indicator"},
    "converge-homogeneous": {"hs": "1/16,1/32,1/64,1/128,1/256,1/512", "zeta": 0.25, "gamma": 1.0, "T": 1.0,
                             "t0": 0.1, "u0": "sin:1:1", "kernel": "indicator"},
    "converge-strong": {"hs": HS_COARSE, "h_ref": "1/512", "zeta": 0.25, "gamma": 1.0, "sigma": 0.1, "T": 0.5,
                        "p": 2.0, "replicas": 50, "u0": "sin:1:0.5", "drift": "full"},
    "converge-as": {"hs": HS_COARSE, "h_ref": "1/512", "zeta": 0.25, "gamma": 1.0, "sigma": 0.1, "T": 0.5,
                    "replicas": 50, "u0": "sin:1:0.5", "drift": "full"},
    "regularity": {"n": 128, "zeta": 0.25, "gamma": 1.0, "dt": 1e-4, "replicas": 400},
    "transition": {"hs": HS_COARSE, "zeta": 0.25, "gamma": 0.01, "sigma": 0.15, "T": 200.0, "dt": 0.01,
                   "rho": 0.4, "q": 2.0, "replicas": 200, "u0": "-1", "target": "1"},
    "compare": {"n": 32, "zeta": 0.25, "gamma": 1.0, "sigma": 0.3, "T": 1.0, "dt": 1e-3, "Z": 1.2,
                "replicas": 100, "u0": "-1"},
    "moments": {"hs": HS_COARSE, "zeta": 0.25, "gamma": 1.0, "sigma": 0.1, "T": 0.5, "p": 4.0, "replicas": 200,
                "u0": "-1"},
    "all-acceptance": {},
}

# flag name -> config key
FLAGS = {
    "n": ("--n", "grid size N (h = 1/N)"),
    "zeta": ("--zeta", "scaling exponent, R = ceil(N^zeta)"),
    "zetas": ("--zetas", "comma-separated zeta values"),
    "kernel": ("--kernel", "indicator | exponential | path to a two-column table"),
    "hs": ("--hs", "comma-separated grid sizes, e.g. 1/16,1/32"),
    "h_ref": ("--h-ref", "reference grid size"),
    "gamma": ("--gamma", "diffusion constant"),
    "sigma": ("--sigma", "noise strength"),
    "Z": ("--Z", "truncation level"),
    "drift": ("--drift", "full | truncated | upper | lower | none"),
    "T": ("--T", "final time"),
    "dt": ("--dt", "time step"),
    "t0": ("--t0", "smallest evaluation time"),
    "record_every": ("--record-every", "steps between recorded frames"),
    "integrator": ("--integrator", "semi-implicit | explicit"),
    "master_n": ("--master-n", "finest noise grid"),
    "dt_master": ("--dt-master", "finest noise time step"),
    "u0": ("--u0", "initial datum, e.g. -1 or sin:1:0.5"),
    "target": ("--target", "hitting target datum"),
    "p": ("--p", "moment order"),
    "replicas": ("--replicas", "number of replicas"),
    "rho": ("--rho", "hitting radius"),
    "q": ("--q", "norm order of the hitting distance"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes (results do not depend on it)")
    common.add_argument("--config", default=None, help="INI configuration file")
    common.add_argument("--plots", action="store_true", help="also render PNG figures next to the CSV files")
    for key, (flag, help_) in FLAGS.items():
        common.add_argument(flag, dest=key, default=None, help=help_)
    parser = argparse.ArgumentParser(prog="lracsim", description="Long-range lattice Allen-Cahn simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        sub.add_parser(name, parents=[common], help=f"run the {name} study")
    return parser


def effective_config(args) -> dict:
    defaults = dict(DEFAULTS[args.command])
    file_values = cfgmod.read_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in FLAGS if getattr(args, k) is not None}
    known = set(defaults) | {"seed"}
    stray = sorted((set(file_values) | set(overrides)) - known)
    if stray:
        raise ConfigInvalid(f"{args.command} does not use: {', '.join(stray)}")
    if args.seed is not None:
        overrides["seed"] = args.seed
    defaults.setdefault("seed", 0)
    return cfgmod.resolve(defaults, file_values, overrides)


# -- subcommand bodies: each returns an ExperimentReport ---------------------

def _kernel(cfg):
    return cfgmod.kernel_from(cfg.get("kernel", "indicator"))


def run_eigen(cfg, out: Path, plots: bool) -> ExperimentReport:
    op = LongRangeOperator.build(cfg["n"], cfg["zeta"], cfg["gamma"], _kernel(cfg))
    rows = spectral.eigen_table(op)
    rep = ExperimentReport("eigen", {"R": op.R, "c": op.weights.c})
    rep.extra_tables["eigen"] = (["k", "lambda_paper", "lambda_circulant", "lower_bound", "upper_bound", "gap"],
                                 rows)
    v = spectral.sandwich_violations(op)
    rep.check("lower bound violations", v["lower"], "== 0", v["lower"] == 0)
    rep.check("upper bound violations", v["upper"], "== 0", v["upper"] == 0)
    rep.check("lower bound violations with k <= N/R", v["lower_restricted"], "== 0", v["lower_restricted"] == 0,
              gating=False)
    if plots:
        from .plotting import plot_eigen

        out.mkdir(parents=True, exist_ok=True)
        plot_eigen(rows, out)
    return rep


def run_semigroup(cfg, out, plots):
    rep = kernels.study_semigroup_convergence(cfg["hs"], cfg["zeta"], cfg["gamma"], cfg["t0"], _kernel(cfg))
    rate = rep.rates[0]["exponent"]
    rep.extra_tables["semigroup"] = (["h", "sup_distance", "fitted_rate"],
                                     [[r["h"], r["sup_distance"], rate] for r in rep.per_h])
    return rep


def run_simulate(cfg, out, plots):
    sc = SimulationConfig(N=cfg["n"], zeta=cfg["zeta"], gamma=cfg["gamma"], sigma=cfg["sigma"], T=cfg["T"],
                          dt=cfg["dt"], drift=DriftSpec(cfg["drift"], cfg["Z"]), integrator=cfg["integrator"],
                          u0=FourierDatum.parse(cfg["u0"]), record_every=cfg["record_every"], kernel=_kernel(cfg))
    plan = NoisePlan(cfg["seed"], cfg["n"], cfg["dt"]) if cfg["sigma"] else None
    traj = simulate(sc, plan)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_trajectory_binary(traj, out / "trajectory.bin")
    rep = ExperimentReport("simulate", {"R": sc.operator().R, "frames": len(traj.times)}, seed=cfg["seed"])
    rep.check("all frames finite", True, "true", bool(np.all(np.isfinite(traj.states))))
    if plots:
        from .plotting import plot_trajectory

        plot_trajectory(traj, out)
    return rep


def _u0(cfg):
    return FourierDatum.parse(cfg["u0"])


RUNNERS = {
    "eigen": run_eigen,
    "consistency": lambda c, o, p: spectral.study_consistency(c["hs"], c["zetas"], kernel=_kernel(c)),
    "semigroup": run_semigroup,
    "noise-check": lambda c, o, p: noise_studies.study_noise_checks(
        c["seed"], c["master_n"], c["dt_master"], conv_N=c["n"], conv_t=c["T"], zeta=c["zeta"], gamma=c["gamma"]),
    "simulate": run_simulate,
    "converge-homogeneous": lambda c, o, p: convergence.study_homogeneous_convergence(
        c["hs"], c["zeta"], c["gamma"], _u0(c).modes(), c["T"], c["t0"], _kernel(c)),
    "converge-strong": lambda c, o, p: convergence.study_strong_convergence(
        c["hs"], c["h_ref"], c["zeta"], c["gamma"], c["sigma"], c["T"], c["p"], c["replicas"], c["seed"], _u0(c),
        c["drift"]),
    "converge-as": lambda c, o, p: convergence.study_as_convergence(
        c["hs"], c["h_ref"], c["zeta"], c["gamma"], c["sigma"], c["T"], c["replicas"], c["seed"], _u0(c),
        c["drift"]),
    "regularity": lambda c, o, p: noise_studies.study_regularity(
        1.0 / c["n"], c["zeta"], c["gamma"], dt=c["dt"], replicas=c["replicas"], seed=c["seed"]),
    "transition": lambda c, o, p: pathwise.study_transition_times(
        c["hs"], c["zeta"], c["gamma"], c["sigma"], c["T"], c["dt"], c["rho"], c["q"], c["replicas"], c["seed"],
        FourierDatum.parse(c["u0"]), FourierDatum.parse(c["target"])),
    "compare": lambda c, o, p: pathwise.study_comparison(
        c["replicas"], c["seed"], c["n"], c["zeta"], c["gamma"], c["sigma"], c["T"], c["dt"], c["Z"], u0=_u0(c)),
    "moments": lambda c, o, p: pathwise.study_moments(
        c["hs"], c["zeta"], c["gamma"], c["sigma"], c["T"], c["p"], c["replicas"], c["seed"], _u0(c)),
}


def _write_error(out: Path, command: str, exc: Exception, cfg=None) -> None:
    rep = getattr(exc, "report", None) or ExperimentReport(command)
    rep.error = {"type": type(exc).__name__, "message": str(exc)}
    if cfg is not None:
        rep.parameters.setdefault("config", cfg)
    rep.write(out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        cfg = effective_config(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _write_error(out, args.command, exc)
        return 2
    set_threads(args.threads)

    if args.command == "all-acceptance":
        pairs = acceptance.run_all(out, cfg["seed"], args.threads)
        if args.plots:
            from .plotting import render

            for crit, rep in pairs:
                render(rep, out / f"c{crit.number:02d}_{crit.name.replace(' ', '_')}")
        return 0 if all(r.passed for _, r in pairs) else 1

    try:
        rep = RUNNERS[args.command](cfg, out, args.plots)
    except LracError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        _write_error(out, args.command, exc, cfg)
        return 1
    rep.parameters["config"] = cfg
    if rep.seed is None:
        rep.seed = cfg.get("seed")
    rep.write(out)
    if args.plots:
        from .plotting import render

        render(rep, out)
    for line in rep.summary_lines():
        print(line)
    if not rep.passed:
        failure = StudyFailed(f"{args.command}: declared tolerances not met")
        print(str(failure), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
