"""Grid-convergence studies: homogeneous heat flow, strong and pathwise errors."""
from __future__ import annotations

import math
import time

import numpy as np

from ..dynamics import DriftSpec
from ..errors import ReplicaFailure
from ..kernel import WeightKernel, build_weights
from ..operator import LongRangeOperator
from .engine import finite_rows, level_operators, make_noise, run_coupled, study_dt
from .fitting import bootstrap_rate, fit_rate, per_path_exponents
from .parallel import chunks, run_chunks
from .report import ExperimentReport

EXACT_TOL = 1e-12


def _fourier_nodes(modes, x):
    out = np.zeros_like(x, dtype=float)
    for k, a, b in modes:
        out += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return out


def homogeneous_errors(op: LongRangeOperator, modes, T: float, t0: float, n_frames: int = 10) -> float:
    """sup over nodes and frames in [t0, T] of |v^h - v| for the pure heat flow.

    ``modes`` is a list of (k, a, b) for a cos(2 pi k x) + b sin(2 pi k x);
    the lattice solution is propagated exactly in time through the DFT
    spectrum, the reference is the exact continuum heat solution.
    """
    x = np.arange(op.N) * op.h
    u0_hat = np.fft.rfft(_fourier_nodes(modes, x))
    mu = op.circulant_eigs()[: op.N // 2 + 1]
    sup = 0.0
    for t in np.linspace(t0, T, n_frames):
        vh = np.fft.irfft(np.exp(-t * mu) * u0_hat, n=op.N)
        ref = np.zeros(op.N)
        for k, a, b in modes:
            ref += math.exp(-op.gamma * (2 * np.pi * k) ** 2 * t) * (
                a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x))
        sup = max(sup, float(np.max(np.abs(vh - ref))))
    return sup


def study_homogeneous_convergence(hs, zeta: float, gamma: float = 1.0, modes=((1, 0.0, 1.0),),
                                  T: float = 1.0, t0: float = 0.1, kernel=None,
                                  min_exponent: float | None = None) -> ExperimentReport:
    t_start = time.perf_counter()
    hs = np.asarray(hs, float)
    rep = ExperimentReport("homogeneous", {"hs": hs, "zeta": zeta, "gamma": gamma, "modes": list(modes),
                                           "T": T, "t0": t0})
    errs = []
    for h in hs:
        op = LongRangeOperator.build(round(1 / h), zeta, gamma, kernel)
        e = homogeneous_errors(op, modes, T, t0)
        errs.append(e)
        rep.per_h.append({"h": h, "R": op.R, "error": e})
        rep.errors.append((h, 0, e))
    errs = np.array(errs)
    if np.all(errs <= EXACT_TOL):
        rep.notes.append("all errors at round-off: exact match, no rate fitted")
        rep.check("max error (exact case)", float(errs.max()), f"<= {EXACT_TOL}", True)
    else:
        fit = fit_rate(hs, errs)
        rep.rates.append(fit.as_row("sup_error"))
        target = 2 - 2 * zeta - 0.25 if min_exponent is None else min_exponent
        rep.check("fitted exponent", fit.exponent, f">= {target:.4g}", fit.exponent >= target)
    rep.wall_clock = time.perf_counter() - t_start
    return rep


# -- coupled stochastic convergence -------------------------------------------

def _strong_worker(params: dict, reps: range) -> np.ndarray:
    Ns, N_ref = params["Ns"], params["N_ref"]
    ops = level_operators(Ns + [N_ref], params["zeta"], params["gamma"])
    drift = DriftSpec(params["drift"], params.get("Z", 2.0))
    runs = {N: (ops[N], drift) for N in Ns + [N_ref]}
    dt = params["dt"]
    noise = make_noise(params["seed"], N_ref, dt, Ns + [N_ref], reps) if params["sigma"] else None
    # without noise every replica is the same path: integrate one, copy it
    err = np.zeros((len(reps) if noise is not None else 1, len(Ns)))

    def observe(step, states):
        ref = states[N_ref]
        for j, N in enumerate(Ns):
            d = np.max(np.abs(states[N] - ref[:, :: N_ref // N]), axis=1)
            err[:, j] = np.fmax(err[:, j], d)
            err[~np.isfinite(d), j] = np.nan
        return False

    u0 = params["u0"]
    n_steps = round(params["T"] / dt)
    if noise is None:
        run_coupled(runs, 0.0, dt, n_steps, u0, None, observe, params["record_every"])
        return np.tile(err[:1], (len(reps), 1))
    run_coupled(runs, params["sigma"], dt, n_steps, u0, noise, observe, params["record_every"])
    return err


def coupled_error_table(hs, h_ref: float, zeta: float, gamma: float, sigma: float, T: float,
                        replicas: int, seed: int, u0=0.0, drift: str = "full", dt: float | None = None,
                        threads: int | None = None) -> tuple[np.ndarray, dict]:
    """Per-replica sup errors |u^h - u^{h_ref}| over coarse nodes and frames.

    Returns (table of shape (replicas, len(hs)), parameters used).
    """
    Ns = [round(1 / h) for h in hs]
    N_ref = round(1 / h_ref)
    if N_ref <= max(Ns) or any(N_ref % N for N in Ns):
        raise ValueError("h_ref must be strictly finer than every h and nest with them")
    dt = study_dt(h_ref) if dt is None else dt
    record_every = max(1, min(64, int(min(hs) / dt)))
    params = {"Ns": Ns, "N_ref": N_ref, "zeta": zeta, "gamma": gamma, "sigma": sigma, "T": T, "dt": dt,
              "seed": seed, "u0": u0, "drift": drift, "record_every": record_every}
    parts = run_chunks(_strong_worker, [(params, r) for r in chunks(replicas)], threads)
    return np.concatenate(parts), params


def _drop_failures(table: np.ndarray, rep: ExperimentReport) -> np.ndarray:
    ok = finite_rows(table)
    n_bad = int((~ok).sum())
    rep.parameters["failed_replicas"] = n_bad
    if n_bad > 0.01 * table.shape[0]:
        raise ReplicaFailure(f"{n_bad} of {table.shape[0]} replicas left the finite range")
    return table[ok]


def study_strong_convergence(hs, h_ref: float, zeta: float, gamma: float = 1.0, sigma: float = 0.1,
                             T: float = 0.5, p: float = 2.0, replicas: int = 50, seed: int = 0,
                             u0=0.0, drift: str = "full", compare_p: float | None = 4.0,
                             table: np.ndarray | None = None, exponent_window=(0.35, 0.65),
                             max_ci_width: float = 0.2, threads: int | None = None) -> ExperimentReport:
    t_start = time.perf_counter()
    hs = np.asarray(hs, float)
    if table is None:
        table, params = coupled_error_table(hs, h_ref, zeta, gamma, sigma, T, replicas, seed, u0, drift,
                                            threads=threads)
    else:
        params = {}
    rep = ExperimentReport("strong", {"hs": hs, "h_ref": h_ref, "zeta": zeta, "gamma": gamma, "sigma": sigma,
                                      "T": T, "p": p, "replicas": replicas, "u0": u0, "drift": drift,
                                      "dt": params.get("dt"), "record_every": params.get("record_every")},
                           seed=seed)
    for r, row in enumerate(table):
        for h, e in zip(hs, row):
            rep.errors.append((h, r, e))
    good = _drop_failures(table, rep)
    fit = bootstrap_rate(hs, good, p, seed)
    rep.rates.append(fit.as_row(f"p={p:g}"))
    for h, e in zip(hs, fit.errors):
        rep.per_h.append({"h": h, f"Lp_error_p{p:g}": e})
    lo, hi = exponent_window
    if sigma == 0.0:
        rep.check("deterministic exponent", fit.exponent, ">= 1.0", fit.exponent >= 1.0)
    else:
        rep.check(f"exponent p={p:g}", fit.exponent, f"in [{lo}, {hi}]", lo <= fit.exponent <= hi)
        rep.check("bootstrap CI width", fit.ci_width, f"< {max_ci_width}", fit.ci_width < max_ci_width)
        if compare_p is not None:
            fit2 = bootstrap_rate(hs, good, compare_p, seed)
            rep.rates.append(fit2.as_row(f"p={compare_p:g}"))
            rep.check(f"exponent p={compare_p:g} inside p={p:g} CI", fit2.exponent,
                      f"in [{fit.ci[0]:.4f}, {fit.ci[1]:.4f}]", fit.ci[0] <= fit2.exponent <= fit.ci[1])
    rep.wall_clock = time.perf_counter() - t_start
    return rep


def study_as_convergence(hs, h_ref: float, zeta: float, gamma: float = 1.0, sigma: float = 0.1,
                         T: float = 0.5, replicas: int = 50, seed: int = 0, u0=0.0, drift: str = "full",
                         table: np.ndarray | None = None, threads: int | None = None) -> ExperimentReport:
    t_start = time.perf_counter()
    hs = np.asarray(hs, float)
    if table is None:
        table, _ = coupled_error_table(hs, h_ref, zeta, gamma, sigma, T, replicas, seed, u0, drift,
                                       threads=threads)
    rep = ExperimentReport("as", {"hs": hs, "h_ref": h_ref, "zeta": zeta, "gamma": gamma, "sigma": sigma,
                                  "T": T, "replicas": replicas}, seed=seed)
    for r, row in enumerate(table):
        for h, e in zip(hs, row):
            rep.errors.append((h, r, e))
    good = _drop_failures(table, rep)
    slopes = per_path_exponents(hs, good)
    frac = float(np.mean(slopes >= 0.25))
    med = float(np.median(slopes))
    decreasing = float(np.mean(np.diff(good, axis=1) < 0))
    rep.per_h = [{"h": h, "median_path_error": float(np.median(good[:, j]))} for j, h in enumerate(hs)]
    rep.extra_tables["path_exponents"] = (["replica", "exponent"], list(enumerate(slopes)))
    if sigma == 0.0:
        rep.check("deterministic path exponent (min)", float(slopes.min()), ">= 1.0", slopes.min() >= 1.0)
    else:
        rep.check("fraction of paths with exponent >= 0.25", frac, ">= 0.95", frac >= 0.95)
        rep.check("median path exponent", med, "in [0.35, 0.65]", 0.35 <= med <= 0.65)
        rep.check("fraction of halvings that reduce the path error", decreasing, ">= 0.90", decreasing >= 0.90)
    rep.wall_clock = time.perf_counter() - t_start
    return rep


# -- exact linear-noise oracle ------------------------------------------------

def _node0_response(op: LongRangeOperator, s: float) -> np.ndarray:
    """Response of node 0 at lag s to unit white noise in each cell (cell c feeds node c + 1)."""
    e = np.zeros(op.N)
    e[0] = 1.0
    r = np.fft.irfft(np.exp(-s * op.circulant_eigs()[: op.N // 2 + 1]) * np.fft.rfft(e), n=op.N)
    return np.roll(r, -1) / op.h


def linear_coupled_error(op_c: LongRangeOperator, op_f: LongRangeOperator, t: float, n_quad: int = 2000) -> float:
    """Exact RMS of u^h - u^{h_f} at node 0 for the linear noise-driven lattice equation.

    Both grids see one white noise; the difference is Gaussian with variance
    int_0^t int (K_c(s, y) - K_f(s, y))^2 dy ds, evaluated with a graded
    trapezoid rule in s.
    """
    r = op_f.N // op_c.N
    s = np.concatenate([[0.0], np.geomspace(1e-9, t, n_quad)])
    vals = np.array([np.sum((np.repeat(_node0_response(op_c, si), r) - _node0_response(op_f, si)) ** 2) * op_f.h
                     for si in s])
    return math.sqrt(float(np.trapezoid(vals, s)))


def zeta_sweep_oracle(hs, h_ref: float, zetas, gamma: float = 1.0, t: float = 0.5, kernel=None) -> list[dict]:
    """Exponent of the exact linear coupled error for several zeta (zeta = 0 means R = 1)."""
    kernel = kernel or WeightKernel.indicator()
    N_ref = round(1 / h_ref)
    out = []
    for z in zetas:
        def make(N):
            if z == 0:
                return LongRangeOperator(build_weights(kernel, 1, 0.01), N, gamma)
            return LongRangeOperator.build(N, z, gamma, kernel)
        ref = make(N_ref)
        errs = [linear_coupled_error(make(round(1 / h)), ref, t) for h in hs]
        fit = fit_rate(np.asarray(hs, float), np.array(errs))
        out.append({"zeta": z, "exponent": fit.exponent, "errors": errs,
                    "predicted": min(0.5, 0.5 - z) if z else 0.5})
    return out
