"""Studies of the lattice operator: spectrum, eigenvalue rates, oracle checks, consistency."""
from __future__ import annotations

import itertools
import time

import numpy as np

from ..kernel import WeightKernel, fourth_moment
from ..operator import (LongRangeOperator, apply, apply_spectral, consistency_error,
                        consistency_prediction, eigenvalue_gap_to_continuum, gap_prediction,
                        inverse_trace_bound, inverse_trace_envelope)
from .fitting import fit_rate
from .report import ExperimentReport

SANDWICH_SLACK = 1e-10
SANDWICH_NS = (8, 16, 32, 64, 128, 256)
SANDWICH_ZETAS = (0.1, 0.25, 0.4, 0.49)
RATE_HS = tuple(2.0**-e for e in range(4, 11))


def eigen_table(op: LongRangeOperator) -> list[list]:
    """Rows k, lambda_paper, lambda_circulant, lower_bound, upper_bound, gap for k = 0..N.

    ``lambda_circulant`` is mu_k for k < N (the DFT index has no k = N entry;
    that row repeats mu_0 = 0 by periodicity).
    """
    sv = op.spectrum()
    lam, mu = sv.paper_eigs, sv.circulant_eigs
    lo, hi = sv.lower_bounds, sv.upper_bounds
    rows = []
    for k in range(op.N + 1):
        rows.append([k, lam[k], mu[k % op.N], lo[k], hi[k], hi[k] - lam[k]])
    return rows


def sandwich_violations(op: LongRangeOperator, slack: float = SANDWICH_SLACK) -> dict:
    sv = op.spectrum()
    k = np.arange(op.N + 1)
    lam, lo, hi = sv.paper_eigs, sv.lower_bounds, sv.upper_bounds
    tol = slack * np.maximum(1.0, np.abs(hi))
    low_bad = (k >= 1) & (lam < lo - tol)
    up_bad = (k >= 1) & (lam > hi + tol)
    # the lower bound rests on sin^2 x >= 4 x^2 / pi^2, valid for k h R <= 1
    restricted = (k >= 1) & (k * op.R <= op.N)
    return {
        "lower": int(low_bad.sum()),
        "upper": int(up_bad.sum()),
        "lower_restricted": int((low_bad & restricted).sum()),
        "first_lower_k": int(k[low_bad][0]) if low_bad.any() else -1,
        "worst_ratio": float(np.min(lam[1:] / lo[1:])),
    }


def study_spectral_sandwich(Ns=SANDWICH_NS, zetas=SANDWICH_ZETAS, kernels=("indicator", "exponential"),
                            gamma: float = 1.0) -> ExperimentReport:
    t0 = time.perf_counter()
    rep = ExperimentReport("sandwich", {"Ns": list(Ns), "zetas": list(zetas), "kernels": list(kernels),
                                        "gamma": gamma, "slack": SANDWICH_SLACK})
    rows = []
    tot = {"lower": 0, "upper": 0, "lower_restricted": 0}
    for N, z, kname in itertools.product(Ns, zetas, kernels):
        op = LongRangeOperator.build(N, z, gamma, WeightKernel.named(kname))
        v = sandwich_violations(op)
        for key in tot:
            tot[key] += v[key]
        rows.append([N, z, kname, op.R, v["lower"], v["upper"], v["lower_restricted"], v["first_lower_k"],
                     v["worst_ratio"]])
    rep.extra_tables["sandwich"] = (["N", "zeta", "kernel", "R", "lower_violations", "upper_violations",
                                     "lower_violations_k_le_N_over_R", "first_lower_k", "min_lambda_over_4gk2"],
                                    rows)
    rep.check("lower bound 4 gamma k^2 <= lambda_k violations", tot["lower"], "== 0", tot["lower"] == 0)
    rep.check("upper bound lambda_k <= gamma pi^2 k^2 violations", tot["upper"], "== 0", tot["upper"] == 0)
    rep.check("lower bound violations restricted to k <= N/R", tot["lower_restricted"], "== 0",
              tot["lower_restricted"] == 0, gating=False)
    if tot["lower"]:
        rep.notes.append("the lower bound fails only where k h R > 1; see sandwich.csv")
    rep.wall_clock = time.perf_counter() - t0
    return rep


def study_eigen_gap(hs=RATE_HS, zetas=(0.25, 0.4, 0.45), ks=(1, 2, 3), gamma: float = 1.0,
                    kernel=None) -> ExperimentReport:
    t0 = time.perf_counter()
    hs = np.asarray(hs, float)
    rep = ExperimentReport("eigen_gap", {"hs": hs, "zetas": list(zetas), "ks": list(ks), "gamma": gamma})
    for z in zetas:
        gaps = {k: [] for k in ks}
        for h in hs:
            op = LongRangeOperator.build(round(1 / h), z, gamma, kernel)
            for k in ks:
                g = eigenvalue_gap_to_continuum(op, k)
                gaps[k].append(g)
                rep.per_h.append({"zeta": z, "h": h, "k": k, "R": op.R, "gap": g,
                                  "taylor_bound": float(gap_prediction(op, k))})
        for k in ks:
            fit = fit_rate(hs, np.array(gaps[k]))
            rep.rates.append(fit.as_row(f"zeta={z:g},k={k}"))
            target = 2 - 2 * z - 0.25
            rep.check(f"gap exponent zeta={z:g} k={k}", fit.exponent, f">= {target:.4g}", fit.exponent >= target)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def study_inverse_trace(hs=RATE_HS, zetas=(0.25, 0.45), gamma: float = 1.0, kernel=None) -> ExperimentReport:
    t0 = time.perf_counter()
    hs = np.asarray(hs, float)
    rep = ExperimentReport("inverse_trace", {"hs": hs, "zetas": list(zetas), "gamma": gamma})
    for z in zetas:
        vals = []
        for h in hs:
            op = LongRangeOperator.build(round(1 / h), z, gamma, kernel)
            v = inverse_trace_bound(op)
            env = inverse_trace_envelope(op)
            vals.append(v)
            rep.per_h.append({"zeta": z, "h": h, "R": op.R, "inverse_trace": v, "envelope": env})
            rep.check(f"inverse trace <= envelope zeta={z:g} h={h:g}", v, f"<= {env:.6g}", v <= env, gating=False)
        fit = fit_rate(hs, np.array(vals))
        rep.rates.append(fit.as_row(f"zeta={z:g}"))
        rep.check(f"inverse-trace growth |slope| zeta={z:g}", abs(fit.exponent), "< 0.1", abs(fit.exponent) < 0.1)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def study_operator_oracle(Ns=(8, 16, 32, 64), zeta: float = 0.25, n_vectors: int = 1000, seed: int = 0,
                          gamma: float = 1.0, tol: float = 1e-10) -> ExperimentReport:
    """apply() and the spectral path against a dense circulant matrix product."""
    t0 = time.perf_counter()
    rep = ExperimentReport("operator_oracle", {"Ns": list(Ns), "zeta": zeta, "n_vectors": n_vectors,
                                               "gamma": gamma, "tol": tol}, seed=seed)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0x0A], dtype=np.uint64)))
    for N in Ns:
        for kname in ("indicator", "exponential"):
            op = LongRangeOperator.build(N, zeta, gamma, WeightKernel.named(kname))
            U = rng.standard_normal((n_vectors, N))
            dense = U @ op.dense().T
            scale = max(1.0, float(np.max(np.abs(dense))))
            e_direct = float(np.max(np.abs(apply(op, U) - dense))) / scale
            e_spec = float(np.max(np.abs(apply_spectral(op, U) - dense))) / scale
            quad = float(np.max(np.einsum("ij,ij->i", U, apply(op, U))))
            rep.per_h.append({"N": N, "kernel": kname, "R": op.R, "direct_rel_err": e_direct,
                              "spectral_rel_err": e_spec, "max_quadratic_form": quad})
            rep.check(f"direct vs dense N={N} {kname}", e_direct, f"<= {tol}", e_direct <= tol)
            rep.check(f"spectral vs dense N={N} {kname}", e_spec, f"<= {tol}", e_spec <= tol)
            rep.check(f"<u, A u> <= 0 N={N} {kname}", quad, "<= 0", quad <= 1e-9 * scale, gating=False)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def _sin2pi(x):
    return np.sin(2 * np.pi * x)


def _sin2pi_xx(x):
    return -4 * np.pi**2 * np.sin(2 * np.pi * x)


def study_consistency(hs=tuple(2.0**-e for e in range(4, 10)), zetas=(0.1, 0.25, 0.4), gamma: float = 1.0,
                      kernel=None) -> ExperimentReport:
    t0 = time.perf_counter()
    hs = np.asarray(hs, float)
    rep = ExperimentReport("consistency", {"hs": hs, "zetas": list(zetas), "f": "sin(2 pi x)"})
    sup_f4 = (2 * np.pi) ** 4
    for z in zetas:
        errs = []
        for h in hs:
            op = LongRangeOperator.build(round(1 / h), z, gamma, kernel)
            e = consistency_error(op, _sin2pi, _sin2pi_xx)
            errs.append(e)
            rep.per_h.append({"zeta": z, "h": h, "R": op.R, "error": e, "fourth_moment": fourth_moment(op.weights),
                              "taylor_prediction": consistency_prediction(op, sup_f4)})
            rep.errors.append((h, 0, e))
        fit = fit_rate(hs, np.array(errs))
        rep.rates.append(fit.as_row(f"zeta={z:g}"))
        target = 2 - 2 * z - 0.2
        rep.check(f"consistency order zeta={z:g}", fit.exponent, f">= {target:.4g}", fit.exponent >= target)
        rep.check(f"data supports O(h^2) zeta={z:g}", fit.exponent, ">= 1.8", fit.exponent >= 1.8, gating=False)
    rep.wall_clock = time.perf_counter() - t0
    return rep
