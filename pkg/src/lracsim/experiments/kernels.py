"""Heat-kernel studies: lattice vs continuum distance, L2 functionals, kernel increments."""
from __future__ import annotations

import time

import numpy as np
import scipy.integrate
import scipy.linalg

from ..operator import LongRangeOperator
from ..semigroup import (ContinuousHeatKernel, DiscreteSemigroup, kernel_distance, kernel_space_increment,
                         kernel_time_increment, l2_envelopes, l2_functionals)
from .fitting import fit_rate
from .report import ExperimentReport

SEMIGROUP_HS = tuple(2.0**-e for e in range(4, 10))


def expm_oracle_error(N: int, zeta: float | None, gamma: float, t: float, kernel=None) -> float:
    """max |h * nodal kernel - expm(t gamma A)| for the circulant propagator."""
    op = _op(N, zeta, gamma, kernel)
    P = DiscreteSemigroup(op, "circulant").propagator(t)
    E = scipy.linalg.expm(t * op.dense())
    return float(np.max(np.abs(P - E)))


def _op(N, zeta, gamma, kernel=None):
    if zeta is None:  # nearest neighbour
        from ..kernel import WeightKernel, build_weights

        return LongRangeOperator(build_weights(kernel or WeightKernel.indicator(), 1, 0.01), N, gamma)
    return LongRangeOperator.build(N, zeta, gamma, kernel)


def study_semigroup_convergence(hs=SEMIGROUP_HS, zeta: float = 0.25, gamma: float = 1.0, t0: float = 0.1,
                                kernel=None, oracle_Ns=(8, 16, 32), oracle_tol: float = 1e-8) -> ExperimentReport:
    t_start = time.perf_counter()
    hs = np.asarray(hs, float)
    rep = ExperimentReport("semigroup", {"hs": hs, "zeta": zeta, "gamma": gamma, "t0": t0,
                                         "kernel_kind": "sine series (kind=paper)"})
    g = ContinuousHeatKernel(gamma, t0)
    dists = []
    for h in hs:
        op = _op(round(1 / h), zeta, gamma, kernel)
        d = kernel_distance(DiscreteSemigroup(op, "paper"), g, t0)
        dists.append(d)
        rep.per_h.append({"h": h, "R": op.R, "sup_distance": d})
        rep.errors.append((h, 0, d))
    fit = fit_rate(hs, np.array(dists))
    rep.rates.append(fit.as_row("sup_distance"))
    target = 2 - 2 * zeta - 0.25
    rep.check("kernel distance exponent", fit.exponent, f">= {target:.4g}", fit.exponent >= target)
    for N in oracle_Ns:
        for t in (t0, 0.37):
            e = expm_oracle_error(N, zeta if N > 8 else None, gamma, t, kernel)
            rep.check(f"circulant kernel vs expm N={N} t={t:g}", e, f"<= {oracle_tol}", e <= oracle_tol)
    rep.notes.append("the distance is measured for the sine-series kernel; the expm oracle applies to the "
                     "periodic (circulant) propagator, which additionally carries the cosine and constant modes")
    rep.wall_clock = time.perf_counter() - t_start
    return rep


def quadrature_functionals(g_h: DiscreteSemigroup, t: float, x_index: int, tol: float = 1e-10) -> dict:
    """Independent evaluation: nodal kernels summed with the trapezoid rule in y,
    integrated adaptively in time."""
    h = g_h.h

    def row(s):
        K = g_h.nodal_matrix(s)
        return np.array([h * np.sum(K[x_index] ** 2), h * h * np.sum(K**2)])

    space, full = row(t)
    st, _ = scipy.integrate.quad_vec(row, 0.0, t, epsrel=tol, epsabs=0.0, limit=400)
    return {"space_int": space, "full_int": full, "space_time_int": st[0], "full_time_int": st[1]}


def study_l2_functionals(N: int = 64, zeta: float = 0.25, gamma: float = 1.0, ts=(0.05, 0.2, 1.0),
                         rel_tol: float = 1e-3, kernel=None) -> ExperimentReport:
    t_start = time.perf_counter()
    rep = ExperimentReport("l2_functionals", {"N": N, "zeta": zeta, "gamma": gamma, "ts": list(ts),
                                              "rel_tol": rel_tol})
    g_h = DiscreteSemigroup(_op(N, zeta, gamma, kernel), "paper")
    x_index = N // 3
    rows = []
    for t in ts:
        closed = l2_functionals(g_h, t)
        env = l2_envelopes(gamma, t)
        quad = quadrature_functionals(g_h, t, x_index)
        for name in ("space_int", "space_time_int", "full_int", "full_time_int"):
            c = closed[name]
            c_x = float(c[x_index]) if np.ndim(c) else float(c)
            c_max = float(np.max(c))
            rel = abs(c_x - quad[name]) / abs(quad[name])
            rows.append([t, name, c_x, quad[name], rel, c_max, env[name]])
            rep.check(f"{name} t={t:g} closed vs quadrature", rel, f"<= {rel_tol}", rel <= rel_tol)
            rep.check(f"{name} t={t:g} within envelope", c_max, f"<= {env[name]:.6g}", 0 < c_max <= env[name])
    rep.extra_tables["l2_functionals"] = (["t", "functional", "closed_form", "quadrature", "rel_diff", "max_over_x",
                                           "envelope"], rows)
    rep.wall_clock = time.perf_counter() - t_start
    return rep


def study_kernel_increments(N: int = 256, zeta: float = 0.25, gamma: float = 1.0, t: float = 0.5,
                            x: float = 0.3, lags=None) -> ExperimentReport:
    """Hoelder exponents of the squared space and time increments of the lattice kernel."""
    t_start = time.perf_counter()
    op = _op(N, zeta, gamma)
    g_h = DiscreteSemigroup(op, "paper")
    lags = np.asarray(lags if lags is not None else [2.0**-e for e in range(3, 8)], float)
    rep = ExperimentReport("kernel_increments", {"N": N, "zeta": zeta, "gamma": gamma, "t": t, "x": x,
                                                 "lags": lags})
    space = np.array([kernel_space_increment(g_h, t, x, x + d) for d in lags])
    tim = np.array([kernel_time_increment(g_h, t, t + d, x) for d in lags])
    fs, ft = fit_rate(lags, space), fit_rate(lags, tim)
    rep.rates += [fs.as_row("space"), ft.as_row("time")]
    rep.extra_tables["increments"] = (["lag", "space_increment", "time_increment"], list(zip(lags, space, tim)))
    rep.check("space increment exponent", fs.exponent, ">= 0.85", fs.exponent >= 0.85)
    rep.check("time increment exponent", ft.exponent, ">= 0.4", ft.exponent >= 0.4)
    rep.wall_clock = time.perf_counter() - t_start
    return rep
