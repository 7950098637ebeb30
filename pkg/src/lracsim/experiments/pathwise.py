"""Pathwise studies: comparison principle, moment bounds, transition times."""
from __future__ import annotations

import time

import numpy as np

from ..dynamics import NOT_HIT, DriftSpec, HittingSpec
from ..errors import InsufficientTransitions
from ..operator import LongRangeOperator
from .engine import level_operators, make_noise, run_coupled, study_dt
from .fitting import bootstrap_mean_ci
from .parallel import chunks, run_chunks
from .report import ExperimentReport


# -- comparison principle -----------------------------------------------------

def _comparison_worker(params: dict, seeds: list[int]) -> np.ndarray:
    op = LongRangeOperator.build(params["N"], params["zeta"], params["gamma"])
    Z = params["Z"]
    runs = {name: (op, DriftSpec(name, Z)) for name in ("lower", "truncated", "upper")}
    runs["full"] = (op, DriftSpec("full"))
    runs["check"] = (op, DriftSpec("truncated", params["Z_check"]))
    noise = make_noise(0, params["N"], params["dt"], [params["N"]], [0] * len(seeds), seeds)
    slack = params["slack"]
    P = len(seeds)
    stats = np.zeros((P, 6))  # worst lower gap, worst upper gap, frames, strict frames, agree frames, agree err
    alive = np.ones(P, dtype=bool)  # full still below Z_check
    Zc = params["Z_check"]

    def observe(step, s):
        lo, tr, up, fu, ck = s["lower"], s["truncated"], s["upper"], s["full"], s["check"]
        stats[:, 0] = np.fmax(stats[:, 0], np.max(lo - tr, axis=1))
        stats[:, 1] = np.fmax(stats[:, 1], np.max(tr - up, axis=1))
        stats[:, 2] += 1
        stats[:, 3] += np.max(up - lo, axis=1) > slack
        alive[:] &= np.max(np.abs(fu), axis=1) < Zc
        stats[alive, 4] += 1
        d = np.max(np.abs(fu - ck), axis=1)
        stats[alive, 5] = np.fmax(stats[alive, 5], d[alive])
        return False

    stats[:, 0] = stats[:, 1] = -np.inf
    run_coupled(runs, params["sigma"], params["dt"], round(params["T"] / params["dt"]), params["u0"], noise,
                observe, params["record_every"])
    return stats


def study_comparison(n_seeds: int = 100, seed: int = 0, N: int = 32, zeta: float = 0.25, gamma: float = 1.0,
                     sigma: float = 0.3, T: float = 1.0, dt: float = 1e-3, Z: float = 1.2, Z_check: float = 2.0,
                     u0=-1.0, record_every: int = 1, threads: int | None = None) -> ExperimentReport:
    t_start = time.perf_counter()
    slack = 1e-8 + 10 * dt
    params = {"N": N, "zeta": zeta, "gamma": gamma, "sigma": sigma, "T": T, "dt": dt, "Z": Z, "Z_check": Z_check,
              "u0": u0, "record_every": record_every, "slack": slack}
    rep = ExperimentReport("comparison", dict(params, n_seeds=n_seeds), seed=seed)
    seeds = [seed + i for i in range(n_seeds)]
    parts = run_chunks(_comparison_worker, [(params, [seeds[i] for i in c]) for c in chunks(n_seeds)], threads)
    stats = np.concatenate(parts)
    rows = [[s, *row] for s, row in zip(seeds, stats)]
    rep.extra_tables["comparison"] = (["seed", "max_lower_minus_trunc", "max_trunc_minus_upper", "frames",
                                       "frames_with_spread", "frames_before_Z_check",
                                       "max_full_trunc_diff_before_Z_check"],
                                      rows)
    ordered = (stats[:, 0] <= slack) & (stats[:, 1] <= slack)
    rep.check("seeds with u^- <= u_trunc <= u^+ at every node and frame", int(ordered.sum()),
              f"== {n_seeds}", bool(ordered.all()))
    worst_agree = float(np.max(stats[:, 5]))
    rep.check(f"max |u_full - u_trunc(Z={Z_check:g})| while sup|u| < {Z_check:g}", worst_agree, "<= 1e-12",
              worst_agree <= 1e-12)
    rep.check("seeds where the truncations differ somewhere", int((stats[:, 3] > 0).sum()), "> 0",
              bool((stats[:, 3] > 0).any()), gating=False)
    rep.wall_clock = time.perf_counter() - t_start
    return rep


# -- moments ------------------------------------------------------------------

def _moment_worker(params: dict, reps: range) -> np.ndarray:
    Ns = params["Ns"]
    ops = level_operators(Ns, params["zeta"], params["gamma"])
    drift = DriftSpec("full")
    noise = make_noise(params["seed"], max(Ns), params["dt"], Ns, reps)
    sup = np.zeros((len(reps), len(Ns)))

    def observe(step, s):
        for j, N in enumerate(Ns):
            sup[:, j] = np.fmax(sup[:, j], np.max(np.abs(s[N]), axis=1))
        return False

    run_coupled({N: (ops[N], drift) for N in Ns}, params["sigma"], params["dt"], round(params["T"] / params["dt"]),
                params["u0"], noise, observe, 1)
    return sup


def study_moments(hs=(1 / 16, 1 / 32, 1 / 64, 1 / 128), zeta: float = 0.25, gamma: float = 1.0,
                  sigma: float = 0.1, T: float = 0.5, p: float = 4.0, replicas: int = 200, seed: int = 0,
                  u0=-1.0, threads: int | None = None) -> ExperimentReport:
    t_start = time.perf_counter()
    hs = np.asarray(hs, float)
    Ns = [round(1 / h) for h in hs]
    dt = study_dt(float(hs.min()))
    params = {"Ns": Ns, "zeta": zeta, "gamma": gamma, "sigma": sigma, "T": T, "dt": dt, "seed": seed, "u0": u0}
    rep = ExperimentReport("moments", dict(params, hs=hs, p=p, replicas=replicas), seed=seed)
    sup = np.concatenate(run_chunks(_moment_worker, [(params, r) for r in chunks(replicas)], threads))
    bad = ~np.all(np.isfinite(sup), axis=1)
    rep.parameters["failed_replicas"] = int(bad.sum())
    sup = sup[~bad]
    moments = np.mean(sup**p, axis=0)
    for r, row in enumerate(sup):
        for h, v in zip(hs, row):
            rep.errors.append((h, r, v))
    for h, m in zip(hs, moments):
        rep.per_h.append({"h": h, f"E_sup_u_{p:g}": float(m)})
    ratio = float(moments.max() / moments.min())
    rep.check(f"E sup|u^h|^{p:g} max/min across h", ratio, "<= 1.5", ratio <= 1.5)
    rep.wall_clock = time.perf_counter() - t_start
    return rep


# -- transition times ---------------------------------------------------------

def _transition_worker(params: dict, reps: range) -> np.ndarray:
    Ns = params["Ns"]
    ops = level_operators(Ns, params["zeta"], params["gamma"])
    drift = DriftSpec("full")
    spec = HittingSpec(params["target"], params["rho"], params["q"])
    dt = params["dt"]
    noise = make_noise(params["seed"], max(Ns), dt, Ns, reps)
    tau = np.full((len(reps), len(Ns)), NOT_HIT)

    def observe(step, s):
        for j, N in enumerate(Ns):
            new = spec.inside(s[N]) & np.isinf(tau[:, j])
            tau[new, j] = step * dt
        return bool(np.all(np.isfinite(tau)))

    run_coupled({N: (ops[N], drift) for N in Ns}, params["sigma"], dt, round(params["T"] / dt), params["u0"],
                noise, observe, params["record_every"])
    return tau


def transition_table(hs, zeta, gamma, sigma, T, dt, rho, q, replicas, seed, u0=-1.0, target=1.0,
                     record_every: int = 1, threads: int | None = None) -> np.ndarray:
    Ns = [round(1 / h) for h in hs]
    params = {"Ns": Ns, "zeta": zeta, "gamma": gamma, "sigma": sigma, "T": T, "dt": dt, "rho": rho, "q": q,
              "seed": seed, "u0": u0, "target": target, "record_every": record_every}
    return np.concatenate(run_chunks(_transition_worker, [(params, r) for r in chunks(replicas)], threads))


def study_transition_times(hs=(1 / 16, 1 / 32, 1 / 64, 1 / 128), zeta: float = 0.25, gamma: float = 0.01,
                           sigma: float = 0.15, T: float = 200.0, dt: float = 0.01, rho: float = 0.4,
                           q: float = 2.0, replicas: int = 200, seed: int = 0, u0=-1.0, target=1.0,
                           claim: str = "transition", threads: int | None = None) -> ExperimentReport:
    """Hitting times of the L^q ball around ``target`` on coupled grids; the finest h is the reference.

    Raises InsufficientTransitions (with the filled report attached as
    ``.report``) if fewer than half the replicas hit at some level.
    """
    t_start = time.perf_counter()
    hs = np.asarray(hs, float)
    rep = ExperimentReport(claim, {"hs": hs, "zeta": zeta, "gamma": gamma, "sigma": sigma, "T": T, "dt": dt,
                                   "rho": rho, "q": q, "replicas": replicas, "u0": u0, "target": target},
                           seed=seed)
    tau = transition_table(hs, zeta, gamma, sigma, T, dt, rho, q, replicas, seed, u0, target, threads=threads)
    capped = np.minimum(tau, T)
    hit = np.isfinite(tau).mean(axis=0)
    rep.extra_tables["tau"] = (["replica", *[f"tau_h={h:.17g}" for h in hs]],
                               [[r, *row] for r, row in enumerate(tau)])
    means = capped.mean(axis=0)
    cis = [bootstrap_mean_ci(capped[:, j], seed) for j in range(len(hs))]
    med = [float(np.median(np.abs(capped[:, j] - capped[:, -1]))) for j in range(len(hs) - 1)]
    for j, h in enumerate(hs):
        rep.per_h.append({"h": h, "hit_fraction": hit[j], "mean_tau_capped": means[j], "ci_lo": cis[j][0],
                          "ci_hi": cis[j][1], "median_abs_diff_to_ref": med[j] if j < len(med) else 0.0})
        for r in range(len(capped)):
            rep.errors.append((h, r, capped[r, j]))
    rep.check("hit fraction >= 0.5 at every h", float(hit.min()), ">= 0.5", hit.min() >= 0.5)
    rep.check("hit fraction at the coarsest h", float(hit[0]), ">= 0.8", hit[0] >= 0.8, gating=False)
    if hit.min() < 0.5:
        rep.notes.append("InsufficientTransitions: fewer than half of the replicas hit at some level")
        rep.wall_clock = time.perf_counter() - t_start
        err = InsufficientTransitions(f"hit fractions per h: {np.round(hit, 3).tolist()}")
        err.report = rep
        raise err
    diffs = np.abs(np.diff(means))
    rep.check("mean difference finest pair < coarsest pair", float(diffs[-1]), f"< {diffs[0]:.6g}",
              diffs[-1] < diffs[0])
    overlap = cis[-2][0] <= cis[-1][1] and cis[-1][0] <= cis[-2][1]
    rep.check("95% CIs of the two finest levels overlap", overlap, "true", overlap)
    # ties count as decreasing: a zero median at every level is exact pathwise agreement
    decreasing = all(b <= a for a, b in zip(med, med[1:]))
    rep.check("median |tau^h - tau^ref| non-increasing as h decreases", med, "non-increasing", decreasing)
    mean_abs = [float(np.mean(np.abs(capped[:, j] - capped[:, -1]))) for j in range(len(hs) - 1)]
    rep.check("mean |tau^h - tau^ref| per level", mean_abs, "informational", True, gating=False)
    rep.wall_clock = time.perf_counter() - t_start
    return rep
