"""Batched integration of several coupled runs sharing one Brownian sheet."""
from __future__ import annotations

import numpy as np

from ..dynamics import DriftSpec, SemiImplicitSolver, sample_initial
from ..noise import CoupledIncrements, NoisePlan
from ..operator import LongRangeOperator


def study_dt(h_min: float) -> float:
    """Common time step for convergence studies: min(1e-4, h^2) on the finest grid."""
    return min(1e-4, h_min**2)


def run_coupled(runs: dict, sigma: float, dt: float, n_steps: int, u0, noise: CoupledIncrements | None,
                observe=None, observe_every: int = 1) -> dict:
    """Advance every run (key -> (operator, drift)) with the semi-implicit scheme.

    All runs see the same noise realization, aggregated to their own grid.
    ``observe(step, states)`` is called at step 0 and every
    ``observe_every`` steps (and at the end); returning True stops early.
    Returns the final states keyed like ``runs``.
    """
    n_paths = len(noise.replicas) if noise is not None else 1
    solvers = {key: SemiImplicitSolver(op, dt) for key, (op, _) in runs.items()}
    states = {key: np.tile(sample_initial(u0, op.N), (n_paths, 1)) for key, (op, _) in runs.items()}
    if observe is not None and observe(0, states):
        return states
    use_noise = noise is not None and sigma != 0.0
    block = noise.plan.block if noise is not None else 64
    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while step < n_steps:
            n = min(block - step % block, n_steps - step)
            ch = noise.chunk(step, n) if use_noise else None
            for i in range(n):
                for key, (op, drift) in runs.items():
                    dB = ch[op.N][:, i, :] if ch is not None else None
                    states[key] = solvers[key](states[key], drift, dB, sigma)
                step += 1
                if observe is not None and (step % observe_every == 0 or step == n_steps):
                    if observe(step, states):
                        return states
    return states


def level_operators(Ns, zeta: float, gamma: float, kernel=None) -> dict[int, LongRangeOperator]:
    return {N: LongRangeOperator.build(N, zeta, gamma, kernel) for N in Ns}


def make_noise(seed: int, master_n: int, dt: float, Ns, replicas, seeds=None) -> CoupledIncrements:
    return CoupledIncrements(NoisePlan(seed, master_n, dt), Ns, dt, replicas, seeds)


def finite_rows(*arrays) -> np.ndarray:
    ok = np.ones(arrays[0].shape[0], dtype=bool)
    for a in arrays:
        ok &= np.all(np.isfinite(a.reshape(a.shape[0], -1)), axis=1)
    return ok


__all__ = ["DriftSpec", "run_coupled", "level_operators", "make_noise", "study_dt", "finite_rows"]
