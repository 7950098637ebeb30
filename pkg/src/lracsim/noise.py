"""Seeded space-time white noise on a master grid, aggregated exactly to coarser grids.

Master cell j covers [j h_m, (j+1) h_m) and time slab n covers
[n dt_m, (n+1) dt_m).  Each increment is the white-noise integral over
its cell x slab, i.e. Normal(0, h_m dt_m).  Random numbers come from a
Philox stream keyed by (seed, replica) whose counter is positioned at the
slab block, so any block can be regenerated independently.

Lattice node m is fed by the cell ((m-1) h, m h], matching
sqrt(h) B_m(t) = int_{(m-1)h}^{mh} W(x, t) dx.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IncompatibleRefinement
from .operator import LongRangeOperator

BLOCK_SLABS = 64


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while n > 1:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    return out


def tree_sum(a: np.ndarray, factor: int, axis: int) -> np.ndarray:
    """Sum consecutive groups of ``factor`` entries along ``axis``.

    The grouping is done prime factor by prime factor in ascending order,
    so for powers of two aggregating by 4 is literally two rounds of
    pairwise sums.  That makes coarsening chains bit-identical.
    """
    axis = axis % a.ndim
    for p in _prime_factors(factor):
        shape = a.shape[:axis] + (a.shape[axis] // p, p) + a.shape[axis + 1:]
        r = a.reshape(shape)
        acc = r.take(0, axis=axis + 1)
        for i in range(1, p):
            acc = acc + r.take(i, axis=axis + 1)
        a = acc
    return a


@dataclass(frozen=True)
class NoisePlan:
    seed: int
    master_n: int
    dt_master: float
    block: int = BLOCK_SLABS

    def __post_init__(self):
        if self.master_n < 1 or self.master_n & (self.master_n - 1):
            raise ValueError("master_n must be a power of two")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.dt_master <= 0:
            raise ValueError("dt_master must be positive")

    @property
    def h_master(self) -> float:
        return 1.0 / self.master_n

    @property
    def cell_std(self) -> float:
        return math.sqrt(self.h_master * self.dt_master)

    def _block(self, replica: int, b: int) -> np.ndarray:
        return _gen_block(self.seed, replica, b, self.block, self.master_n) * self.cell_std

    def master_increments(self, replica: int, slab_start: int, n_slabs: int) -> np.ndarray:
        """White-noise integrals over master cells, shape (n_slabs, master_n)."""
        if n_slabs <= 0:
            return np.empty((0, self.master_n))
        b0, b1 = slab_start // self.block, (slab_start + n_slabs - 1) // self.block
        parts = [self._block(replica, b) for b in range(b0, b1 + 1)]
        full = parts[0] if len(parts) == 1 else np.concatenate(parts)
        off = slab_start - b0 * self.block
        return full[off:off + n_slabs]

    def ratios(self, n_coarse: int, dt_coarse: float) -> tuple[int, int]:
        if n_coarse < 1 or self.master_n % n_coarse:
            raise IncompatibleRefinement(f"n={n_coarse} does not divide master_n={self.master_n}")
        rt = round(dt_coarse / self.dt_master)
        if rt < 1 or abs(rt * self.dt_master - dt_coarse) > 1e-9 * dt_coarse:
            raise IncompatibleRefinement(
                f"dt={dt_coarse} is not an integer multiple of dt_master={self.dt_master}")
        return self.master_n // n_coarse, rt


@lru_cache(maxsize=64)
def _gen_block_cached(seed: int, replica: int, b: int, block: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=np.array([seed, replica], dtype=np.uint64),
                              counter=np.array([0, 0, b, 0], dtype=np.uint64))
    out = np.random.Generator(bitgen).standard_normal((block, n))
    out.setflags(write=False)
    return out


def _gen_block(seed, replica, b, block, n):
    return _gen_block_cached(int(seed), int(replica), int(b), int(block), int(n))


def aggregate(w: np.ndarray, space_ratio: int, time_ratio: int) -> np.ndarray:
    """Sum master increments (..., slabs, cells) over coarse slabs, then cells.

    The order (time first) is shared with :class:`CoupledIncrements` so both
    paths produce bit-identical sums.
    """
    return tree_sum(tree_sum(w, time_ratio, axis=-2), space_ratio, axis=-1)


def cells_to_nodes(cell_sums: np.ndarray, h: float) -> np.ndarray:
    """Brownian increments Delta B_m = (1/sqrt h) * W(cell feeding node m)."""
    return np.roll(cell_sums, 1, axis=-1) / math.sqrt(h)


def increments_for_grid(plan: NoisePlan, n_coarse: int, dt_coarse: float, replica: int = 0,
                        step_start: int = 0, n_steps: int = 1) -> np.ndarray:
    """Per-node Brownian increments for a coarse grid, shape (n_steps, n_coarse).

    Each entry has variance ``dt_coarse``; the integrators multiply by
    sqrt(2 sigma / h).
    """
    rs, rt = plan.ratios(n_coarse, dt_coarse)
    w = plan.master_increments(replica, step_start * rt, n_steps * rt)
    return cells_to_nodes(aggregate(w, rs, rt), 1.0 / n_coarse)


class CoupledIncrements:
    """Shared noise for several grids and a batch of paths.

    Each path is a Philox stream (seed, replica); by default all paths use
    ``plan.seed`` with the given replica indices, ``seeds`` overrides the
    seed per path.  ``chunk(step_start, n_steps)`` returns
    {N: array (paths, n_steps, N)} for every registered grid, generating
    the master sheet once.
    """

    def __init__(self, plan: NoisePlan, grids, dt: float, replicas, seeds=None):
        self.plan = plan
        self.dt = dt
        self.replicas = list(replicas)
        self.seeds = [plan.seed] * len(self.replicas) if seeds is None else [int(s) for s in seeds]
        if len(self.seeds) != len(self.replicas):
            raise ValueError("seeds and replicas must have equal length")
        self.ratios = {N: plan.ratios(N, dt) for N in grids}
        rts = {rt for _, rt in self.ratios.values()}
        if len(rts) != 1:
            raise IncompatibleRefinement("coupled grids must share one time step")
        self.rt = rts.pop()

    def _master(self, seed: int, replica: int, s0: int, n: int) -> np.ndarray:
        plan = self.plan
        if seed != plan.seed:
            plan = NoisePlan(seed, plan.master_n, plan.dt_master, plan.block)
        return plan.master_increments(replica, s0, n)

    def chunk(self, step_start: int, n_steps: int) -> dict[int, np.ndarray]:
        rt = self.rt
        w = np.stack([self._master(s, r, step_start * rt, n_steps * rt)
                      for s, r in zip(self.seeds, self.replicas)])
        w = tree_sum(w, rt, axis=-2)
        out = {}
        # coarsen fine -> coarse, reusing the previous level's sums
        level, current = self.plan.master_n, w
        for N in sorted(self.ratios, reverse=True):
            current = tree_sum(current, level // N, axis=-1)
            level = N
            out[N] = cells_to_nodes(current, 1.0 / N)
        return out


def _mode_basis(op: LongRangeOperator, kind: str):
    from .semigroup import DiscreteSemigroup

    g = DiscreteSemigroup(op, kind)
    keep = g.mode_norms() > 0.5
    return g.eigs[keep], g.modes[keep]


def stochastic_convolution(plan: NoisePlan, op: LongRangeOperator, times, dt: float,
                           replicas=(0,), kind: str = "paper") -> np.ndarray:
    """Lattice field B^h(x_m, t) = int_0^t int g^h_{t-s}(x_m, y) W(dy, ds) at the given times.

    Each eigenmode is advanced with the exact Ornstein-Uhlenbeck transition;
    the Gaussian kicks are the standardized cell increments of ``plan``
    rotated into the (orthonormal) eigenbasis, so the field is driven by the
    same Brownian sheet as the lattice SDE.  Returns an array of shape
    (len(replicas), len(times), N).
    """
    times = np.asarray(times, dtype=float)
    steps = np.rint(times / dt).astype(int)
    if np.any(np.abs(steps * dt - times) > 1e-9 * np.maximum(times, 1.0)):
        raise ValueError("times must be multiples of dt")
    if np.any(np.diff(steps) < 0) or np.any(steps < 0):
        raise ValueError("times must be non-decreasing and non-negative")
    lam, V = _mode_basis(op, kind)
    N, h = op.N, op.h
    decay = np.exp(-lam * dt)
    kick = np.sqrt(_ou_variance(lam, dt))
    proj = math.sqrt(h) * V.T  # standardized node noise -> iid N(0,1) mode kicks
    out = np.empty((len(replicas), len(times), N))
    a = np.zeros((len(replicas), len(lam)))
    src = CoupledIncrements(plan, [N], dt, replicas)
    n_total = int(steps[-1]) if len(steps) else 0
    rec = 0
    while rec < len(steps) and steps[rec] == 0:
        out[:, rec] = 0.0
        rec += 1
    step, blk = 0, plan.block
    while step < n_total:
        n = min(blk - step % blk, n_total - step)
        z = src.chunk(step, n)[N] / math.sqrt(dt)
        xi = z @ proj
        for i in range(n):
            a = decay * a + kick * xi[:, i]
            step += 1
            while rec < len(steps) and steps[rec] == step:
                out[:, rec] = a @ V
                rec += 1
    return out


def _ou_variance(lam: np.ndarray, dt: float) -> np.ndarray:
    out = np.full(lam.shape, float(dt))
    pos = lam > 0
    out[pos] = -np.expm1(-2.0 * lam[pos] * dt) / (2.0 * lam[pos])
    return out
