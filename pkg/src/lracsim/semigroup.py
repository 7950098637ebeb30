"""Heat semigroups of the lattice operator and of the continuum Laplacian.

Two lattice kernels are available.  ``kind="paper"`` is the sine series
sum_{k=1}^{N} exp(-t lambda_k^h) v_k(x) v_k(y) with v_k the piecewise linear
interpolant of sqrt(2) sin(pi k m h).  ``kind="circulant"`` is the true
propagator exp(t gamma A^h_R) of the periodic lattice (includes the
mass-conserving constant mode); its nodal values equal the matrix
exponential divided by h.

Spatial integrals in the closed forms are lattice integrals (the periodic
trapezoid rule on the nodes), which is where the eigenvectors are
orthonormal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMode
from .operator import LongRangeOperator, eigenvalue_paper

SQRT2 = math.sqrt(2.0)
MIN_CONTINUUM_TIME = 1e-4


def _pl_interp_matrix(nodal: np.ndarray, x) -> np.ndarray:
    """Periodic piecewise-linear interpolation of each row of ``nodal`` at x."""
    K, N = nodal.shape
    x = np.asarray(x, dtype=float)
    s = np.mod(x, 1.0) * N
    i0 = np.floor(s).astype(int) % N
    w = s - np.floor(s)
    i1 = (i0 + 1) % N
    return nodal[:, i0] * (1.0 - w) + nodal[:, i1] * w


@dataclass(frozen=True)
class DiscreteSemigroup:
    op: LongRangeOperator
    kind: str = "paper"
    eigs: np.ndarray = field(init=False, repr=False)
    modes: np.ndarray = field(init=False, repr=False)
    # sqrt(2) for the sine vectors: the model's sin(pi k m h) are unnormalized
    normalization: float = field(init=False)

    def __post_init__(self):
        N = self.op.N
        m = np.arange(N)
        if self.kind == "paper":
            k = np.arange(1, N + 1)
            eigs = eigenvalue_paper(self.op, k)
            modes = SQRT2 * np.sin(np.pi * np.outer(k, m) / N)
            norm = SQRT2
        elif self.kind == "circulant":
            mu = self.op.circulant_eigs()
            rows, eigs = [np.ones(N)], [mu[0]]
            for k in range(1, (N + 1) // 2):
                rows.append(SQRT2 * np.cos(2 * np.pi * k * m / N))
                rows.append(SQRT2 * np.sin(2 * np.pi * k * m / N))
                eigs += [mu[k], mu[k]]
            if N % 2 == 0:
                rows.append(np.cos(np.pi * m))
                eigs.append(mu[N // 2])
            modes, eigs = np.array(rows), np.array(eigs)
            norm = SQRT2
        else:
            raise ValueError(f"unknown semigroup kind {self.kind!r}")
        object.__setattr__(self, "eigs", eigs)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "normalization", norm)

    @property
    def N(self) -> int:
        return self.op.N

    @property
    def h(self) -> float:
        return self.op.h

    def mode_norms(self) -> np.ndarray:
        """Lattice L2 norms squared h * sum_m v_k(m)^2 (0 for the null sine k = N)."""
        return self.h * np.sum(self.modes**2, axis=1)

    def mode_values(self, x) -> np.ndarray:
        return _pl_interp_matrix(self.modes, x)

    def nodal_matrix(self, t: float) -> np.ndarray:
        """Kernel values g_t(x_m, x_n) on the nodes."""
        w = np.exp(-t * self.eigs)
        return (self.modes.T * w) @ self.modes

    def propagator(self, t: float) -> np.ndarray:
        """Nodal solution operator: u(t) = P u(0) with P = h * nodal kernel."""
        return self.h * self.nodal_matrix(t)


def eval_discrete(g: DiscreteSemigroup, t, x, y):
    """g_t^h(x, y) with piecewise-linear interpolation between nodes.

    ``x`` and ``y`` broadcast against each other; ``t`` is a scalar.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    vx = g.mode_values(x.ravel())
    vy = g.mode_values(y.ravel())
    w = np.exp(-t * g.eigs)
    out = np.einsum("k,kn,kn->n", w, vx, vy).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ContinuousHeatKernel:
    """sum_{k>=1} exp(-gamma pi^2 k^2 t) 2 sin(pi k x) sin(pi k y), truncated for t >= t0."""

    gamma: float
    t0: float
    tail_tol: float = 1e-12
    K_max: int = field(init=False)

    def __post_init__(self):
        if self.t0 < MIN_CONTINUUM_TIME:
            raise ValueError(f"t0={self.t0} below {MIN_CONTINUUM_TIME}: series converges too slowly")
        a = self.gamma * np.pi**2 * self.t0
        K = 1
        while self.tail_bound(K, a) >= self.tail_tol:
            K += 1
        object.__setattr__(self, "K_max", K)

    @staticmethod
    def tail_bound(K: int, a: float) -> float:
        # sum_{k>K} 2 exp(-a k^2) <= 2 exp(-a (K+1)^2) / (1 - exp(-a (2K+3)))
        first = 2.0 * math.exp(-a * (K + 1) ** 2)
        return first / (1.0 - math.exp(-a * (2 * K + 3)))

    def __call__(self, t, x, y):
        if t < self.t0:
            raise ValueError(f"t={t} below the truncation time t0={self.t0}")
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        k = np.arange(1, self.K_max + 1)
        w = 2.0 * np.exp(-self.gamma * np.pi**2 * k**2 * t)
        sx = np.sin(np.pi * np.outer(k, x.ravel()))
        sy = np.sin(np.pi * np.outer(k, y.ravel()))
        out = np.einsum("k,kn,kn->n", w, sx, sy).reshape(x.shape)
        return float(out) if out.ndim == 0 else out


def default_distance_grid(t0: float, n_space: int = 97):
    ts = t0 * np.array([1.0, 2.0, 4.0])
    xs = np.linspace(0.0, 1.0, n_space)
    return ts, xs, xs


def kernel_distance(g_h: DiscreteSemigroup, g: ContinuousHeatKernel, t0: float, grid=None) -> float:
    """sup |g_t^h(x, y) - g_t(x, y)| over a (t, x, y) product grid with t >= t0."""
    ts, xs, ys = grid if grid is not None else default_distance_grid(t0)
    ts = np.asarray(ts, float)
    if np.any(ts < t0):
        raise ValueError("grid times must be >= t0")
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    sup = 0.0
    for t in ts:
        d = np.abs(eval_discrete(g_h, t, X, Y) - g(t, X, Y))
        sup = max(sup, float(np.max(d)))
    return sup


def _time_integrated(eigs: np.ndarray, t: float) -> np.ndarray:
    """int_0^t exp(-2 s lambda) ds, with the lambda = 0 limit t."""
    out = np.full(eigs.shape, float(t))
    pos = eigs > 0
    out[pos] = -np.expm1(-2.0 * t * eigs[pos]) / (2.0 * eigs[pos])
    if np.any(eigs < 0):
        raise SingularMode("negative eigenvalue in semigroup spectrum")
    return out


def l2_functionals(g_h: DiscreteSemigroup, t: float, x=None) -> dict:
    """Closed-form L2 integrals of the squared kernel.

    Returns ``space_int`` (int g_t(x,y)^2 dy), ``space_time_int``
    (int_0^t int g_s(x,y)^2 dy ds), both evaluated at ``x`` (default: the
    nodes), plus the scalars ``full_int`` and ``full_time_int`` that also
    integrate over x.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    vx = g_h.modes if x is None else g_h.mode_values(x)
    norms = g_h.mode_norms()
    decay = np.exp(-2.0 * t * g_h.eigs)
    integ = _time_integrated(g_h.eigs, t)
    v2 = vx**2
    return {
        "space_int": (decay * norms) @ v2,
        "space_time_int": (integ * norms) @ v2,
        "full_int": float(np.sum(decay * norms**2)),
        "full_time_int": float(np.sum(integ * norms**2)),
    }


def l2_envelopes(gamma: float, t: float) -> dict:
    """Upper bounds from the lower eigenvalue bound lambda_k >= 4 gamma k^2.

    The pointwise bounds carry |v_k|^2 <= 2; the fully integrated ones use
    unit norms.
    """
    pointwise = math.sqrt(math.pi) / (2.0 * math.sqrt(2.0) * math.sqrt(gamma * t)) + 2.0
    time_cap = 3.0 / (8.0 * gamma) * min(math.sqrt(8.0 * gamma * t), 1.0)
    return {
        "space_int": pointwise,
        "full_int": pointwise,
        "space_time_int": 2.0 * time_cap,
        "full_time_int": time_cap,
    }


def kernel_space_increment(g_h: DiscreteSemigroup, t: float, x, x2):
    """int_0^t int |g_{t-s}(x, y) - g_{t-s}(x2, y)|^2 dy ds."""
    d = g_h.mode_values(np.atleast_1d(x)) - g_h.mode_values(np.atleast_1d(x2))
    w = _time_integrated(g_h.eigs, t) * g_h.mode_norms()
    out = w @ d**2
    return float(out[0]) if np.ndim(x) == 0 and np.ndim(x2) == 0 else out


def kernel_time_increment(g_h: DiscreteSemigroup, t: float, t2: float, x):
    """int_0^t int |g_{t-s}(x, y) - g_{t2-s}(x, y)|^2 dy ds for t <= t2 (arguments are sorted)."""
    t, t2 = min(t, t2), max(t, t2)
    v = g_h.mode_values(np.atleast_1d(x))
    lag = -np.expm1(-(t2 - t) * g_h.eigs)
    w = _time_integrated(g_h.eigs, t) * g_h.mode_norms() * lag**2
    out = w @ v**2
    return float(out[0]) if np.ndim(x) == 0 else out
