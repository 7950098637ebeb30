"""The long-range central difference operator gamma * A^h_R on the periodic lattice.

The operator is a symmetric circulant.  Two spectral conventions are kept
apart on purpose: ``paper`` eigenvalues are indexed k = 0..N with the
half-angle sin^2(pi k h j / 2); ``circulant`` eigenvalues mu_k (k = 0..N-1)
use the DFT angle sin^2(pi k h j) and are the true spectrum.  The two agree
through eigenvalue_paper(2k) == mu_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, RadiusTooLarge, SingularMode
from .kernel import DiscreteWeights, WeightKernel, fourth_moment, weights_for_grid


@dataclass(frozen=True)
class LongRangeOperator:
    weights: DiscreteWeights
    N: int
    gamma: float = 1.0

    def __post_init__(self):
        if self.N < 4:
            raise ValueError("N must be >= 4")
        if self.weights.R >= self.N / 2:
            raise RadiusTooLarge(f"R={self.weights.R} is not below N/2={self.N / 2}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def build(cls, N: int, zeta: float, gamma: float = 1.0,
              kernel: WeightKernel | None = None) -> "LongRangeOperator":
        kernel = kernel or WeightKernel.indicator()
        return cls(weights_for_grid(kernel, N, zeta), N, gamma)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def R(self) -> int:
        return self.weights.R

    @property
    def scale(self) -> float:
        return self.gamma / (self.R**3 * self.h**2)

    def first_column(self) -> np.ndarray:
        """First column of the circulant matrix of gamma * A^h_R."""
        col = np.zeros(self.N)
        col[0] = -self.weights.diag
        for j, w in enumerate(self.weights.values, start=1):
            col[j] += w
            col[-j] += w
        return self.scale * col

    def dense(self) -> np.ndarray:
        import scipy.linalg

        return scipy.linalg.circulant(self.first_column())

    def circulant_eigs(self) -> np.ndarray:
        """mu_k for k = 0..N-1; gamma * A^h_R has eigenvalues -mu_k."""
        return eigenvalue_circulant(self, np.arange(self.N))

    def paper_eigs(self) -> np.ndarray:
        return eigenvalue_paper(self, np.arange(self.N + 1))

    def spectrum(self) -> "SpectrumView":
        return SpectrumView(self)


@dataclass(frozen=True)
class SpectrumView:
    op: LongRangeOperator

    @property
    def paper_eigs(self) -> np.ndarray:
        return self.op.paper_eigs()

    @property
    def circulant_eigs(self) -> np.ndarray:
        return self.op.circulant_eigs()

    def eigvec_samples(self, k: int) -> np.ndarray:
        """Nodal samples sin(pi k m h), m = 0..N-1 (unnormalized, as in the model)."""
        m = np.arange(self.op.N)
        return np.sin(np.pi * k * m * self.op.h)

    @property
    def lower_bounds(self) -> np.ndarray:
        k = np.arange(self.op.N + 1)
        return 4.0 * self.op.gamma * k**2

    @property
    def upper_bounds(self) -> np.ndarray:
        k = np.arange(self.op.N + 1)
        return self.op.gamma * np.pi**2 * k**2


def _check_shape(op: LongRangeOperator, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != op.N:
        raise DimensionMismatch(f"last axis has length {u.shape[-1]}, operator has N={op.N}")
    return u


def apply(op: LongRangeOperator, u) -> np.ndarray:
    """gamma * A^h_R u by direct O(N R) convolution along the last axis."""
    u = _check_shape(op, u)
    acc = np.zeros_like(u)
    for j, w in enumerate(op.weights.values, start=1):
        acc += w * ((np.roll(u, -j, axis=-1) - u) + (np.roll(u, j, axis=-1) - u))
    return op.scale * acc


def apply_spectral(op: LongRangeOperator, u) -> np.ndarray:
    """Same as :func:`apply`, via multiplication by -mu_k in the DFT basis."""
    u = _check_shape(op, u)
    mu = op.circulant_eigs()[: op.N // 2 + 1]
    return np.fft.irfft(-mu * np.fft.rfft(u, axis=-1), n=op.N, axis=-1)


def _sin2_sum(op: LongRangeOperator, angle: np.ndarray) -> np.ndarray:
    j = op.weights.offsets.astype(float)
    s = np.sin(np.multiply.outer(angle, j)) ** 2
    return 4.0 * op.scale * (s @ op.weights.values)


def eigenvalue_paper(op: LongRangeOperator, k):
    """lambda_k^h = 4 gamma / (h^2 R^3) sum_j J_R(j) sin^2(pi k h j / 2)."""
    k_arr = np.asarray(k, dtype=float)
    out = _sin2_sum(op, 0.5 * np.pi * k_arr * op.h)
    return float(out) if out.ndim == 0 else out


def eigenvalue_circulant(op: LongRangeOperator, k):
    """mu_k = 4 gamma / (h^2 R^3) sum_j J_R(j) sin^2(pi k h j)."""
    k_arr = np.asarray(k, dtype=float)
    out = _sin2_sum(op, np.pi * k_arr * op.h)
    return float(out) if out.ndim == 0 else out


def eigenvalue_gap_to_continuum(op: LongRangeOperator, k):
    """gamma pi^2 k^2 - lambda_k^h."""
    k_arr = np.asarray(k, dtype=float)
    out = op.gamma * np.pi**2 * k_arr**2 - eigenvalue_paper(op, k_arr)
    return float(out) if np.ndim(out) == 0 else out


def gap_prediction(op: LongRangeOperator, k) -> np.ndarray:
    """Taylor bound gamma/12 k^4 pi^4 h^2 * fourth moment on the eigenvalue gap."""
    k_arr = np.asarray(k, dtype=float)
    return op.gamma / 12.0 * k_arr**4 * np.pi**4 * op.h**2 * fourth_moment(op.weights)


def inverse_trace_bound(op: LongRangeOperator) -> float:
    """sum_{k=1}^{N} 1 / lambda_k^h."""
    lam = eigenvalue_paper(op, np.arange(1, op.N + 1))
    # sin(pi) is ~1e-16, not 0: treat round-off sized eigenvalues as vanishing
    zero = lam <= 1e-12 * float(np.max(np.abs(lam)))
    if np.any(zero):
        bad = int(np.argmax(zero)) + 1
        raise SingularMode(f"lambda_{bad}^h vanishes")
    return math.fsum(1.0 / lam)


def inverse_trace_envelope(op: LongRangeOperator) -> float:
    """Analytic cap pi^2 / (24 gamma) plus the h^(1 - 2 zeta) remainder term.

    The remainder uses the realized radius: R^2 h / gamma, which is
    h^(1-2 zeta) up to the rounding of R.
    """
    return np.pi**2 / (24.0 * op.gamma) + op.R**2 * op.h / op.gamma


def consistency_error(op: LongRangeOperator, f: Callable, f_xx: Callable) -> float:
    """sup over nodes of |A^h_R f - f''| with the operator taken at gamma = 1."""
    x = np.arange(op.N) * op.h
    diff = apply(op, f(x)) / op.gamma - f_xx(x)
    return float(np.max(np.abs(diff)))


def consistency_prediction(op: LongRangeOperator, sup_f4: float) -> float:
    """Leading Taylor remainder (fourth moment / 12) * sup|f''''| * h^2."""
    return fourth_moment(op.weights) / 12.0 * sup_f4 * op.h**2
