"""Log-log rate fits with replica bootstrap."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonPositiveError

N_BOOTSTRAP = 1000


@dataclass
class RateFit:
    hs: np.ndarray
    errors: np.ndarray
    exponent: float
    intercept: float
    r2: float
    ci: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if len(self.hs) != len(self.errors) or len(self.hs) < 2:
            raise ValueError("need matching hs/errors with at least two levels")

    @property
    def ci_width(self) -> float:
        return float("nan") if self.ci is None else self.ci[1] - self.ci[0]

    def as_row(self, name: str = "rate") -> dict:
        lo, hi = self.ci if self.ci is not None else (float("nan"), float("nan"))
        return {"name": name, "exponent": self.exponent, "ci_lo": lo, "ci_hi": hi, "r2": self.r2}


def _slope(logh: np.ndarray, loge: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([logh, np.ones_like(logh)])
    (slope, icpt), *_ = np.linalg.lstsq(A, loge, rcond=None)
    resid = loge - (slope * logh + icpt)
    ss = float(np.sum((loge - loge.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_rate(hs, errors, min_levels: int = 2) -> RateFit:
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.shape != errors.shape or hs.ndim != 1:
        raise ValueError("hs and errors must be 1-D and equally long")
    if hs.size < min_levels:
        raise ValueError(f"need at least {min_levels} levels")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("hs must be strictly decreasing")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise NonPositiveError("errors must be positive and finite; report exact matches separately")
    slope, icpt, r2 = _slope(np.log(hs), np.log(errors))
    return RateFit(hs, errors, slope, icpt, r2)


def moment_error(per_replica: np.ndarray, p: float) -> np.ndarray:
    """E[e^p]^(1/p) along the replica axis (axis 0)."""
    return np.mean(np.asarray(per_replica, float) ** p, axis=0) ** (1.0 / p)


def bootstrap_rate(hs, per_replica: np.ndarray, p: float = 2.0, seed: int = 0,
                   n_boot: int = N_BOOTSTRAP, level: float = 0.95) -> RateFit:
    """Fit of E[e^p]^(1/p) with a percentile CI from resampling replicas.

    ``per_replica`` has shape (replicas, levels).
    """
    per_replica = np.asarray(per_replica, dtype=float)
    fit = fit_rate(hs, moment_error(per_replica, p))
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xB00757], dtype=np.uint64)))
    n = per_replica.shape[0]
    logh = np.log(np.asarray(hs, float))
    idx = rng.integers(0, n, size=(n_boot, n))
    stats = np.mean(per_replica[idx] ** p, axis=1) ** (1.0 / p)
    slopes = np.array([_slope(logh, np.log(s))[0] for s in stats])
    a = (1.0 - level) / 2.0
    fit.ci = (float(np.quantile(slopes, a)), float(np.quantile(slopes, 1.0 - a)))
    return fit


def per_path_exponents(hs, per_replica: np.ndarray) -> np.ndarray:
    """Fitted exponent of each replica's error sequence."""
    logh = np.log(np.asarray(hs, float))
    return np.array([_slope(logh, np.log(row))[0] for row in np.asarray(per_replica, float)])


def bootstrap_mean_ci(samples, seed: int = 0, n_boot: int = N_BOOTSTRAP, level: float = 0.95):
    samples = np.asarray(samples, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xC1], dtype=np.uint64)))
    means = samples[rng.integers(0, samples.size, size=(n_boot, samples.size))].mean(axis=1)
    a = (1.0 - level) / 2.0
    return float(np.quantile(means, a)), float(np.quantile(means, 1.0 - a))
