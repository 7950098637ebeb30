"""Interaction profiles J and their normalized lattice samples J_R(j)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RadiusTooLarge, ZeroSecondMoment

KERNEL_VARIANTS = ("indicator", "exponential", "custom")


@dataclass(frozen=True)
class WeightKernel:
    """A non-negative bounded profile J on [0, 1].

    ``variant`` is one of ``indicator`` (J = 1), ``exponential``
    (J(x) = exp(-x)) or ``custom``, in which case ``table`` holds the
    (x, J(x)) samples used for linear interpolation.
    """

    variant: str
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "custom":
            if self.table is None:
                raise ValueError("custom kernel needs a table")
            xs, js = (np.asarray(a, dtype=float) for a in self.table)
            if xs.ndim != 1 or xs.shape != js.shape or xs.size < 2:
                raise ValueError("custom table must be two equal-length columns")
            if np.any(np.diff(xs) <= 0):
                raise ValueError("custom table x must be strictly ascending")
            if xs[0] < 0.0 or xs[-1] > 1.0:
                raise ValueError("custom table x must lie in [0, 1]")
            if np.any(js < 0) or not np.all(np.isfinite(js)):
                raise ValueError("custom kernel values must be finite and >= 0")

    @classmethod
    def indicator(cls) -> "WeightKernel":
        return cls("indicator")

    @classmethod
    def exponential(cls) -> "WeightKernel":
        return cls("exponential")

    @classmethod
    def from_table(cls, xs, js) -> "WeightKernel":
        return cls("custom", (tuple(map(float, xs)), tuple(map(float, js))))

    @classmethod
    def from_file(cls, path: str | Path) -> "WeightKernel":
        """Load a two-column whitespace/comma separated (x, J(x)) table."""
        text = Path(path).read_text().replace(",", " ")
        data = np.loadtxt(text.splitlines(), ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
        return cls.from_table(data[:, 0], data[:, 1])

    @classmethod
    def named(cls, name: str) -> "WeightKernel":
        """Resolve a CLI/config kernel name; anything else is read as a file path."""
        key = name.lower()
        if key in ("indicator", "ind"):
            return cls.indicator()
        if key in ("exponential", "exp"):
            return cls.exponential()
        return cls.from_file(name)

    @property
    def name(self) -> str:
        return self.variant

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == "indicator":
            return np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0)
        if self.variant == "exponential":
            return np.exp(-x)
        xs, js = self.table
        return np.interp(x, xs, js)


@dataclass(frozen=True)
class DiscreteWeights:
    """Normalized stencil weights J_R(1..R) with the constant c folded in."""

    R: int
    values: np.ndarray
    c: float
    zeta: float
    kernel_name: str = "custom"

    @property
    def diag(self) -> float:
        return 2.0 * math.fsum(self.values)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(1, self.R + 1)

    def second_moment(self) -> float:
        j = self.offsets.astype(float)
        return float(np.sum(self.values * j**2)) / self.R**3


def build_weights(kernel: WeightKernel, R: int, zeta: float) -> DiscreteWeights:
    """Sample ``kernel`` at j/R and normalize so that the second moment is one."""
    if int(R) != R or R < 1:
        raise ValueError(f"R must be a positive integer, got {R}")
    if not 0.0 < zeta < 0.5:
        raise ValueError(f"zeta must lie in (0, 1/2), got {zeta}")
    R = int(R)
    j = np.arange(1, R + 1, dtype=float)
    raw = kernel(j / R)
    if np.any(raw < 0):
        raise ValueError("kernel must be non-negative")
    s2 = math.fsum(raw * j**2)
    if s2 == 0.0:
        raise ZeroSecondMoment(f"kernel {kernel.name} vanishes on all sample points for R={R}")
    c = R**3 / s2
    values = c * raw
    values.setflags(write=False)
    return DiscreteWeights(R=R, values=values, c=c, zeta=float(zeta), kernel_name=kernel.name)


def fourth_moment(weights: DiscreteWeights) -> float:
    j = weights.offsets.astype(float)
    return math.fsum(weights.values * j**4) / weights.R**3


# h**-zeta lands a hair above an integer for zeta -> 0 and for exact powers;
# the guard keeps ceil from jumping a whole unit on rounding noise.
_CEIL_GUARD = 1e-9


def radius_for(h: float, zeta: float) -> int:
    """Interaction radius R = max(1, ceil(h**-zeta)), required to stay below N/2."""
    N = round(1.0 / h)
    if N < 4 or abs(N * h - 1.0) > 1e-12:
        raise ValueError(f"h must be 1/N with integer N >= 4, got {h}")
    if not 0.0 < zeta < 0.5:
        raise ValueError(f"zeta must lie in (0, 1/2), got {zeta}")
    R = max(1, math.ceil(N**zeta - _CEIL_GUARD))
    if R >= N / 2:
        raise RadiusTooLarge(f"R={R} is not below N/2={N / 2}")
    return R


def weights_for_grid(kernel: WeightKernel, N: int, zeta: float) -> DiscreteWeights:
    return build_weights(kernel, radius_for(1.0 / N, zeta), zeta)
