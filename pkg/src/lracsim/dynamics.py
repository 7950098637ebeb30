"""Time integration of the rescaled lattice Allen-Cahn SDE

    du_i = (gamma A^h_R u)_i dt - V'(u_i) dt + sqrt(2 sigma / h) dB_i

with full, truncated and one-sided truncated drifts, plus hitting times.
All integrators act on the last axis, so a leading batch axis of
replicas is handled for free.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NonFinite, UnstableStep
from .kernel import WeightKernel
from .noise import NoisePlan, increments_for_grid
from .operator import LongRangeOperator, apply

NOT_HIT = math.inf
TRUNCATION_MIN = 2.0 / math.sqrt(3.0)


def potential(q):
    q = np.asarray(q, dtype=float)
    return 0.25 * q**4 - 0.5 * q**2


def potential_prime(u):
    return u * u * u - u


DRIFT_VARIANTS = ("full", "truncated", "upper", "lower", "none")


@dataclass(frozen=True)
class DriftSpec:
    """Which nonlinearity replaces V'.

    ``truncated`` freezes V' outside [-Z, Z]; ``upper`` only above Z
    (V^+_Z) and ``lower`` only below -Z (V^-_Z).  ``none`` switches the
    nonlinearity off (heat flow).
    """

    variant: str = "full"
    Z: float = 2.0

    def __post_init__(self):
        if self.variant not in DRIFT_VARIANTS:
            raise ValueError(f"unknown drift {self.variant!r}")
        if self.variant in ("truncated", "upper", "lower") and not self.Z > TRUNCATION_MIN:
            raise ValueError(f"Z must exceed 2/sqrt(3), got {self.Z}")

    @property
    def tag(self) -> str:
        return self.variant if self.variant in ("full", "none") else f"{self.variant}(Z={self.Z:g})"

    @property
    def bound(self) -> float:
        """M = V'(Z), the global bound of the truncated drift."""
        return self.Z**3 - self.Z

    @property
    def lipschitz(self) -> float:
        return 3.0 * self.Z**2 - 1.0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        v = self.variant
        if v == "full":
            return potential_prime(u)
        if v == "none":
            return np.zeros_like(u)
        if v == "truncated":
            return potential_prime(np.clip(u, -self.Z, self.Z))
        if v == "upper":
            return potential_prime(np.minimum(u, self.Z))
        return potential_prime(np.maximum(u, -self.Z))


def explicit_dt_max(op: LongRangeOperator) -> float:
    return 2.0 / float(np.max(op.circulant_eigs()))


def _noise_term(op: LongRangeOperator, sigma: float, dB):
    if dB is None or sigma == 0.0:
        return 0.0
    return math.sqrt(2.0 * sigma / op.h) * dB


def _finite(u: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(u)):
        raise NonFinite("state left the finite range")
    return u


def step_explicit(u, op: LongRangeOperator, drift: DriftSpec, dB, dt: float, sigma: float = 0.0):
    """Euler-Maruyama step u + dt (gamma A u - V'(u)) + sqrt(2 sigma/h) dB."""
    if dt > explicit_dt_max(op):
        raise UnstableStep(f"dt={dt} exceeds the explicit bound {explicit_dt_max(op)}")
    u = np.asarray(u, dtype=float)
    return _finite(u + dt * (apply(op, u) - drift(u)) + _noise_term(op, sigma, dB))


class SemiImplicitSolver:
    """Linear part implicit (diagonal in the DFT basis), nonlinearity explicit."""

    def __init__(self, op: LongRangeOperator, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.op, self.dt = op, dt
        self.resolvent = 1.0 / (1.0 + dt * op.circulant_eigs()[: op.N // 2 + 1])

    def __call__(self, u, drift: DriftSpec, dB, sigma: float = 0.0):
        rhs = u - self.dt * drift(u) + _noise_term(self.op, sigma, dB)
        return np.fft.irfft(self.resolvent * np.fft.rfft(rhs, axis=-1), n=self.op.N, axis=-1)


def step_semi_implicit(u, op: LongRangeOperator, drift: DriftSpec, dB, dt: float, sigma: float = 0.0):
    """Solve (I - dt gamma A) u_new = u - dt V'(u) + sqrt(2 sigma/h) dB."""
    return _finite(SemiImplicitSolver(op, dt)(np.asarray(u, dtype=float), drift, dB, sigma))


@dataclass(frozen=True)
class FourierDatum:
    """Initial datum c + sum of a sin(2 pi k x) / a cos(2 pi k x) terms.

    Picklable (unlike a lambda), so it can travel to worker processes.
    Text form: ``;``-separated terms ``sin:k:a``, ``cos:k:a`` or a bare
    constant, e.g. ``"sin:1:0.5"`` or ``"-1"``.
    """

    terms: tuple = ()  # (kind, k, amplitude)

    @classmethod
    def parse(cls, text: str) -> "FourierDatum":
        terms = []
        for part in str(text).split(";"):
            part = part.strip()
            if not part:
                continue
            bits = part.split(":")
            if len(bits) == 1:
                terms.append(("const", 0, float(bits[0])))
            elif len(bits) == 3 and bits[0] in ("sin", "cos"):
                terms.append((bits[0], int(bits[1]), float(bits[2])))
            else:
                raise ValueError(f"cannot parse initial-datum term {part!r}")
        if not terms:
            raise ValueError("empty initial datum")
        return cls(tuple(terms))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for kind, k, a in self.terms:
            if kind == "const":
                out = out + a
            elif kind == "sin":
                out = out + a * np.sin(2 * np.pi * k * x)
            else:
                out = out + a * np.cos(2 * np.pi * k * x)
        return out

    def modes(self) -> list[tuple[int, float, float]]:
        """(k, cos amplitude, sin amplitude) triples; the constant is k = 0."""
        out = []
        for kind, k, a in self.terms:
            if kind == "const":
                out.append((0, a, 0.0))
            elif kind == "cos":
                out.append((k, a, 0.0))
            else:
                out.append((k, 0.0, a))
        return out

    def __str__(self) -> str:
        return ";".join(f"{a!r}" if kind == "const" else f"{kind}:{k}:{a!r}" for kind, k, a in self.terms)


def sample_initial(u0, N: int) -> np.ndarray:
    """Nodal values of the initial datum: callable on [0,1), scalar, or array of length N."""
    x = np.arange(N) / N
    if callable(u0):
        return np.asarray(u0(x), dtype=float) * np.ones(N)
    arr = np.asarray(u0, dtype=float)
    if arr.ndim == 0:
        return np.full(N, float(arr))
    if arr.shape != (N,):
        raise ValueError(f"initial data has shape {arr.shape}, expected ({N},)")
    return arr.copy()


def integrate(op: LongRangeOperator, drift: DriftSpec, sigma: float, dt: float, n_steps: int,
              u0: np.ndarray, noise: Callable | None = None, integrator: str = "semi-implicit",
              record_every: int = 1, observer: Callable | None = None, keep: bool = True):
    """Advance a batch of states (..., N) for ``n_steps`` steps.

    ``noise(step_start, n)`` must return increments of shape (..., n, N);
    it is called once per block of steps.  ``observer(step, u)`` is called
    on every recorded frame (step 0 included) and may return True to stop
    early.  Returns (steps, frames) of the recorded states; with
    ``keep=False`` only the final frame is returned.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if integrator == "semi-implicit":
        solver = SemiImplicitSolver(op, dt)
        advance = lambda u, dB: solver(u, drift, dB, sigma)  # noqa: E731
    elif integrator == "explicit":
        if dt > explicit_dt_max(op):
            raise UnstableStep(f"dt={dt} exceeds the explicit bound {explicit_dt_max(op)}")
        advance = lambda u, dB: u + dt * (apply(op, u) - drift(u)) + _noise_term(op, sigma, dB)  # noqa: E731
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    u = np.array(u0, dtype=float)
    steps, frames = [0], [u.copy()]
    if observer is not None and observer(0, u):
        return np.array(steps), np.array(frames)
    block = 64
    step = 0
    use_noise = noise is not None and sigma != 0.0
    while step < n_steps:
        n = min(block - step % block, n_steps - step)
        dB = noise(step, n) if use_noise else None
        for i in range(n):
            u = advance(u, None if dB is None else dB[..., i, :])
            step += 1
            if step % record_every == 0 or step == n_steps:
                _finite(u)
                if keep:
                    steps.append(step)
                    frames.append(u.copy())
                else:
                    steps[-1], frames[-1] = step, u.copy()
                if observer is not None and observer(step, u):
                    return np.array(steps), np.array(frames)
    return np.array(steps), np.array(frames)


@dataclass
class SimulationConfig:
    N: int
    zeta: float
    gamma: float = 1.0
    sigma: float = 0.0
    T: float = 1.0
    dt: float = 1e-4
    drift: DriftSpec = field(default_factory=DriftSpec)
    integrator: str = "semi-implicit"
    u0: object = -1.0
    record_every: int = 1
    kernel: WeightKernel = field(default_factory=WeightKernel.indicator)
    replica: int = 0

    @property
    def n_steps(self) -> int:
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError(f"T={self.T} is not a multiple of dt={self.dt}")
        return n

    def operator(self) -> LongRangeOperator:
        return LongRangeOperator.build(self.N, self.zeta, self.gamma, self.kernel)


@dataclass
class Trajectory:
    h: float
    times: np.ndarray
    states: np.ndarray
    seed: int | None = None
    integrator: str = "semi-implicit"
    drift: str = "full"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] != self.times.size:
            raise ValueError("states must be (frames, N) matching times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def N(self) -> int:
        return self.states.shape[1]


def simulate(config: SimulationConfig, plan: NoisePlan | None = None) -> Trajectory:
    op = config.operator()
    u0 = sample_initial(config.u0, config.N)
    noise = None
    if config.sigma != 0.0:
        if plan is None:
            raise ValueError("sigma > 0 needs a NoisePlan")
        noise = lambda s, n: increments_for_grid(plan, config.N, config.dt, config.replica, s, n)  # noqa: E731
    steps, frames = integrate(op, config.drift, config.sigma, config.dt, config.n_steps, u0, noise,
                              config.integrator, config.record_every)
    return Trajectory(1.0 / config.N, steps * config.dt, frames,
                      seed=None if plan is None else plan.seed,
                      integrator=config.integrator, drift=config.drift.tag)


# -- norms and hitting times -------------------------------------------------

def lq_norm(values, q: float) -> np.ndarray:
    """L^q([0,1]) norm of the periodic piecewise-linear interpolant of nodal values.

    Exact for every q >= 1: on a segment with end values a, b the integral
    of |linear|^q has a closed form (split at the sign change).
    """
    u = np.asarray(values, dtype=float)
    h = 1.0 / u.shape[-1]
    if math.isinf(q):
        return np.max(np.abs(u), axis=-1)
    if q < 1:
        raise ValueError("q must be >= 1")
    a, b = u, np.roll(u, -1, axis=-1)
    aa, ab = np.abs(a), np.abs(b)
    same = a * b >= 0
    p = q + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        same_val = np.where(np.isclose(aa, ab, rtol=1e-12, atol=0.0),
                            aa**q, (ab**p - aa**p) / (p * (ab - aa)))
        cross_val = (aa**p + ab**p) / (p * (aa + ab))
    seg = np.where(same, same_val, cross_val)
    return (h * np.sum(seg, axis=-1)) ** (1.0 / q)


@dataclass(frozen=True)
class HittingSpec:
    target: object = 1.0
    rho: float = 0.4
    q: float = 2.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.q >= 1:
            raise ValueError("q must be >= 1")

    def target_nodes(self, N: int) -> np.ndarray:
        return sample_initial(self.target, N)

    def inside(self, u: np.ndarray) -> np.ndarray:
        return lq_norm(u - self.target_nodes(u.shape[-1]), self.q) < self.rho


def hitting_time(traj: Trajectory, spec: HittingSpec) -> float:
    """First recorded time inside the open L^q ball; NOT_HIT (inf) if never."""
    inside = spec.inside(traj.states)
    idx = np.flatnonzero(inside)
    return float(traj.times[idx[0]]) if idx.size else NOT_HIT


class HittingMonitor:
    """Online hitting-time tracker for a batch of replicas (observer for :func:`integrate`)."""

    def __init__(self, spec: HittingSpec, n_replicas: int, dt: float, stop_when_all: bool = True):
        self.spec, self.dt = spec, dt
        self.tau = np.full(n_replicas, NOT_HIT)
        self.stop_when_all = stop_when_all

    def __call__(self, step: int, u: np.ndarray) -> bool:
        new = self.spec.inside(u) & np.isinf(self.tau)
        self.tau[new] = step * self.dt
        return self.stop_when_all and bool(np.all(np.isfinite(self.tau)))


# -- trajectory export -------------------------------------------------------

BINARY_MAGIC = b"LRACTRJ\x00"
BINARY_VERSION = 1
_HEADER = struct.Struct("<8sHIBI")  # magic, version, N, dtype code, frame count
_DTYPE_F64LE = 1


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    N = traj.N
    lines = ["t," + ",".join(f"u_{i}" for i in range(N))]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(format(float(v), ".17g") for v in (t, *row)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path: str | Path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(1.0 / (data.shape[1] - 1), data[:, 0], data[:, 1:])


def write_trajectory_binary(traj: Trajectory, path: str | Path) -> None:
    frames = np.column_stack([traj.times, traj.states]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, traj.N, _DTYPE_F64LE, frames.shape[0]))
        fh.write(frames.tobytes())


def read_trajectory_binary(path: str | Path) -> Trajectory:
    raw = Path(path).read_bytes()
    magic, version, N, dtype, count = _HEADER.unpack_from(raw)
    if magic != BINARY_MAGIC:
        raise ValueError(f"{path}: not a trajectory file")
    if version != BINARY_VERSION or dtype != _DTYPE_F64LE:
        raise ValueError(f"{path}: unsupported version {version} / dtype {dtype}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=count * (N + 1))
    data = data.reshape(count, N + 1)
    return Trajectory(1.0 / N, data[:, 0].copy(), data[:, 1:].copy())
