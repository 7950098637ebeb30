import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lracsim.dynamics import (NOT_HIT, DriftSpec, FourierDatum, HittingMonitor, HittingSpec, SimulationConfig,
                              Trajectory, explicit_dt_max, hitting_time, integrate, lq_norm, potential,
                              potential_prime, read_trajectory_binary, read_trajectory_csv, simulate,
                              step_explicit, step_semi_implicit, write_trajectory_binary, write_trajectory_csv)
from lracsim.errors import NonFinite, UnstableStep
from lracsim.noise import NoisePlan
from lracsim.operator import LongRangeOperator, eigenvalue_circulant

OP16 = LongRangeOperator.build(16, 0.25)
FULL, NONE = DriftSpec("full"), DriftSpec("none")


def test_potential_facts():
    assert potential_prime(np.array([-1.0, 0.0, 1.0])).tolist() == [0.0, 0.0, 0.0]
    assert potential(1.0) == pytest.approx(-0.25)


def test_drift_specs():
    with pytest.raises(ValueError):
        DriftSpec("truncated", 1.1)
    d = DriftSpec("truncated", 2.0)
    u = np.linspace(-5, 5, 2001)
    assert np.max(np.abs(d(u))) == pytest.approx(d.bound)
    slopes = np.abs(np.diff(d(u)) / np.diff(u))
    assert np.max(slopes) <= d.lipschitz + 1e-9
    up, lo = DriftSpec("upper", 2.0)(u), DriftSpec("lower", 2.0)(u)
    assert np.all(up <= d(u)) and np.all(d(u) <= lo)
    assert np.all(d(u[u >= 0]) <= potential_prime(u[u >= 0]))


def test_explicit_fixed_point_and_hand_value():
    u = np.ones(16)
    assert np.max(np.abs(step_explicit(u, OP16, FULL, None, 1e-5) - 1.0)) <= 1e-14
    v = step_explicit(np.full(16, 0.5), OP16, FULL, None, 1e-5)
    assert np.allclose(v, 0.5 + 0.375e-5, rtol=0, atol=1e-15)


def test_explicit_mode_multiplier():
    x = np.arange(16) / 16
    for k in (1, 3, 7):
        u = np.cos(2 * np.pi * k * x)
        dt = 0.5 * explicit_dt_max(OP16)
        v = step_explicit(u, OP16, NONE, None, dt)
        assert np.allclose(v, (1 - dt * eigenvalue_circulant(OP16, k)) * u, atol=1e-12)


def test_explicit_stability_and_nonfinite():
    with pytest.raises(UnstableStep):
        step_explicit(np.zeros(16), OP16, FULL, None, 2.1 * explicit_dt_max(OP16))
    with pytest.raises(NonFinite):
        step_explicit(np.full(16, np.nan), OP16, FULL, None, 1e-6)


def test_semi_implicit_resolvent_and_fixed_point():
    x = np.arange(16) / 16
    for k in (1, 5, 8):
        u = np.cos(2 * np.pi * k * x)
        v = step_semi_implicit(u, OP16, NONE, None, 0.1)
        assert np.allclose(v, u / (1 + 0.1 * eigenvalue_circulant(OP16, k)), atol=1e-12)
    assert np.all(step_semi_implicit(np.ones(16), OP16, FULL, None, 0.3) == 1.0)


def test_semi_implicit_differs_from_explicit_at_second_order(rng):
    x = np.arange(16) / 16
    coef = rng.standard_normal(3)
    u = sum(c * np.cos(2 * np.pi * (k + 1) * x) for k, c in enumerate(coef))
    diffs = []
    for dt in (1e-4, 5e-5):
        a = step_explicit(u, OP16, FULL, None, dt)
        b = step_semi_implicit(u, OP16, FULL, None, dt)
        # per mode: (1 + dt mu)^-1 - (1 - dt mu) = (dt mu)^2 / (1 + dt mu), drift terms identical up to
        # the resolvent acting on them
        mu = eigenvalue_circulant(OP16, np.arange(1, 4))
        lin = sum(c * (dt * m) ** 2 / (1 + dt * m) * np.cos(2 * np.pi * (k + 1) * x)
                  for k, (c, m) in enumerate(zip(coef, mu)))
        assert np.max(np.abs((b - a) - lin)) <= 5 * dt**2 * np.max(np.abs(u)) ** 3 * np.max(mu)
        diffs.append(np.max(np.abs(a - b)))
    assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.05)


def test_simulate_equilibrium():
    traj = simulate(SimulationConfig(N=32, zeta=0.25, T=0.5, dt=1e-3, u0=-1.0, record_every=50))
    assert np.all(traj.states == -1.0)


def test_heat_decay_matches_spectrum():
    cfg = SimulationConfig(N=64, zeta=0.25, T=0.1, dt=1e-4, drift=NONE, u0=FourierDatum.parse("sin:1:1"),
                           record_every=100)
    traj = simulate(cfg)
    mu1 = eigenvalue_circulant(cfg.operator(), 1)
    ratio = np.max(np.abs(traj.states), axis=1) / np.max(np.abs(traj.states[0]))
    assert np.allclose(ratio, np.exp(-mu1 * traj.times), rtol=0.01)


def test_truncated_equals_full_before_stopping_time():
    plan = NoisePlan(3, 32, 1e-3)
    base = dict(N=32, zeta=0.25, sigma=0.05, T=1.0, dt=1e-3, u0=-1.0, record_every=10)
    a = simulate(SimulationConfig(drift=FULL, **base), plan)
    b = simulate(SimulationConfig(drift=DriftSpec("truncated", 2.0), **base), plan)
    below = np.cumprod(np.max(np.abs(a.states), axis=1) < 2.0).astype(bool)
    assert below.sum() > 50
    assert np.max(np.abs(a.states[below] - b.states[below])) <= 1e-12


def test_determinism():
    plan = NoisePlan(4, 16, 1e-3)
    cfg = SimulationConfig(N=16, zeta=0.25, sigma=0.2, T=0.2, dt=1e-3, u0=0.0)
    assert simulate(cfg, plan).states.tobytes() == simulate(cfg, NoisePlan(4, 16, 1e-3)).states.tobytes()


def test_sigma_needs_plan():
    with pytest.raises(ValueError):
        simulate(SimulationConfig(N=16, zeta=0.25, sigma=0.1, T=0.01, dt=1e-3))


def test_integrate_batch_and_early_stop():
    u0 = np.tile(np.linspace(-1, 1, 16), (3, 1))
    steps, frames = integrate(OP16, FULL, 0.0, 1e-3, 100, u0, record_every=10, observer=lambda s, u: s >= 30)
    assert steps.tolist() == [0, 10, 20, 30]
    assert frames.shape == (4, 3, 16)


def test_lq_norm_against_quadrature():
    u = np.array([0.5, -1.0, 2.0, 0.0, -0.3])
    x = np.linspace(0, 1, 200_001)
    interp = np.interp(x, np.arange(6) / 5, np.append(u, u[0]))
    for q in (1, 2, 3.5):
        ref = np.trapezoid(np.abs(interp) ** q, x) ** (1 / q)
        assert lq_norm(u, q) == pytest.approx(ref, rel=1e-6)
    assert lq_norm(u, math.inf) == 2.0


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=40), st.floats(1, 4))
def test_lq_norm_properties(vals, q):
    u = np.array(vals)
    n = lq_norm(u, q)
    assert n >= -1e-15
    assert n <= lq_norm(u, math.inf) + 1e-12
    assert lq_norm(2 * u, q) == pytest.approx(2 * n, rel=1e-9, abs=1e-12)
    assert lq_norm(np.full(len(vals), 1.7), q) == pytest.approx(1.7)


def test_hitting_immediate_and_not_hit():
    spec = HittingSpec(1.0, 0.5, 2)
    inside = Trajectory(1 / 8, [0.0, 1.0], np.full((2, 8), 0.9))
    assert hitting_time(inside, spec) == 0.0
    traj = simulate(SimulationConfig(N=16, zeta=0.25, T=5.0, dt=1e-2, u0=-1.0, record_every=10))
    assert hitting_time(traj, spec) == NOT_HIT


def test_hitting_monotone_in_rho():
    plan = NoisePlan(8, 16, 1e-2)
    traj = simulate(SimulationConfig(N=16, zeta=0.25, gamma=1.0, sigma=0.15, T=30.0, dt=1e-2, u0=-1.0), plan)
    taus = [hitting_time(traj, HittingSpec(1.0, r, 2)) for r in (0.2, 0.4, 0.8, 1.6, 2.5)]
    assert all(a >= b for a, b in zip(taus, taus[1:]))
    assert taus[-1] == 0.0


def test_hitting_monitor_matches_offline():
    plan = NoisePlan(8, 16, 1e-2)
    cfg = SimulationConfig(N=16, zeta=0.25, sigma=0.15, T=20.0, dt=1e-2, u0=-1.0)
    traj = simulate(cfg, plan)
    spec = HittingSpec(1.0, 0.4, 2)
    mon = HittingMonitor(spec, 1, cfg.dt)
    for s, u in zip(np.rint(traj.times / cfg.dt).astype(int), traj.states):
        mon(s, u[None])
    assert mon.tau[0] == hitting_time(traj, spec)


def test_trajectory_io_roundtrip(tmp_path):
    traj = Trajectory(1 / 4, [0.0, 0.1, 0.25], np.arange(12.0).reshape(3, 4) / 7)
    write_trajectory_csv(traj, tmp_path / "t.csv")
    write_trajectory_binary(traj, tmp_path / "t.bin")
    for back in (read_trajectory_csv(tmp_path / "t.csv"), read_trajectory_binary(tmp_path / "t.bin")):
        assert np.array_equal(back.times, traj.times)
        assert np.array_equal(back.states, traj.states)
    raw = (tmp_path / "t.bin").read_bytes()
    assert raw[:8] == b"LRACTRJ\x00"
    (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError):
        read_trajectory_binary(tmp_path / "bad.bin")


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(0.25, [0.0, 0.0], np.zeros((2, 4)))


def test_fourier_datum():
    f = FourierDatum.parse("sin:1:0.5; cos:2:0.25; -1")
    assert f(0.25) == pytest.approx(0.5 - 0.25 - 1)
    assert FourierDatum.parse(str(f)) == f
    with pytest.raises(ValueError):
        FourierDatum.parse("tan:1:2")
