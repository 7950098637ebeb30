import json

import numpy as np

from lracsim.dynamics import FourierDatum
from lracsim.experiments import convergence, pathwise
from lracsim.experiments.parallel import set_threads
from lracsim.experiments.report import ExperimentReport

HS = (1 / 16, 1 / 32, 1 / 64)


def test_homogeneous_constant_datum_is_exact():
    rep = convergence.study_homogeneous_convergence(HS, 0.25, modes=((0, 0.7, 0.0),))
    assert rep.passed
    assert any("exact" in n for n in rep.notes)


def test_homogeneous_rate_orders_with_zeta():
    hs = (1 / 16, 1 / 32, 1 / 64, 1 / 128, 1 / 256)
    lo = convergence.study_homogeneous_convergence(hs, 0.1).rates[0]["exponent"]
    hi = convergence.study_homogeneous_convergence(hs, 0.45).rates[0]["exponent"]
    assert hi < lo


def test_strong_deterministic_rate_at_least_one():
    rep = convergence.study_strong_convergence(HS, 1 / 128, 0.25, sigma=0.0, T=0.1, replicas=2,
                                               u0=FourierDatum.parse("sin:1:0.5"))
    assert rep.passed, [c.line() for c in rep.checks]


def test_coupled_table_independent_of_threads():
    args = (HS, 1 / 128, 0.25, 1.0, 0.1, 0.02, 6, 0)
    set_threads(1)
    a, _ = convergence.coupled_error_table(*args, threads=1)
    b, _ = convergence.coupled_error_table(*args, threads=2)
    assert np.array_equal(a, b)


def test_coupled_errors_shrink_with_h():
    table, _ = convergence.coupled_error_table(HS, 1 / 128, 0.25, 1.0, 0.1, 0.05, 8, 0,
                                               u0=FourierDatum.parse("sin:1:0.5"))
    med = np.median(table, axis=0)
    assert np.all(med > 0)
    assert med[-1] < med[0]


def test_transition_large_radius_hits_immediately():
    tau = pathwise.transition_table(HS, 0.25, 1.0, 0.1, 0.1, 1e-3, rho=10.0, q=2.0, replicas=3, seed=0)
    assert np.all(tau == 0.0)


def test_transition_unreachable_is_inf():
    tau = pathwise.transition_table((1 / 16,), 0.25, 1.0, 0.0, 0.05, 1e-3, rho=0.1, q=2.0, replicas=2, seed=0)
    assert np.all(np.isinf(tau))


def test_small_comparison_run():
    rep = pathwise.study_comparison(n_seeds=3, N=16, T=0.2, dt=1e-3)
    assert rep.passed, [c.line() for c in rep.checks]


def test_small_moments_run():
    rep = pathwise.study_moments(HS, T=0.05, replicas=8)
    assert rep.passed, [c.line() for c in rep.checks]


def test_report_write(tmp_path):
    rep = ExperimentReport("demo", {"u0": FourierDatum.parse("sin:1:0.5"), "hs": np.array([0.5])}, seed=1)
    rep.errors.append((0.5, 0, 0.25))
    rep.rates.append({"name": "r", "exponent": 1.0, "ci_lo": 0.9, "ci_hi": 1.1, "r2": 1.0})
    rep.extra_tables["extra"] = (["a"], [[1]])
    rep.check("x", 1.0, "<= 2", True)
    rep.check("info", 5.0, "<= 2", False, gating=False)
    rep.write(tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["passed"] is True and data["seed"] == 1
    assert (tmp_path / "errors.csv").read_text().splitlines()[0] == "h,replica,error"
    assert (tmp_path / "extra.csv").exists() and (tmp_path / "rates.csv").exists()


def test_report_error_fails():
    rep = ExperimentReport("demo")
    rep.error = {"type": "X", "message": "y"}
    assert not rep.passed
