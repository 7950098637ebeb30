import numpy as np
import pytest
from hypothesis import given, strategies as st

from lracsim.errors import NonPositiveError
from lracsim.experiments.fitting import (bootstrap_mean_ci, bootstrap_rate, fit_rate, moment_error,
                                         per_path_exponents)

HS = np.array([1 / 16, 1 / 32, 1 / 64, 1 / 128])


@given(st.floats(0.1, 10.0), st.floats(0.2, 3.0))
def test_exact_power_law_recovered(C, a):
    fit = fit_rate(HS, C * HS**a)
    assert fit.exponent == pytest.approx(a, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert np.exp(fit.intercept) == pytest.approx(C, rel=1e-9)


def test_two_point_slope():
    fit = fit_rate([0.1, 0.05], [0.04, 0.01])
    assert fit.exponent == pytest.approx(2.0)


def test_noisy_synthetic_rate_within_window(rng):
    per_rep = HS**0.5 * np.exp(0.2 * rng.standard_normal((400, HS.size)))
    fit = bootstrap_rate(HS, per_rep, p=2.0, seed=3)
    assert 0.4 <= fit.exponent <= 0.6
    assert fit.ci[0] <= fit.exponent <= fit.ci[1]


def test_bootstrap_deterministic(rng):
    per_rep = HS * np.exp(0.1 * rng.standard_normal((50, HS.size)))
    a = bootstrap_rate(HS, per_rep, seed=7)
    b = bootstrap_rate(HS, per_rep, seed=7)
    assert a.ci == b.ci
    assert bootstrap_mean_ci(per_rep[:, 0], 1) == bootstrap_mean_ci(per_rep[:, 0], 1)


def test_rejects_non_positive_errors():
    with pytest.raises(NonPositiveError):
        fit_rate(HS, [1.0, 0.5, 0.0, 0.1])


def test_rejects_non_decreasing_hs():
    with pytest.raises(ValueError):
        fit_rate(HS[::-1], HS[::-1])


def test_moment_error_and_path_exponents():
    per_rep = np.array([[2.0, 1.0], [2.0, 1.0]])
    assert np.allclose(moment_error(per_rep, 4.0), [2.0, 1.0])
    assert np.allclose(per_path_exponents([0.5, 0.25], per_rep), [1.0, 1.0])
