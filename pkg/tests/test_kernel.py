import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lracsim.errors import RadiusTooLarge, ZeroSecondMoment
from lracsim.experiments.fitting import fit_rate
from lracsim.kernel import WeightKernel, build_weights, fourth_moment, radius_for, weights_for_grid

IND = WeightKernel.indicator()
EXP = WeightKernel.exponential()


def test_indicator_r1_normalization_is_one():
    w = build_weights(IND, 1, 0.25)
    assert w.c == 1.0
    assert w.values.tolist() == [1.0]


def test_indicator_r2_constant():
    w = build_weights(IND, 2, 0.25)
    assert w.c == pytest.approx(8 / 5, rel=1e-15)


def test_exponential_r4_against_high_precision_sum():
    w = build_weights(EXP, 4, 0.25)
    mpmath.mp.dps = 40
    ref = mpmath.mpf(64) / mpmath.fsum(mpmath.e ** (-mpmath.mpf(j) / 4) * j**2 for j in range(1, 5))
    assert w.c == pytest.approx(float(ref), rel=1e-14)


def test_fourth_moment_examples():
    assert fourth_moment(build_weights(IND, 1, 0.25)) == pytest.approx(1.0)
    assert fourth_moment(build_weights(IND, 2, 0.25)) == pytest.approx(17 / 5, rel=1e-14)


@pytest.mark.parametrize("zeta", [0.25, 0.4, 0.45])
def test_fourth_moment_growth(zeta):
    hs = np.array([2.0**-e for e in range(4, 11)])
    m4 = [fourth_moment(weights_for_grid(IND, round(1 / h), zeta)) for h in hs]
    assert abs(fit_rate(hs, m4).exponent - (-2 * zeta)) < 0.15


def test_radius_examples():
    assert radius_for(1 / 64, 0.4) == 6
    assert radius_for(1 / 4, 1e-12) == 1
    assert radius_for(1 / 16, 0.49) == 4


def test_radius_too_large():
    with pytest.raises(RadiusTooLarge):
        radius_for(1 / 4, 0.49)


def test_zero_second_moment():
    k = WeightKernel.from_table([0.0, 0.1, 1.0], [1.0, 0.0, 0.0])
    with pytest.raises(ZeroSecondMoment):
        build_weights(k, 2, 0.25)


def test_bad_zeta_and_radius():
    with pytest.raises(ValueError):
        build_weights(IND, 2, 0.5)
    with pytest.raises(ValueError):
        build_weights(IND, 0, 0.25)


def test_negative_custom_kernel_rejected():
    with pytest.raises(ValueError):
        WeightKernel.from_table([0.0, 1.0], [1.0, -0.5])


def test_kernel_from_file(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("0.0, 1.0\n0.5, 0.5\n1.0, 0.25\n")
    k = WeightKernel.from_file(p)
    assert k(0.75) == pytest.approx(0.375)
    w = build_weights(k, 4, 0.25)
    assert w.second_moment() == pytest.approx(1.0, rel=1e-12)


def test_weights_are_immutable():
    w = build_weights(EXP, 3, 0.25)
    with pytest.raises(ValueError):
        w.values[0] = 0.0


kernels = st.sampled_from([IND, EXP, WeightKernel.from_table([0, 0.3, 1], [0.2, 2.0, 0.7])])


@given(kernels, st.integers(1, 200), st.floats(0.01, 0.49))
def test_normalization_and_diagonal(kernel, R, zeta):
    w = build_weights(kernel, R, zeta)
    assert abs(w.second_moment() - 1.0) < 1e-12
    assert w.diag == 2 * math.fsum(w.values)
    assert np.all(w.values >= 0)


@given(st.integers(2, 100))
def test_monotone_sampling(R):
    assert np.all(build_weights(IND, R, 0.25).values == build_weights(IND, R, 0.25).c)
    assert np.all(np.diff(build_weights(EXP, R, 0.25).values) < 0)
