import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lracsim.errors import DimensionMismatch, SingularMode
from lracsim.experiments.fitting import fit_rate
from lracsim.experiments.spectral import sandwich_violations
from lracsim.kernel import WeightKernel, build_weights, fourth_moment
from lracsim.operator import (LongRangeOperator, apply, apply_spectral, consistency_error, consistency_prediction,
                              eigenvalue_circulant, eigenvalue_gap_to_continuum, eigenvalue_paper, gap_prediction,
                              inverse_trace_bound, inverse_trace_envelope)

IND = WeightKernel.indicator()


def nn(N, gamma=1.0):
    return LongRangeOperator(build_weights(IND, 1, 0.01), N, gamma)


def test_constant_maps_to_zero_exactly():
    op = LongRangeOperator.build(64, 0.4)
    assert np.all(apply(op, np.full(64, 3.25)) == 0.0)


@pytest.mark.parametrize("N,zeta,kernel", [(16, 0.25, "indicator"), (64, 0.4, "exponential")])
def test_fourier_modes_are_eigenvectors(N, zeta, kernel):
    op = LongRangeOperator.build(N, zeta, 1.3, WeightKernel.named(kernel))
    x = np.arange(N) / N
    for k in range(N):
        for f in (np.sin, np.cos):
            u = f(2 * np.pi * k * x)
            assert np.allclose(apply(op, u), -eigenvalue_circulant(op, k) * u, atol=1e-10 * op.scale)
            assert np.allclose(op.dense() @ u, apply(op, u), atol=1e-10 * op.scale)


def test_hand_expanded_stencil():
    op = nn(8)
    e0 = np.zeros(8)
    e0[0] = 1.0
    assert apply(op, e0).tolist() == [-128.0, 64.0, 0, 0, 0, 0, 0, 64.0]


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        apply(nn(8), np.zeros(7))


def test_eigenvalue_examples():
    op = nn(4)
    assert eigenvalue_paper(op, 0) == 0.0
    assert eigenvalue_paper(op, 4) == pytest.approx(64.0, rel=1e-15)
    assert eigenvalue_circulant(op, 0) == 0.0
    op = LongRangeOperator.build(64, 0.4)
    assert op.R == 6
    assert 36 <= eigenvalue_paper(op, 3) <= 9 * np.pi**2


def test_index_bridge():
    for N, z in [(16, 0.25), (128, 0.4), (64, 0.1)]:
        op = LongRangeOperator.build(N, z)
        k = np.arange(N // 2)
        assert np.allclose(eigenvalue_paper(op, 2 * k), eigenvalue_circulant(op, k), rtol=1e-12, atol=0)


def test_gap_nearest_neighbour_classical():
    op = nn(32)
    for k in range(1, 33):
        classic = np.pi**2 * k**2 - 4 * 32**2 * math.sin(math.pi * k / 64) ** 2
        assert eigenvalue_gap_to_continuum(op, k) == pytest.approx(classic, rel=1e-10, abs=1e-9)
    assert eigenvalue_gap_to_continuum(op, 0) == 0.0


def test_gap_below_taylor_bound():
    for N, z in [(256, 0.25), (1024, 0.4)]:
        op = LongRangeOperator.build(N, z)
        for k in (1, 2, 3):
            gap = eigenvalue_gap_to_continuum(op, k)
            assert 0 <= gap <= gap_prediction(op, k) * 1.05


def test_gap_rate():
    hs = np.array([2.0**-e for e in range(4, 11)])
    for z in (0.25, 0.4):
        gaps = [eigenvalue_gap_to_continuum(LongRangeOperator.build(round(1 / h), z), 1) for h in hs]
        assert fit_rate(hs, gaps).exponent >= 2 - 2 * z - 0.25


def test_inverse_trace_hand_value():
    op = nn(4)
    lam = [4 * 16 * math.sin(math.pi * k / 8) ** 2 for k in range(1, 5)]
    assert inverse_trace_bound(op) == pytest.approx(sum(1 / v for v in lam), rel=1e-14)


def test_inverse_trace_envelope_and_boundedness():
    op = LongRangeOperator.build(256, 0.3)
    assert inverse_trace_bound(op) <= inverse_trace_envelope(op)
    hs = np.array([2.0**-e for e in range(5, 11)])
    vals = [inverse_trace_bound(LongRangeOperator.build(round(1 / h), 0.45)) for h in hs]
    assert abs(fit_rate(hs, vals).exponent) < 0.1


def test_singular_mode():
    # only the j = 2 weight is non-zero: sin^2(pi k h) vanishes at k = N
    k = WeightKernel.from_table([0.0, 0.6, 1.0], [0.0, 0.0, 1.0])
    op = LongRangeOperator(build_weights(k, 2, 0.25), 8, 1.0)
    with pytest.raises(SingularMode):
        inverse_trace_bound(op)


def test_consistency_constant_and_order():
    op = LongRangeOperator.build(64, 0.25)
    assert consistency_error(op, lambda x: np.full_like(x, 2.0), lambda x: np.zeros_like(x)) == 0.0
    hs = np.array([2.0**-e for e in range(4, 10)])
    for z in (0.1, 0.25, 0.4):
        errs = [consistency_error(LongRangeOperator.build(round(1 / h), z), lambda x: np.sin(2 * np.pi * x),
                                  lambda x: -4 * np.pi**2 * np.sin(2 * np.pi * x)) for h in hs]
        assert fit_rate(hs, errs).exponent >= 2 - 2 * z - 0.2


def test_consistency_taylor_bound():
    def f(x):
        return np.cos(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x)

    def f_xx(x):
        return -4 * np.pi**2 * np.cos(2 * np.pi * x) - 8 * np.pi**2 * np.cos(4 * np.pi * x)

    sup_f4 = (2 * np.pi) ** 4 * 1 + 0.5 * (4 * np.pi) ** 4
    for N, z in [(32, 0.25), (128, 0.4), (512, 0.25)]:
        op = LongRangeOperator.build(N, z)
        assert consistency_error(op, f, f_xx) <= consistency_prediction(op, sup_f4) * 1.1
        assert consistency_prediction(op, sup_f4) == pytest.approx(fourth_moment(op.weights) / 12 * sup_f4 / N**2)


def test_upper_bound_everywhere_and_lower_bound_where_provable():
    for N in (8, 16, 32, 64, 128, 256):
        for z in (0.1, 0.25, 0.4, 0.49):
            for kern in ("indicator", "exponential"):
                v = sandwich_violations(LongRangeOperator.build(N, z, 1.0, WeightKernel.named(kern)))
                assert v["upper"] == 0
                assert v["lower_restricted"] == 0


def test_lower_bound_counterexample_documented():
    # k h R > 1: the sine-squared terms alias and lambda_k drops below 4 gamma k^2
    op = LongRangeOperator.build(8, 0.49)
    assert op.R == 3
    assert eigenvalue_paper(op, 8) < 4 * 8**2


def test_spectral_path_and_dense_agree(rng):
    for N in (8, 16, 32, 64):
        op = LongRangeOperator.build(N, 0.25, 0.7, WeightKernel.exponential())
        U = rng.standard_normal((200, N))
        dense = U @ op.dense().T
        assert np.max(np.abs(apply(op, U) - dense)) <= 1e-10 * op.scale
        assert np.max(np.abs(apply_spectral(op, U) - dense)) <= 1e-10 * op.scale


def test_matrix_structure():
    op = LongRangeOperator.build(32, 0.4, 2.0)
    A = op.dense()
    assert np.allclose(A, A.T)
    assert np.allclose(A.sum(axis=1), 0.0, atol=1e-9 * op.scale)
    assert np.max(np.linalg.eigvalsh(A)) <= 1e-9 * op.scale


@given(st.integers(8, 64), st.floats(0.05, 0.45), st.integers(0, 2**32 - 1))
def test_negative_semidefinite(N, zeta, seed):
    op = LongRangeOperator.build(N, zeta)
    u = np.random.Generator(np.random.Philox(seed)).standard_normal((25, N))
    assert np.all(np.einsum("ij,ij->i", u, apply(op, u)) <= 1e-9 * op.scale)
