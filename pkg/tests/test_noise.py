import math

import numpy as np
import pytest
import scipy.stats

from lracsim.errors import IncompatibleRefinement
from lracsim.experiments.noise_studies import _chain_identical
from lracsim.noise import (CoupledIncrements, NoisePlan, aggregate, cells_to_nodes, increments_for_grid,
                           stochastic_convolution, tree_sum)
from lracsim.operator import LongRangeOperator
from lracsim.semigroup import DiscreteSemigroup

PLAN = NoisePlan(7, 32, 1e-3)


def test_identity_pass_through():
    w = PLAN.master_increments(0, 0, 10)
    dB = increments_for_grid(PLAN, 32, 1e-3, 0, 0, 10)
    assert np.array_equal(dB, np.roll(w, 1, axis=-1) / math.sqrt(1 / 32))


def test_spatial_pair_sum_exact():
    w = PLAN.master_increments(3, 5, 20)
    coarse = aggregate(w, 2, 1)
    assert np.array_equal(coarse, w[:, 0::2] + w[:, 1::2])


def test_reproducible_and_random_access():
    a = NoisePlan(11, 16, 1e-2).master_increments(2, 0, 300)
    b = NoisePlan(11, 16, 1e-2).master_increments(2, 130, 50)
    assert np.array_equal(a[130:180], b)
    c = NoisePlan(12, 16, 1e-2).master_increments(2, 0, 300)
    assert not np.array_equal(a, c)


def test_chains_bit_identical():
    assert all(_chain_identical(NoisePlan(3, 64, 1e-3)).values())


def test_tree_sum_chain_property():
    x = np.random.Generator(np.random.Philox(1)).standard_normal((4, 64))
    assert np.array_equal(tree_sum(x, 8, -1), tree_sum(tree_sum(tree_sum(x, 2, -1), 2, -1), 2, -1))
    assert np.array_equal(tree_sum(x, 1, -1), x)


def test_coupled_increments_match_single_grid():
    plan = NoisePlan(5, 64, 1e-4)
    src = CoupledIncrements(plan, [16, 32, 64], 2e-4, [0, 3])
    ch = src.chunk(10, 40)
    for N in (16, 32, 64):
        for i, r in enumerate([0, 3]):
            assert np.array_equal(ch[N][i], increments_for_grid(plan, N, 2e-4, r, 10, 40))


def test_incompatible_refinement():
    with pytest.raises(IncompatibleRefinement):
        PLAN.ratios(12, 1e-3)
    with pytest.raises(IncompatibleRefinement):
        PLAN.ratios(16, 1.5e-3)
    with pytest.raises(ValueError):
        NoisePlan(0, 24, 1e-3)


def test_variance_normality_independence():
    dt = 4e-3
    dB = increments_for_grid(NoisePlan(9, 64, 1e-3), 16, dt, 0, 0, 6250)
    assert dB.size == 100_000
    assert abs(np.var(dB) / dt - 1) < 0.02
    assert scipy.stats.kstest(dB.ravel() / math.sqrt(dt), "norm").pvalue > 0.01
    assert abs(np.corrcoef(dB[:, :-1].ravel(), dB[:, 1:].ravel())[0, 1]) < 0.01
    assert abs(np.corrcoef(dB[:-1].ravel(), dB[1:].ravel())[0, 1]) < 0.01


def test_cells_feed_the_next_node():
    c = np.arange(4.0)
    assert cells_to_nodes(c, 0.25).tolist() == [6.0, 0.0, 2.0, 4.0]


def test_stochastic_convolution_moments():
    op = LongRangeOperator.build(32, 0.25)
    g = DiscreteSemigroup(op)
    t, dt, paths = 0.5, 1 / 256, 4000
    B = stochastic_convolution(NoisePlan(21, 32, dt), op, [0.0, t], dt, replicas=range(paths))
    assert np.all(B[:, 0] == 0)
    x = B[:, 1, 16]
    lam = g.eigs
    exact = np.sum(-np.expm1(-2 * t * lam) / (2 * lam) * g.mode_norms() * g.modes[:, 16] ** 2)
    se = math.sqrt(2 / paths)
    assert abs(np.var(x) / exact - 1) < 4 * se
    assert abs(np.mean(x)) < 3 * math.sqrt(exact / paths)


def test_stochastic_convolution_time_checks():
    op = LongRangeOperator.build(16, 0.25)
    with pytest.raises(ValueError):
        stochastic_convolution(NoisePlan(0, 16, 0.01), op, [0.015], 0.01)
