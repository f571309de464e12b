import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbandcov.errors import ArgumentError, BudgetError
from dpbandcov.estimators import dp_cov_block
from dpbandcov.matrix_core import IndexBlock
from dpbandcov.privacy import (
    PrivacyBudget,
    approx_dp_to_zcdp,
    block_cov_sensitivity,
    gaussian_sigma,
    noise_spec,
    pure_dp_to_zcdp,
    sample_gue_block,
    split_budget_adaptive,
    split_budget_tridiagonal,
    zcdp_to_approx_dp,
)
from dpbandcov.rng import RandomStream

positive = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


# --------------------------------------------------------------------------
# budget ledger
# --------------------------------------------------------------------------


def test_budget_composes_additively():
    b = PrivacyBudget(1.0)
    b.spend("a", 0.25)
    b.spend("b", 0.5)
    assert b.spent == 0.75
    assert b.remaining == 0.25
    assert b.ledger == [("a", 0.25), ("b", 0.5)]


def test_budget_fails_closed():
    b = PrivacyBudget(1.0)
    b.spend("a", 0.6)
    with pytest.raises(BudgetError):
        b.spend("b", 0.5)
    # the rejected allocation left no trace
    assert b.ledger == [("a", 0.6)]


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_budget_rejects_nonpositive_allocation(bad):
    with pytest.raises(ArgumentError):
        PrivacyBudget(1.0).spend("x", bad)


def test_budget_rejects_infinite_allocation_on_finite_total():
    with pytest.raises(ArgumentError):
        PrivacyBudget(1.0).spend("x", math.inf)


def test_infinite_budget_accepts_infinite_allocations():
    b = PrivacyBudget(math.inf)
    b.spend("x", math.inf)
    assert b.within_budget()


@settings(max_examples=200)
@given(st.floats(0.01, 10), st.lists(st.floats(1e-4, 5), min_size=1, max_size=40))
def test_ledger_never_exceeds_total(total, allocations):
    b = PrivacyBudget(total)
    for i, r in enumerate(allocations):
        try:
            b.spend(f"a{i}", r)
        except BudgetError:
            pass
        assert b.spent <= total * (1 + 1e-12)


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------


def test_gaussian_sigma_examples():
    assert gaussian_sigma(1.0, 0.5) == 1.0
    assert gaussian_sigma(2.0, 0.5) == 2.0
    s = gaussian_sigma(block_cov_sensitivity(10, 16, 100), 0.05)
    assert s * s == pytest.approx(57.6, rel=1e-12)
    assert gaussian_sigma(1.0, math.inf) == 0.0


@pytest.mark.parametrize("delta,rho", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, -2.0)])
def test_gaussian_sigma_rejects_nonpositive(delta, rho):
    with pytest.raises(ArgumentError):
        gaussian_sigma(delta, rho)


def test_block_sensitivity_example():
    assert block_cov_sensitivity(1.0, 4, 10) == pytest.approx(1.2, rel=1e-15)
    with pytest.raises(ArgumentError):
        block_cov_sensitivity(0.0, 4, 10)


@given(positive, st.integers(1, 10_000), st.integers(1, 10**6), positive)
def test_calibration_identity(L, b, n, rho):
    s = gaussian_sigma(block_cov_sensitivity(L, b, n), rho)
    want = 18 * L * L * b / (rho * n * n)
    assert abs(s * s - want) <= 1e-12 * want


def test_noise_spec_uses_actual_rectangular_size():
    blk = IndexBlock((9, 10), (11, 14))
    spec = noise_spec(blk, 10.0, 100, 0.5)
    assert spec.sigma**2 == pytest.approx(18 * 100 * 8 / (0.5 * 100**2), rel=1e-12)
    assert not spec.symmetric
    assert noise_spec(IndexBlock((1, 3), (1, 3)), 10.0, 100, math.inf).sigma == 0.0


# --------------------------------------------------------------------------
# noise sampling
# --------------------------------------------------------------------------


def test_gue_zero_sigma():
    assert np.array_equal(sample_gue_block(IndexBlock((1, 3), (1, 3)), 0.0, RandomStream(0)), np.zeros((3, 3)))


def test_gue_diagonal_block_symmetric():
    g = sample_gue_block(IndexBlock((4, 6), (4, 6)), 1.3, RandomStream(1))
    assert np.array_equal(g - g.T, np.zeros((3, 3)))


def test_gue_partial_overlap_is_consistent_with_symmetric_draw():
    blk = IndexBlock((1, 4), (3, 6))
    g = sample_gue_block(blk, 1.0, RandomStream(2))
    assert g.shape == (4, 4)
    # cells (3,4) and (4,3) of the global matrix both fall inside the block
    assert g[2, 1] == g[3, 0]


@pytest.mark.parametrize("block", [IndexBlock((1, 450), (1, 450)), IndexBlock((1, 300), (301, 640))])
def test_gue_entry_variance(block):
    sigma = 0.7
    g = sample_gue_block(block, sigma, RandomStream(3))
    # independent entries: the upper triangle of a diagonal block, all of an off-diagonal one
    vals = g[np.triu_indices(block.n_rows)] if block.is_diagonal else g.ravel()
    assert vals.size >= 100_000
    sq = vals * vals
    se = float(np.std(sq, ddof=1) / math.sqrt(sq.size))
    assert abs(float(sq.mean()) - sigma**2) <= 3 * se


def test_gue_off_diagonal_blocks_independent_entries():
    g = sample_gue_block(IndexBlock((1, 50), (51, 100)), 1.0, RandomStream(4))
    assert not np.allclose(g, g.T)


# --------------------------------------------------------------------------
# budget splits and conversions
# --------------------------------------------------------------------------


def test_split_tridiagonal_examples():
    assert split_budget_tridiagonal(1.0, 5) == pytest.approx(0.1)
    assert split_budget_tridiagonal(0.5, 1) == 0.25
    with pytest.raises(ArgumentError):
        split_budget_tridiagonal(1.0, 0)


def test_split_adaptive_examples():
    assert split_budget_adaptive(1.0, 3, 8, None, 0) == pytest.approx(1 / 48)
    assert split_budget_adaptive(1.0, 3, 8, 4, 1) == pytest.approx(1 / 12)
    with pytest.raises(ArgumentError):
        split_budget_adaptive(1.0, 3, 8, None, 1)


def test_zcdp_conversion_example():
    assert zcdp_to_approx_dp(0.5, 0.01) == pytest.approx(0.5 + 2 * math.sqrt(0.5 * math.log(100)), rel=1e-15)
    assert zcdp_to_approx_dp(0.5, 0.01) == pytest.approx(3.535, abs=5e-4)


def test_zcdp_conversion_monotone_to_zero():
    eps = [zcdp_to_approx_dp(r, 1e-5) for r in (1.0, 1e-1, 1e-2, 1e-4, 1e-8)]
    assert all(a > b for a, b in zip(eps, eps[1:]))
    assert eps[-1] < 1e-3


def test_sufficient_condition_implies_target_epsilon():
    rho = approx_dp_to_zcdp(1.0, math.exp(-1))
    assert rho == pytest.approx(0.125)
    assert zcdp_to_approx_dp(rho, math.exp(-1)) <= 1.0


@given(st.floats(1e-3, 1.0), st.floats(1e-12, math.exp(-1)))
def test_sufficient_condition_property(eps, delta):
    assert zcdp_to_approx_dp(approx_dp_to_zcdp(eps, delta), delta) <= eps * (1 + 1e-12)


def test_pure_dp_conversion():
    assert pure_dp_to_zcdp(2.0) == 2.0


# --------------------------------------------------------------------------
# empirical sensitivity
# --------------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(
    st.integers(2, 30),
    st.integers(1, 4),
    st.integers(1, 4),
    st.booleans(),
    st.floats(0.5, 5.0),
    st.integers(0, 2**32 - 1),
)
def test_sensitivity_bound_holds_on_adjacent_pairs(n, ri, ci, diagonal, L, seed):
    rng = np.random.default_rng(seed)
    d = 10
    rows = (1, ri)
    cols = rows if diagonal else (5, 4 + ci)
    blk = IndexBlock(rows, cols)
    # scale so truncation triggers for a sizeable fraction of rows
    x = rng.standard_normal((n, d)) * rng.choice([0.5, 1.5, 4.0])
    y = x.copy()
    y[rng.integers(n)] = rng.standard_normal(d) * rng.choice([0.5, 1.5, 4.0, 20.0])
    a = dp_cov_block(x, blk, math.inf, L, RandomStream(0))
    b = dp_cov_block(y, blk, math.inf, L, RandomStream(0))
    assert np.linalg.norm(a - b) <= block_cov_sensitivity(L, blk.size, n) * (1 + 1e-12)
