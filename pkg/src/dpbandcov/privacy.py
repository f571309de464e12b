"""zCDP accounting and Gaussian-mechanism calibration for covariance blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, BudgetError
from .matrix_core import IndexBlock
from .rng import RandomStream

# relative slack for float round-off when summing allocations
_LEDGER_RTOL = 1e-12


def _positive(name: str, value: float, allow_inf: bool = False) -> float:
    value = float(value)
    if math.isnan(value) or value <= 0 or (math.isinf(value) and not allow_inf):
        raise ArgumentError(f"{name} must be positive{'' if allow_inf else ' and finite'}, got {value}")
    return value


@dataclass
class PrivacyBudget:
    """Running zCDP ledger. Allocations compose additively and fail closed.

    ``total_rho = inf`` is the non-private sentinel; allocations of ``inf``
    are then accepted and recorded.
    """

    total_rho: float
    ledger: list[tuple[str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.total_rho = _positive("total_rho", self.total_rho, allow_inf=True)
        # running sum for the admission check; ``spent`` recomputes exactly
        self._running = math.fsum(r for _, r in self.ledger)

    @property
    def spent(self) -> float:
        return math.fsum(r for _, r in self.ledger)

    @property
    def remaining(self) -> float:
        return self.total_rho - self.spent if math.isfinite(self.total_rho) else math.inf

    def spend(self, label: str, rho: float) -> float:
        rho = _positive("allocation", rho, allow_inf=math.isinf(self.total_rho))
        if math.isfinite(self.total_rho):
            after = self._running + rho
            if after > self.total_rho * (1 + _LEDGER_RTOL):
                raise BudgetError(
                    f"allocating {rho:g} to {label!r} would spend {after:g} > total {self.total_rho:g}"
                )
        self.ledger.append((label, rho))
        self._running += rho
        return rho

    def within_budget(self) -> bool:
        return self.spent <= self.total_rho * (1 + _LEDGER_RTOL)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    block: IndexBlock
    symmetric: bool


def gaussian_sigma(delta_2_sensitivity: float, rho: float) -> float:
    """Noise scale ``sqrt(Delta^2 / (2 rho))`` giving rho-zCDP; 0 when ``rho`` is inf."""
    delta = _positive("sensitivity", delta_2_sensitivity)
    rho = _positive("rho", rho, allow_inf=True)
    if math.isinf(rho):
        return 0.0
    return math.sqrt(delta * delta / (2.0 * rho))


def block_cov_sensitivity(L: float, block_size: int, n: int) -> float:
    """Frobenius sensitivity ``6 L sqrt(|B|) / n`` of a truncated block covariance."""
    L = _positive("L", L)
    if block_size < 1 or n < 1:
        raise ArgumentError("block_size and n must be >= 1")
    return 6.0 * L * math.sqrt(block_size) / n


def noise_spec(block: IndexBlock, L: float, n: int, rho0: float) -> NoiseSpec:
    """Per-entry noise for one block release; exact zero when ``rho0`` is inf."""
    rho0 = _positive("rho0", rho0, allow_inf=True)
    if math.isinf(rho0):
        sigma = 0.0
    else:
        sigma = gaussian_sigma(block_cov_sensitivity(L, block.size, n), rho0)
    return NoiseSpec(sigma, block, block.is_diagonal)


def sample_gue_block(block: IndexBlock, sigma: float, rng: RandomStream) -> np.ndarray:
    """Gaussian noise for ``block``: symmetric with iid upper triangle on
    diagonal blocks, iid entries on blocks disjoint from the diagonal.

    A block that only partially overlaps its transpose is cut from one
    symmetric draw over the covering index range.
    """
    if not sigma >= 0:
        raise ArgumentError("sigma must be non-negative")
    shape = (block.n_rows, block.n_cols)
    if sigma == 0:
        return np.zeros(shape)
    if block.is_diagonal:
        g = np.triu(rng.standard_normal(shape))
        return sigma * (g + np.triu(g, 1).T)
    if block.intersect(block.transpose()) is None:
        return sigma * rng.standard_normal(shape)
    lo = min(block.rows[0], block.cols[0])
    hi = max(block.rows[1], block.cols[1])
    g = np.triu(rng.standard_normal((hi - lo + 1, hi - lo + 1)))
    g = g + np.triu(g, 1).T
    return sigma * g[block.rows[0] - lo : block.rows[1] - lo + 1, block.cols[0] - lo : block.cols[1] - lo + 1]


def split_budget_tridiagonal(rho: float, N_k: int) -> float:
    """Per-block budget ``rho / (2 N_k)`` for the blockwise tridiagonal estimator."""
    rho = _positive("rho", rho, allow_inf=True)
    if N_k < 1:
        raise ArgumentError("N_k must be >= 1")
    return rho / (2 * N_k)


def split_budget_adaptive(rho: float, M: int, N_0: int, N_m: int | None, level: int) -> float:
    """Per-block budget of the adaptive estimator.

    Level 0 gets ``rho / (2 M N_0)``; level ``m >= 1`` gets ``rho / (M N_m)``.
    """
    rho = _positive("rho", rho, allow_inf=True)
    if M < 1 or N_0 < 1 or level < 0:
        raise ArgumentError("M and N_0 must be >= 1 and level >= 0")
    if level == 0:
        return rho / (2 * M * N_0)
    if N_m is None or N_m < 1:
        raise ArgumentError("N_m must be >= 1 for levels m >= 1")
    return rho / (M * N_m)


def zcdp_to_approx_dp(rho: float, delta: float) -> float:
    """epsilon such that rho-zCDP implies (epsilon, delta)-DP."""
    rho = _positive("rho", rho)
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def approx_dp_to_zcdp(epsilon: float, delta: float) -> float:
    """Largest rho for which the simple sufficient condition gives (epsilon, delta)-DP.

    Valid for ``epsilon <= 1`` and ``delta <= 1/e``.
    """
    if not 0 < epsilon <= 1:
        raise ArgumentError("epsilon must lie in (0, 1]")
    if not 0 < delta <= math.exp(-1):
        raise ArgumentError("delta must lie in (0, 1/e]")
    return epsilon * epsilon / (8.0 * math.log(1.0 / delta))


def pure_dp_to_zcdp(epsilon: float) -> float:
    """(epsilon, 0)-DP implies (epsilon^2 / 2)-zCDP."""
    return _positive("epsilon", epsilon) ** 2 / 2.0
