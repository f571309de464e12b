"""Private covariance and precision estimators.

All estimators draw noise block by block from sub-streams split off the
caller's :class:`~dpbandcov.rng.RandomStream` by block label, so a block's
noise does not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .errors import ArgumentError
from .matrix_core import (
    GammaRegion,
    IndexBlock,
    RegionMask,
    SymMatrix,
    band_partition,
    frobenius_norm,
    hierarchical_partition,
    operator_norm,
    sym_eigen,
    tridiagonal_mask,
)
from .privacy import (
    PrivacyBudget,
    noise_spec,
    sample_gue_block,
    split_budget_adaptive,
    split_budget_tridiagonal,
)
from .rng import RandomStream, as_stream

Norm = Literal["operator", "frobenius"]

DEFAULT_L = 10.0
DEFAULT_L1 = 5.0
DEFAULT_C0 = 0.25
DEFAULT_L2 = 10.0


@dataclass(frozen=True)
class Dataset:
    """``n`` samples of dimension ``d`` stored row-major."""

    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.array(self.rows, dtype=np.float64, copy=True)
        if x.ndim != 2:
            raise ArgumentError(f"dataset must be 2-D (n x d), got ndim={x.ndim}")
        if x.shape[0] < 2 or x.shape[1] < 1:
            raise ArgumentError(f"dataset needs n >= 2 and d >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ArgumentError("dataset has non-finite entries")
        x.flags.writeable = False
        object.__setattr__(self, "rows", x)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def as_dataset(data) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(data)


@dataclass(frozen=True)
class BlockDiagnostic:
    label: str
    block: IndexBlock
    rho0: float
    sigma: float
    truncated_rows: int
    truncated_cols: int


@dataclass(frozen=True)
class ThresholdDecision:
    """One thresholding step; ``kept`` is exactly ``statistic > threshold``."""

    region: GammaRegion
    statistic: float
    threshold: float
    kept: bool


@dataclass
class EstimateReport:
    estimate: SymMatrix
    budget: PrivacyBudget
    support: RegionMask
    blocks: list[BlockDiagnostic] = field(default_factory=list)
    decisions: list[ThresholdDecision] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def ledger(self) -> list[tuple[str, float]]:
        return self.budget.ledger

    @property
    def kept_regions(self) -> list[GammaRegion]:
        return [t.region for t in self.decisions if t.kept]


# --------------------------------------------------------------------------
# single block
# --------------------------------------------------------------------------


def _truncate(x: np.ndarray, L: float) -> tuple[np.ndarray, int]:
    """Zero every row whose squared norm exceeds ``L * width``."""
    if math.isinf(L):
        return x, 0
    keep = np.einsum("ij,ij->i", x, x) <= L * x.shape[1]
    return x * keep[:, None], int(x.shape[0] - keep.sum())


def _cov_block(data: Dataset, block: IndexBlock, rho0: float, L: float, rng: RandomStream, label: str):
    if not block.within(data.d):
        raise ArgumentError(f"block {block} outside dimension {data.d}")
    if not (L > 0):
        raise ArgumentError(f"truncation level must be positive, got {L}")
    if math.isinf(L) and not math.isinf(rho0):
        raise ArgumentError("an infinite truncation level is only allowed with rho0 = inf")
    rs, cs = block.slices()
    n = data.n
    xi, ti = _truncate(data.rows[:, rs], L)
    if block.is_diagonal:
        xj, tj = xi, ti
    else:
        xj, tj = _truncate(data.rows[:, cs], L)
    mu_i = xi.mean(axis=0)
    mu_j = xj.mean(axis=0)
    est = xi.T @ xj / n - np.outer(mu_i, mu_j)
    if block.is_diagonal:
        est = 0.5 * (est + est.T)
    spec = noise_spec(block, L if math.isfinite(L) else 1.0, n, rho0)
    if spec.sigma > 0:
        est = est + sample_gue_block(block, spec.sigma, rng)
    return est, BlockDiagnostic(label, block, rho0, spec.sigma, ti, tj)


def dp_cov_block(data, block: IndexBlock, rho0: float, L: float, rng) -> np.ndarray:
    """Truncated, mean-centred covariance of ``block`` plus Gaussian noise.

    Rows whose sub-vector on ``I`` (or ``J``) has squared norm above
    ``L |I|`` (``L |J|``) are zeroed on that side before the means and the
    cross-product are formed. Noise has per-entry variance
    ``18 L^2 |B| / (rho0 n^2)``; ``rho0 = inf`` adds none.
    """
    est, _ = _cov_block(as_dataset(data), block, rho0, L, as_stream(rng), "block")
    return est


# --------------------------------------------------------------------------
# blockwise tridiagonal
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TridiagonalConfig:
    k: int
    rho: float
    L: float = DEFAULT_L

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ArgumentError(f"block size k must be a positive integer, got {self.k}")
        if not self.rho > 0:
            raise ArgumentError(f"rho must be positive, got {self.rho}")
        if not self.L > 0:
            raise ArgumentError(f"L must be positive, got {self.L}")


def _fill_band(data, part, rho0, L, rng, budget, tag, est, diags) -> None:
    """Estimate the diagonal and super-diagonal blocks of ``part`` into ``est``."""
    n_blocks = part.num_blocks
    for l in range(1, n_blocks + 1):
        for l2 in (l, l + 1):
            blk = part.block(l, l2)
            if blk is None:
                continue
            label = f"{tag}:B[{l},{l2}]"
            budget.spend(label, rho0)
            val, diag = _cov_block(data, blk, rho0, L, rng.split(tag, l, l2), label)
            rs, cs = blk.slices()
            est[rs, cs] = val
            est[cs, rs] = val.T
            diags.append(diag)


def blockwise_tridiagonal(data, cfg: TridiagonalConfig, rng) -> EstimateReport:
    """Private estimate keeping only diagonal and first off-diagonal blocks.

    Each of the ``N_k`` diagonal and ``N_k - 1`` super-diagonal blocks gets
    ``rho / (2 N_k)``; sub-diagonal blocks are the mirrored super-diagonal
    estimates, everything else is zero.
    """
    data, rng = as_dataset(data), as_stream(rng)
    part = band_partition(data.d, cfg.k)
    rho0 = split_budget_tridiagonal(cfg.rho, part.num_blocks)
    budget = PrivacyBudget(cfg.rho)
    est = np.zeros((data.d, data.d))
    diags: list[BlockDiagnostic] = []
    _fill_band(data, part, rho0, cfg.L, rng, budget, "tri", est, diags)
    return EstimateReport(
        estimate=SymMatrix(est),
        budget=budget,
        support=tridiagonal_mask(part),
        blocks=diags,
        params={"estimator": "tridiagonal", "k": part.block_size, "rho0": rho0},
    )


def naive_full_estimator(data, rho: float, L: float, rng) -> EstimateReport:
    """One private release of the whole ``d x d`` covariance with budget ``rho``."""
    data, rng = as_dataset(data), as_stream(rng)
    d = data.d
    blk = IndexBlock((1, d), (1, d))
    budget = PrivacyBudget(rho)
    budget.spend("naive:B[1,1]", rho)
    val, diag = _cov_block(data, blk, rho, L, rng.split("naive"), "naive:B[1,1]")
    return EstimateReport(
        estimate=SymMatrix(val),
        budget=budget,
        support=RegionMask.full(d),
        blocks=[diag],
        params={"estimator": "naive", "k": d, "rho0": rho},
    )


def _floor(x: float) -> int:
    # keeps exact powers such as 1000 ** (1/3) from flooring to 9
    return int(math.floor(x * (1 + 1e-12)))


def select_block_size(
    norm: Norm,
    n: int,
    d: int,
    rho: float,
    alpha: float,
    mode: Literal["theory", "experiment"] = "theory",
) -> int:
    """Block size balancing bias, sampling error and privacy noise.

    ``theory``: operator ``min(n^(1/(2a+1)), (rho n^2/d)^(1/(2a+2))) v log d``,
    Frobenius ``min(n^(1/(2a+2)), (rho n^2/d)^(1/(2a+3)))``.
    ``experiment``: same statistical term, privacy term scaled by 0.5 and no
    ``log d`` floor. Results are floored and clamped to ``[1, d]``.
    """
    if n < 1 or d < 1 or not rho > 0 or not alpha > 0:
        raise ArgumentError("n, d, rho and alpha must be positive")
    if norm not in ("operator", "frobenius") or mode not in ("theory", "experiment"):
        raise ArgumentError(f"unknown norm/mode {norm!r}/{mode!r}")
    ratio = rho * n * n / d
    if norm == "operator":
        stat = n ** (1.0 / (2 * alpha + 1))
        priv = ratio ** (1.0 / (2 * alpha + 2))
    else:
        stat = n ** (1.0 / (2 * alpha + 2))
        priv = ratio ** (1.0 / (2 * alpha + 3))
    if mode == "experiment":
        priv *= 0.5
    k = min(stat, priv)
    if mode == "theory" and norm == "operator":
        k = max(k, math.log(d))
    return max(1, min(d, _floor(k)))


# --------------------------------------------------------------------------
# adaptive
# --------------------------------------------------------------------------


def default_k0(n: int) -> int:
    return max(1, math.ceil(math.log(n)))


@dataclass(frozen=True)
class AdaptiveConfig:
    rho: float
    k0: Optional[int] = None
    L: float = DEFAULT_L
    L1: float = DEFAULT_L1
    c0: float = DEFAULT_C0
    norm: Norm = "operator"

    def __post_init__(self):
        if self.k0 is not None and (int(self.k0) != self.k0 or self.k0 < 1):
            raise ArgumentError(f"k0 must be a positive integer, got {self.k0}")
        if not self.rho > 0 or not self.L > 0 or not self.L1 > 0:
            raise ArgumentError("rho, L and L1 must be positive")
        if not 0 < self.c0 <= 1:
            raise ArgumentError(f"c0 must lie in (0, 1], got {self.c0}")
        if self.norm not in ("operator", "frobenius"):
            raise ArgumentError(f"unknown norm {self.norm!r}")


def adaptive_threshold_sq(k_m: int, n: int, d: int, rho_m: float, L1: float) -> float:
    """Squared threshold ``tau_m^2`` for level-``m`` L-regions (natural log)."""
    logd = max(math.log(d), 0.0)
    priv = 0.0 if math.isinf(rho_m) else k_m * k_m * (k_m + logd) / (rho_m * n * n)
    return L1 * ((k_m + logd) / n + priv + math.exp(-2.0 * k_m))


def adaptive_estimator(data, cfg: AdaptiveConfig, rng) -> EstimateReport:
    """Hierarchical blockwise tridiagonal estimator with block thresholding.

    Level 0 is a blockwise tridiagonal band of size ``k0``. Each further
    level doubles the block size and adds the L-shaped regions
    ``Gamma^m_{l+}``, each kept only when its noisy estimate is large
    relative to ``tau_m`` (operator norm), or when ``||A||_F^2 > k_m tau_m^2``
    (Frobenius variant).
    """
    data, rng = as_dataset(data), as_stream(rng)
    n, d = data.n, data.d
    k0 = cfg.k0 if cfg.k0 is not None else default_k0(n)
    hp = hierarchical_partition(d, k0, n, cfg.c0)
    M = hp.max_level
    part0 = hp.level(0)
    N0 = part0.num_blocks
    budget = PrivacyBudget(cfg.rho)
    est = np.zeros((d, d))
    diags: list[BlockDiagnostic] = []

    rho0 = split_budget_adaptive(cfg.rho, M, N0, None, 0)
    _fill_band(data, part0, rho0, cfg.L, rng, budget, "ada0", est, diags)

    decisions: list[ThresholdDecision] = []
    for m in range(1, M):
        k_m = hp.block_size(m)
        N_m = hp.num_blocks(m)
        rho_m = split_budget_adaptive(cfg.rho, M, N0, N_m, m)
        tau_sq = adaptive_threshold_sq(k_m, n, d, rho_m, cfg.L1)
        for region in hp.gamma_regions(m):
            label = f"ada{m}:G[{region.index}+]"
            budget.spend(label, rho_m)
            full, diag = _cov_block(data, region.block, rho_m, cfg.L, rng.split("ada", m, region.index), label)
            diags.append(diag)
            inside = region.local_mask()
            a = np.where(inside, full, 0.0)
            if cfg.norm == "operator":
                stat, thr = operator_norm(a), math.sqrt(tau_sq)
            else:
                stat, thr = frobenius_norm(a) ** 2, k_m * tau_sq
            kept = stat > thr
            decisions.append(ThresholdDecision(region, stat, thr, kept))
            if kept:
                rs, cs = region.block.slices()
                est[rs, cs] = np.where(inside, a, est[rs, cs])
                est[cs, rs] = est[rs, cs].T

    return EstimateReport(
        estimate=SymMatrix(est),
        budget=budget,
        support=hp.band_mask(M - 1),
        blocks=diags,
        decisions=decisions,
        params={"estimator": "adaptive", "k0": k0, "M": M, "rho0": rho0, "norm": cfg.norm},
    )


# --------------------------------------------------------------------------
# precision
# --------------------------------------------------------------------------


def precision_estimator(sigma_hat, L2: float = DEFAULT_L2) -> SymMatrix:
    """Inverse of ``sigma_hat`` after flooring its eigenvalues at ``1 / L2``."""
    if not L2 > 0:
        raise ArgumentError(f"L2 must be positive, got {L2}")
    w, u = sym_eigen(sigma_hat)
    inv = 1.0 / np.maximum(w, 1.0 / L2)
    return SymMatrix.symmetrized((u * inv) @ u.T)
