"""Rate formulas, the tridiagonal blocking bound, and Gaussian Fisher information.

Rates are returned without the unknown constants hidden by ``≍``; only
their exponents are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import ArgumentError, FitError, LayoutError, NumericError
from .matrix_core import operator_norm, sym_eigen
from .rng import RandomStream, as_stream

Norm = Literal["operator", "frobenius"]


@dataclass(frozen=True)
class RateSpec:
    norm: Norm
    n: float
    d: float
    rho: float
    alpha: float

    def __post_init__(self):
        if self.norm not in ("operator", "frobenius"):
            raise ArgumentError(f"unknown norm {self.norm!r}")
        for name in ("n", "d", "rho", "alpha"):
            v = getattr(self, name)
            if not v > 0 or (name != "rho" and math.isinf(v)):
                raise ArgumentError(f"{name} must be positive and finite (rho may be inf), got {v}")


@dataclass(frozen=True)
class RateTerms:
    statistical: float
    privacy: float

    @property
    def total(self) -> float:
        return self.statistical + self.privacy


def rate_terms(spec: RateSpec) -> RateTerms:
    a = spec.alpha
    if spec.norm == "operator":
        stat_exp, priv_exp = 2 * a / (2 * a + 1), a / (a + 1)
    else:
        stat_exp, priv_exp = (2 * a + 1) / (2 * (a + 1)), (2 * a + 1) / (2 * a + 3)
    stat = spec.n ** (-stat_exp)
    priv = 0.0 if math.isinf(spec.rho) else (spec.d / (spec.rho * spec.n**2)) ** priv_exp
    return RateTerms(stat, priv)


def minimax_rate(spec: RateSpec) -> float:
    """Two-term minimax rate: statistical plus privacy cost."""
    return rate_terms(spec).total


def naive_rate(n: float, d: float, rho: float) -> float:
    """Rate ``d/n + d^3/(rho n^2)`` of privatising the full empirical covariance."""
    if not (n > 0 and d > 0 and rho > 0):
        raise ArgumentError("n, d and rho must be positive")
    return d / n + (0.0 if math.isinf(rho) else d**3 / (rho * n * n))


def exponential_decay_rate(n: float, d: float, rho: float) -> float:
    """Operator-norm rate for covariances with exponentially decaying off-band norms."""
    if not (n > 1 and d > 0 and rho > 0):
        raise ArgumentError("need n > 1 and positive d, rho")
    stat = math.log(n) / n
    if math.isinf(rho):
        return stat
    ratio = rho * n * n / d
    return stat + (1.0 / ratio) * (math.log(ratio) + math.log(d)) ** 2


def schatten_rate(spec: RateSpec, q: float) -> float:
    """Rate of ``d^(-2/q) E||.||_{S_q}^2`` for ``q >= 2``; equals the operator rate."""
    if q < 2:
        raise ArgumentError("Schatten rate needs q >= 2")
    return minimax_rate(RateSpec("operator", spec.n, spec.d, spec.rho, spec.alpha))


# --------------------------------------------------------------------------
# blocking bound
# --------------------------------------------------------------------------


def tridiagonal_norm_bound_check(blocks: Sequence[Sequence[np.ndarray]]) -> tuple[float, float]:
    """Assemble a blockwise tridiagonal matrix and return ``(||A||, 4 max ||A_B||)``.

    ``blocks[l]`` lists the blocks in block-row ``l`` with column offsets
    ``l-1, l, l+1`` (omitting those outside the layout): the first row has
    ``[A_11, A_12]``, middle rows ``[A_l,l-1, A_ll, A_l,l+1]``, the last row
    ``[A_N,N-1, A_NN]``. A single block row holds ``[A_11]``.
    """
    nb = len(blocks)
    if nb == 0:
        raise LayoutError("empty layout")
    diag = []
    for l, row in enumerate(blocks):
        expected = 1 + (l > 0) + (l < nb - 1)
        if len(row) != expected:
            raise LayoutError(f"block row {l} has {len(row)} blocks, expected {expected}")
        diag.append(np.asarray(row[0 if l == 0 else 1], dtype=float))
    sizes = []
    for l, b in enumerate(diag):
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise LayoutError(f"diagonal block {l} is not square")
        sizes.append(b.shape[0])
    offs = np.concatenate([[0], np.cumsum(sizes)])
    d = int(offs[-1])
    a = np.zeros((d, d))
    max_block = 0.0
    for l, row in enumerate(blocks):
        cols = [c for c in (l - 1, l, l + 1) if 0 <= c < nb]
        for c, b in zip(cols, row):
            b = np.asarray(b, dtype=float)
            if b.shape != (sizes[l], sizes[c]):
                raise LayoutError(f"block ({l},{c}) has shape {b.shape}, expected {(sizes[l], sizes[c])}")
            a[offs[l] : offs[l + 1], offs[c] : offs[c + 1]] = b
            max_block = max(max_block, operator_norm(b))
    return operator_norm(a), 4.0 * max_block


# --------------------------------------------------------------------------
# Fisher information of N(0, Sigma)
# --------------------------------------------------------------------------


def _pd_eigenvalues(sigma) -> tuple[np.ndarray, np.ndarray]:
    w, u = sym_eigen(sigma)
    if w[-1] <= 0:
        raise NumericError(f"covariance is not positive definite (min eigenvalue {w[-1]:g})")
    return w, u


def gaussian_fisher_trace(sigma) -> float:
    """Trace of the Fisher information about ``Sigma``: ``(tr S^-2 + (tr S^-1)^2) / 4``."""
    w, _ = _pd_eigenvalues(sigma)
    inv = 1.0 / w
    return 0.25 * (float(np.sum(inv * inv)) + float(np.sum(inv)) ** 2)


def gaussian_fisher_opnorm(sigma) -> float:
    """Operator norm of the Fisher information: ``||Sigma^-1||^2 / 2``."""
    w, _ = _pd_eigenvalues(sigma)
    return 0.5 / (w[-1] * w[-1])


def gaussian_score(x: np.ndarray, sigma_inv: np.ndarray) -> np.ndarray:
    """Scores ``(S^-1 x x^T S^-1 - S^-1) / 2`` for each row of ``x`` (shape ``m x d x d``)."""
    y = x @ sigma_inv
    return 0.5 * (y[:, :, None] * y[:, None, :] - sigma_inv[None, :, :])


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    draws: int


def fisher_trace_monte_carlo(sigma, draws: int, rng, chunk: int = 20000) -> MonteCarloEstimate:
    """Sample mean of ``||s(x; Sigma)||_F^2`` over ``x ~ N(0, Sigma)``."""
    rng = as_stream(rng)
    a = np.asarray(sigma, dtype=float)
    s_inv = np.linalg.inv(a)
    chol = np.linalg.cholesky(a)
    vals = []
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        x = rng.split("chunk", done).standard_normal((m, a.shape[0])) @ chol.T
        s = gaussian_score(x, s_inv)
        vals.append(np.einsum("mij,mij->m", s, s))
        done += m
    v = np.concatenate(vals)
    return MonteCarloEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size))


def fisher_direction_monte_carlo(sigma, direction, draws: int, rng) -> MonteCarloEstimate:
    """Sample variance of ``<s(x; Sigma), M>`` for a symmetric direction ``M``.

    The standard error is the delta-method one for a sample variance.
    """
    rng = as_stream(rng)
    a = np.asarray(sigma, dtype=float)
    mdir = np.asarray(direction, dtype=float)
    s_inv = np.linalg.inv(a)
    chol = np.linalg.cholesky(a)
    x = rng.standard_normal((draws, a.shape[0])) @ chol.T
    q = s_inv @ mdir @ s_inv
    t = 0.5 * np.einsum("mi,ij,mj->m", x, q, x) - 0.5 * float(np.trace(s_inv @ mdir))
    c = t - t.mean()
    var = float(np.mean(c * c))
    se = math.sqrt(max(float(np.mean(c**4)) - var * var, 0.0) / draws)
    return MonteCarloEstimate(var, se, draws)


def fisher_direction_exact(sigma, direction) -> float:
    """``Var <s, M> = ||S^-1/2 M S^-1/2||_F^2 / 2`` for symmetric ``M``."""
    w, u = _pd_eigenvalues(sigma)
    root_inv = (u / np.sqrt(w)) @ u.T
    b = root_inv @ np.asarray(direction, dtype=float) @ root_inv
    return 0.5 * float(np.sum(b * b))


# --------------------------------------------------------------------------
# regression
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> LogLogFit:
    """Least-squares line through ``(ln x, ln y)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise FitError("need at least three (x, y) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise FitError("all coordinates must be positive and finite")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0:
        raise FitError("all x values are identical")
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean()))) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    syy = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if syy == 0 else 1.0 - float(np.sum(resid**2)) / syy
    return LogLogFit(slope, intercept, r2)
