"""Bandable covariance families and a seeded Gaussian sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import ArgumentError, ModelError
from .estimators import Dataset
from .matrix_core import SymMatrix, operator_norm, sym_eigen
from .rng import RandomStream, as_stream

Family = Literal["power_deterministic", "power_random", "exponential", "identity", "custom"]


def _distance(d: int) -> np.ndarray:
    i = np.arange(d)
    return np.abs(i[:, None] - i[None, :])


def _cholesky_or_raise(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ModelError("covariance is not positive definite") from exc


def _checked(a: np.ndarray) -> SymMatrix:
    s = SymMatrix(a)
    _cholesky_or_raise(s.array)
    return s


def make_power_deterministic(d: int, alpha: float, c: float = 0.5) -> SymMatrix:
    """Unit diagonal, ``Sigma_ij = c |i-j|^-(alpha+1)`` off the diagonal."""
    if d < 1 or not alpha > 0 or c < 0:
        raise ArgumentError("need d >= 1, alpha > 0, c >= 0")
    dist = _distance(d).astype(float)
    off = c * np.power(np.maximum(dist, 1.0), -(alpha + 1.0))
    return _checked(np.where(dist == 0, 1.0, off))


def make_power_random(d: int, alpha: float, c: float, rng, u: Optional[np.ndarray] = None) -> SymMatrix:
    """Power decay scaled entrywise by iid Uniform[0, 1] multipliers.

    Multipliers are drawn for the strict lower triangle and mirrored. ``u``
    overrides the draw (a ``d x d`` array; only its strict lower triangle
    is read).
    """
    if d < 1 or not alpha > 0 or c < 0:
        raise ArgumentError("need d >= 1, alpha > 0, c >= 0")
    if u is None:
        u = as_stream(rng).uniform(size=(d, d))
    u = np.tril(np.asarray(u, dtype=float), -1)
    u = u + u.T
    dist = _distance(d).astype(float)
    off = c * np.power(np.maximum(dist, 1.0), -(alpha + 1.0)) * u
    return _checked(np.where(dist == 0, 1.0, off))


def make_exponential(d: int, gamma: float, c: float = 0.5) -> SymMatrix:
    """Unit diagonal, ``Sigma_ij = c exp(-gamma |i-j|)`` off the diagonal."""
    if d < 1 or not gamma > 0 or c < 0:
        raise ArgumentError("need d >= 1, gamma > 0, c >= 0")
    dist = _distance(d).astype(float)
    off = c * np.exp(-gamma * dist) if math.isfinite(gamma) else np.zeros((d, d))
    return _checked(np.where(dist == 0, 1.0, off))


@dataclass(frozen=True)
class CovarianceModel:
    """Declarative description of a covariance family, built by :meth:`build`."""

    family: Family
    d: int
    alpha: float = 1.0
    gamma: float = 1.0
    c: float = 0.5
    seed: int = 0

    def build(self) -> SymMatrix:
        if self.family == "power_deterministic":
            return make_power_deterministic(self.d, self.alpha, self.c)
        if self.family == "power_random":
            return make_power_random(self.d, self.alpha, self.c, RandomStream(self.seed).split("model"))
        if self.family == "exponential":
            return make_exponential(self.d, self.gamma, self.c)
        if self.family == "identity":
            return SymMatrix(np.eye(self.d))
        raise ArgumentError(f"family {self.family!r} cannot be built from parameters")


def sample_mvn(sigma, n: int, rng) -> np.ndarray:
    """``n`` iid ``N(0, sigma)`` rows via the lower Cholesky factor.

    Returns a plain array; wrap in :class:`Dataset` (which needs ``n >= 2``)
    before handing it to an estimator.
    """
    if n < 1:
        raise ArgumentError("n must be >= 1")
    a = np.asarray(sigma, dtype=float)
    chol = _cholesky_or_raise(a)
    z = as_stream(rng).standard_normal((n, a.shape[0]))
    return z @ chol.T


def sample_dataset(sigma, n: int, rng) -> Dataset:
    return Dataset(sample_mvn(sigma, n, rng))


def min_eigenvalue(sigma) -> float:
    return float(sym_eigen(sigma)[0][-1])


@dataclass(frozen=True)
class MembershipReport:
    block_norms: np.ndarray
    entry_ratios: np.ndarray
    norm_constant: float
    entry_constant: float


def class_membership_diagnostics(sigma, alpha: float) -> MembershipReport:
    """Smallest constants placing ``sigma`` in the norm-decay and entry-decay classes.

    ``block_norms[k-1]`` is the largest ``||Sigma_R|| k^alpha`` over the
    maximal ``k``-off-diagonal blocks ``R = [1..i] x [i+k..d]``;
    ``entry_ratios[k-1]`` is ``max |Sigma_ij| k^(alpha+1)`` over ``|i-j| = k``.
    Every ``k``-off-diagonal block sits inside one of the maximal ones, so
    the first maximum is the class constant.
    """
    a = np.asarray(sigma, dtype=float)
    d = a.shape[0]
    block_norms = np.zeros(max(d - 1, 0))
    entry_ratios = np.zeros(max(d - 1, 0))
    for k in range(1, d):
        best = 0.0
        for i in range(1, d - k + 1):
            best = max(best, operator_norm(a[:i, i + k - 1 :]))
        block_norms[k - 1] = best * k**alpha
        diag = np.abs(np.diagonal(a, offset=k))
        entry_ratios[k - 1] = float(diag.max()) * k ** (alpha + 1)
    return MembershipReport(
        block_norms,
        entry_ratios,
        float(block_norms.max(initial=0.0)),
        float(entry_ratios.max(initial=0.0)),
    )


def to_matrix_csv(m) -> str:
    """Matrix CSV: ``dim,<d>`` then ``d`` comma-separated rows."""
    a = np.asarray(m, dtype=float)
    lines = [f"dim,{a.shape[0]}"]
    lines += [",".join(repr(float(v)) for v in row) for row in a]
    return "\n".join(lines) + "\n"


def from_matrix_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split(",")
    if head[0].strip() != "dim" or len(head) != 2:
        raise ArgumentError("matrix CSV must start with 'dim,<d>'")
    d = int(head[1])
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    a = np.array(rows, dtype=float)
    if a.shape != (d, d):
        raise ArgumentError(f"matrix CSV declares dim {d} but has shape {a.shape}")
    return a
