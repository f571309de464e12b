"""Symmetric-matrix container, band/block index geometry and norm kernels.

Geometry types use 1-based closed intervals, so ``IndexBlock((1, 4), (5, 8))``
is rows 1..4 by columns 5..8. Conversion to 0-based numpy slices happens only
at the storage boundary (:meth:`IndexBlock.slices`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from ._backend import CONVERGED, STALLED, kernels
from .errors import ArgumentError, NumericError

Interval = tuple[int, int]


# --------------------------------------------------------------------------
# containers
# --------------------------------------------------------------------------


class SymMatrix:
    """Dense real symmetric matrix.

    The stored array is never handed out writable; mutation goes through
    :meth:`set_block`, which writes a block and its mirror image together.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ArgumentError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ArgumentError("matrix is not exactly symmetric")
        a.flags.writeable = False
        self._a = a

    @classmethod
    def zeros(cls, d: int) -> "SymMatrix":
        return cls(np.zeros((d, d)))

    @classmethod
    def symmetrized(cls, entries) -> "SymMatrix":
        """Build from a nearly symmetric array by averaging the two triangles."""
        a = np.asarray(entries, dtype=np.float64)
        return cls(0.5 * (a + a.T))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._a

    def to_numpy(self) -> np.ndarray:
        return self._a.copy()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a if not copy else self._a.copy()
        return self._a.astype(dtype)

    def block(self, blk: "IndexBlock") -> np.ndarray:
        rs, cs = blk.slices()
        return self._a[rs, cs].copy()

    def set_block(self, blk: "IndexBlock", values) -> None:
        """Write ``values`` into ``blk`` and its transpose into the mirror block."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (blk.n_rows, blk.n_cols):
            raise ArgumentError(f"values shape {values.shape} does not match block {blk}")
        if not blk.within(self.dim):
            raise ArgumentError(f"block {blk} outside dimension {self.dim}")
        if blk.rows == blk.cols and not np.array_equal(values, values.T):
            raise ArgumentError("diagonal block values must be symmetric")
        rs, cs = blk.slices()
        a = self._a.copy()
        a[rs, cs] = values
        a[cs, rs] = values.T
        a.flags.writeable = False
        self._a = a

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return np.array_equal(self._a, other._a)

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"


@dataclass(frozen=True)
class IndexBlock:
    """Rectangular block ``rows x cols`` of 1-based closed index intervals."""

    rows: Interval
    cols: Interval

    def __post_init__(self):
        for name, (lo, hi) in (("rows", self.rows), ("cols", self.cols)):
            if lo < 1 or hi < lo:
                raise ArgumentError(f"{name} interval {(lo, hi)} is empty or below 1")

    @property
    def n_rows(self) -> int:
        return self.rows[1] - self.rows[0] + 1

    @property
    def n_cols(self) -> int:
        return self.cols[1] - self.cols[0] + 1

    @property
    def size(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def is_diagonal(self) -> bool:
        return self.rows == self.cols

    def within(self, d: int) -> bool:
        return self.rows[1] <= d and self.cols[1] <= d

    def slices(self) -> tuple[slice, slice]:
        return slice(self.rows[0] - 1, self.rows[1]), slice(self.cols[0] - 1, self.cols[1])

    def transpose(self) -> "IndexBlock":
        return IndexBlock(self.cols, self.rows)

    def intersect(self, other: "IndexBlock") -> Optional["IndexBlock"]:
        r = (max(self.rows[0], other.rows[0]), min(self.rows[1], other.rows[1]))
        c = (max(self.cols[0], other.cols[0]), min(self.cols[1], other.cols[1]))
        if r[1] < r[0] or c[1] < c[0]:
            return None
        return IndexBlock(r, c)


@dataclass(frozen=True)
class RegionMask:
    """Boolean indicator of an index subset of ``[d] x [d]``."""

    dim: int
    membership: np.ndarray = field(compare=False, repr=False)

    def __post_init__(self):
        m = np.array(self.membership, dtype=bool, copy=True)
        if m.shape != (self.dim, self.dim):
            raise ArgumentError(f"mask shape {m.shape} does not match dim {self.dim}")
        m.flags.writeable = False
        object.__setattr__(self, "membership", m)

    @classmethod
    def empty(cls, d: int) -> "RegionMask":
        return cls(d, np.zeros((d, d), dtype=bool))

    @classmethod
    def full(cls, d: int) -> "RegionMask":
        return cls(d, np.ones((d, d), dtype=bool))

    @classmethod
    def from_block(cls, d: int, blk: IndexBlock) -> "RegionMask":
        if not blk.within(d):
            raise ArgumentError(f"block {blk} outside dimension {d}")
        m = np.zeros((d, d), dtype=bool)
        rs, cs = blk.slices()
        m[rs, cs] = True
        return cls(d, m)

    def count(self) -> int:
        return int(self.membership.sum())

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.membership, self.membership.T))

    def transpose(self) -> "RegionMask":
        return RegionMask(self.dim, self.membership.T)

    def __or__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.dim, self.membership | other.membership)

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.dim, self.membership & other.membership)

    def __invert__(self) -> "RegionMask":
        return RegionMask(self.dim, ~self.membership)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RegionMask):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.membership, other.membership)

    def __hash__(self):
        return hash((self.dim, self.membership.tobytes()))


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class BandPartition:
    """Split of ``1..d`` into consecutive intervals of length ``k`` (last may be shorter)."""

    dim: int
    block_size: int

    @property
    def num_blocks(self) -> int:
        return _ceil_div(self.dim, self.block_size)

    def interval(self, l: int) -> Interval:
        if not 1 <= l <= self.num_blocks:
            raise ArgumentError(f"interval index {l} outside 1..{self.num_blocks}")
        k = self.block_size
        return (1 + (l - 1) * k, min(l * k, self.dim))

    @property
    def intervals(self) -> list[Interval]:
        return [self.interval(l) for l in range(1, self.num_blocks + 1)]

    def block(self, l: int, l2: int) -> Optional[IndexBlock]:
        """``B_{k;l,l2}``, or ``None`` when either index is out of range."""
        n = self.num_blocks
        if not (1 <= l <= n and 1 <= l2 <= n):
            return None
        return IndexBlock(self.interval(l), self.interval(l2))

    def diagonal_blocks(self) -> Iterator[IndexBlock]:
        for l in range(1, self.num_blocks + 1):
            yield self.block(l, l)

    def super_blocks(self) -> Iterator[IndexBlock]:
        for l in range(1, self.num_blocks):
            yield self.block(l, l + 1)


def band_partition(d: int, k: int) -> BandPartition:
    if int(d) != d or int(k) != k or d < 1 or k < 1:
        raise ArgumentError(f"d and k must be positive integers, got d={d}, k={k}")
    return BandPartition(int(d), int(k))


def tridiagonal_mask(p: BandPartition) -> RegionMask:
    """Cells of all blocks ``B_{k;l,l'}`` with ``|l - l'| <= 1``."""
    idx = np.arange(p.dim) // p.block_size
    return RegionMask(p.dim, np.abs(idx[:, None] - idx[None, :]) <= 1)


@dataclass(frozen=True)
class GammaRegion:
    """L-shaped increment ``B^m_{l+}`` minus the level-(m-1) block it contains."""

    level: int
    index: int
    block: IndexBlock
    hole: Optional[IndexBlock]

    def local_mask(self) -> np.ndarray:
        """Membership inside ``block`` as a ``n_rows x n_cols`` boolean array."""
        m = np.ones((self.block.n_rows, self.block.n_cols), dtype=bool)
        if self.hole is not None:
            r0, c0 = self.block.rows[0], self.block.cols[0]
            m[self.hole.rows[0] - r0 : self.hole.rows[1] - r0 + 1,
              self.hole.cols[0] - c0 : self.hole.cols[1] - c0 + 1] = False
        return m

    def mask(self, d: int) -> RegionMask:
        m = np.zeros((d, d), dtype=bool)
        rs, cs = self.block.slices()
        m[rs, cs] = self.local_mask()
        return RegionMask(d, m)

    @property
    def size(self) -> int:
        return int(self.local_mask().sum())


@dataclass(frozen=True)
class HierarchicalPartition:
    """Doubling block sizes ``k_m = 2^m k0`` for ``m < max_level`` plus their L-regions."""

    dim: int
    base_size: int
    max_level: int

    def block_size(self, m: int) -> int:
        return (2**m) * self.base_size

    def level(self, m: int) -> BandPartition:
        return BandPartition(self.dim, self.block_size(m))

    def num_blocks(self, m: int) -> int:
        return self.level(m).num_blocks

    def gamma_regions(self, m: int) -> list[GammaRegion]:
        """``Gamma^m_{l+}`` for ``l = 1..N_m - 1`` (the last ``B^m_{l+}`` is empty)."""
        if m < 1:
            raise ArgumentError("L-regions exist only for levels m >= 1")
        cur, prev = self.level(m), self.level(m - 1)
        out = []
        for l in range(1, cur.num_blocks):
            blk = cur.block(l, l + 1)
            inner = prev.block(2 * l, 2 * l + 1)
            hole = blk.intersect(inner) if inner is not None else None
            out.append(GammaRegion(m, l, blk, hole))
        return out

    def all_gamma_regions(self) -> list[GammaRegion]:
        return [g for m in range(1, self.max_level) for g in self.gamma_regions(m)]

    def band_mask(self, m: int) -> RegionMask:
        return tridiagonal_mask(self.level(m))


def hierarchical_partition(d: int, k0: int, n: int, c0: float) -> HierarchicalPartition:
    """Levels stop at ``M = max{m >= 1 : 2^m k0 <= min(c0 n, d)} + 1`` (``M = 1`` if none)."""
    if k0 < 1 or int(k0) != k0:
        raise ArgumentError(f"k0 must be a positive integer, got {k0}")
    if d < k0:
        raise ArgumentError(f"dimension d={d} is smaller than base block size k0={k0}")
    if n < 1 or not c0 > 0:
        raise ArgumentError("n and c0 must be positive")
    cap = min(c0 * n, d)
    top = 0
    while (2 ** (top + 1)) * k0 <= cap:
        top += 1
    return HierarchicalPartition(int(d), int(k0), top + 1)


# --------------------------------------------------------------------------
# restriction and norms
# --------------------------------------------------------------------------


def restrict(m, s: Union[RegionMask, IndexBlock]) -> np.ndarray:
    """Copy of ``m`` with every entry outside ``s`` set to exactly zero."""
    a = np.array(m, dtype=np.float64, copy=True)
    if isinstance(s, IndexBlock):
        if not (s.rows[1] <= a.shape[0] and s.cols[1] <= a.shape[1]):
            raise ArgumentError(f"block {s} does not fit shape {a.shape}")
        keep = np.zeros(a.shape, dtype=bool)
        rs, cs = s.slices()
        keep[rs, cs] = True
    else:
        if a.shape != s.membership.shape:
            raise ArgumentError(f"mask shape {s.membership.shape} does not match {a.shape}")
        keep = s.membership
    a[~keep] = 0.0
    return a


def _as_finite_2d(m) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(m, dtype=np.float64))
    if a.ndim != 2:
        raise ArgumentError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    return a


_RESTART_SEED = 0x5EED


def operator_norm(m, tol: float = 1e-9, max_iter: Optional[int] = None) -> float:
    """Largest singular value.

    Power iteration on the smaller Gram matrix from the all-ones vector,
    stopping on a relative eigen-residual below ``tol``. A start vector in
    the null space is replaced once by a fixed-seed Gaussian vector. If the
    iteration budget (default ``10 * max(shape)``) runs out, the Gram matrix
    is diagonalised by Jacobi instead.
    """
    if not tol > 0:
        raise ArgumentError("tol must be positive")
    a = _as_finite_2d(m)
    if a.size == 0 or not np.any(a):
        return 0.0
    if a.shape[0] < a.shape[1]:
        a = np.ascontiguousarray(a.T)
    c = a.shape[1]
    if max_iter is None:
        max_iter = 10 * max(a.shape)
    lam, _, status = kernels.gram_power_iteration(a, np.ones(c), max_iter, tol)
    if status == STALLED:
        x0 = np.random.default_rng(_RESTART_SEED).standard_normal(c)
        lam, _, status = kernels.gram_power_iteration(a, x0, max_iter, tol)
    if status != CONVERGED:
        w, _ = sym_eigen(a.T @ a)
        lam = w[0]
    return math.sqrt(max(lam, 0.0))


def frobenius_norm(m) -> float:
    a = _as_finite_2d(m)
    return math.sqrt(float(np.sum(a * a)))


def sym_eigen(m, tol: float = 1e-12, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors by cyclic Jacobi.

    Sweeps stop once the off-diagonal Frobenius mass drops below
    ``tol * ||m||_F``.
    """
    a = _as_finite_2d(m)
    if a.shape[0] != a.shape[1]:
        raise ArgumentError(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ArgumentError("matrix is not symmetric")
    a = np.ascontiguousarray(0.5 * (a + a.T))
    w, v, _, converged = kernels.jacobi_eigh(a, tol, max_sweeps)
    if not converged:
        raise NumericError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    order = np.argsort(-np.asarray(w), kind="stable")
    return np.asarray(w)[order], np.asarray(v)[:, order]
