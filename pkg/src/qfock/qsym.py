"""Permutation combinatorics and the q-symmetrizer Gram matrices.

Words of length ``k`` over an alphabet of ``d`` letters are the computational
basis of the ``k``-th tensor level. Internally letters are ``0..d-1`` and
words are ranked lexicographically with the first letter most significant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "QFockError",
    "BudgetExceeded",
    "DenseCapExceeded",
    "NotPositiveDefinite",
    "Permutation",
    "GramLevel",
    "inversion_count",
    "word_array",
    "word_ranks",
    "pq_dense",
    "pq_factored",
    "pq_apply",
    "gram_sqrt",
    "gram_extrema",
    "dump_gram_csv",
]

DEFAULT_ENUM_BUDGET = 50_000_000
DEFAULT_DENSE_CAP = 2500
EIG_FLOOR_REL = 1e-12


class QFockError(Exception):
    """Base class for errors raised by qfock."""


class BudgetExceeded(QFockError):
    """The k!·d^k permutation enumeration is larger than allowed."""


class DenseCapExceeded(QFockError, MemoryError):
    """A dense level matrix would exceed the configured dimension cap."""


class NotPositiveDefinite(QFockError):
    """A Gram matrix has an eigenvalue below the relative floor."""


@dataclass(frozen=True)
class Permutation:
    """A permutation of ``1..k`` in one-line form ``(σ(1), ..., σ(k))``."""

    images: tuple

    def __post_init__(self):
        images = tuple(int(x) for x in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValueError(f"not a permutation of 1..{len(images)}: {images}")
        object.__setattr__(self, "images", images)

    @property
    def k(self) -> int:
        return len(self.images)

    def compose(self, other: "Permutation") -> "Permutation":
        """Return ``self ∘ other``, i.e. ``a ↦ self(other(a))``."""
        if other.k != self.k:
            raise ValueError("permutations act on different sets")
        return Permutation(tuple(self.images[b - 1] for b in other.images))

    def reversed(self) -> "Permutation":
        """One-line form read backwards (``σ ∘ w0`` with ``w0`` the reversal)."""
        return Permutation(self.images[::-1])

    @classmethod
    def identity(cls, k: int) -> "Permutation":
        return cls(tuple(range(1, k + 1)))


def inversion_count(p: Permutation | Sequence[int]) -> int:
    """Number of pairs ``a < b`` with ``σ(b) < σ(a)``."""
    images = p.images if isinstance(p, Permutation) else tuple(p)
    k = len(images)
    return sum(1 for a in range(k) for b in range(a + 1, k) if images[b] < images[a])


def word_array(k: int, d: int) -> np.ndarray:
    """All words of length ``k`` over ``0..d-1``, one per row, in rank order."""
    n = d**k
    ranks = np.arange(n, dtype=np.int64)
    out = np.empty((n, k), dtype=np.int64)
    for pos in range(k):
        out[:, pos] = (ranks // d ** (k - 1 - pos)) % d
    return out


def word_ranks(words: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`word_array` (row-wise base-``d`` positional value)."""
    words = np.asarray(words, dtype=np.int64)
    k = words.shape[-1]
    powers = d ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return words @ powers


@dataclass(frozen=True, eq=False)
class GramLevel:
    """The matrix of ``P_q^k`` on level ``k`` of the ``d``-letter tensor algebra."""

    k: int
    d: int
    q: float
    matrix: np.ndarray
    sqrt: Optional[np.ndarray] = None
    inv_sqrt: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _check_q(q: float) -> float:
    q = float(q)
    if not -1.0 < q < 1.0:
        raise ValueError(f"q must satisfy |q| < 1, got q={q}")
    return q


def pq_dense(k: int, d: int, q: float, budget: int = DEFAULT_ENUM_BUDGET) -> GramLevel:
    """Build ``P_q^k`` by summing ``q^{i(σ)}`` over all of ``S_k``.

    Entry ``(v, w)`` collects every ``σ`` with ``w∘σ = v``. Permutations are
    visited in order of increasing inversion count, so entries ``(v, w)`` and
    ``(w, v)`` receive identical summands in identical order and the result is
    symmetric bit for bit.
    """
    q = _check_q(q)
    n = d**k
    cost = math.factorial(k) * n
    if cost > budget:
        raise BudgetExceeded(
            f"pq_dense(k={k}, d={d}) needs k!·d^k = {cost} > budget {budget}; use pq_factored"
        )
    words = word_array(k, d)
    cols = np.arange(n)
    perms = sorted(itertools.permutations(range(k)), key=inversion_count)
    qx = np.longdouble(q)
    matrix = np.zeros((n, n), dtype=np.longdouble)
    for perm in perms:
        rows = word_ranks(words[:, list(perm)], d) if k else np.zeros(1, dtype=np.int64)
        # w -> w∘σ is a bijection of words, so there are no repeated (row, col) pairs
        matrix[rows, cols] += qx ** inversion_count(perm)
    return GramLevel(k, d, q, matrix.astype(float))


def _front_moves(k: int, d: int) -> list[np.ndarray]:
    """``idx[j][w]`` = rank of ``w`` with its ``j``-th letter moved to the front."""
    words = word_array(k, d)
    out = []
    for j in range(k):
        order = [j] + [p for p in range(k) if p != j]
        out.append(word_ranks(words[:, order], d))
    return out


def pq_factored(k: int, d: int, q: float, dense_cap: int = DEFAULT_DENSE_CAP) -> GramLevel:
    """Build ``P_q^k`` by the recursion ``P_k = (1 ⊗ P_{k-1}) R_k``.

    ``R_k = Σ_j q^{j-1} Π_j`` where ``Π_j`` moves the ``j``-th tensor factor
    to the front. Cost is ``O(k · d^{2k})`` per level instead of ``k! · d^k``.
    Only the upper triangle of the recursion output is kept and mirrored, so
    the stored matrix is exactly symmetric. Both constructions accumulate in
    extended precision and round once at the end.
    """
    q = _check_q(q)
    if d**k > dense_cap:
        raise DenseCapExceeded(f"level dimension d^k = {d**k} exceeds dense cap {dense_cap}")
    qx = np.longdouble(q)
    P = np.ones((1, 1), dtype=np.longdouble)
    for level in range(1, k + 1):
        block = np.kron(np.eye(d, dtype=np.longdouble), P)
        M = np.zeros_like(block)
        for j, idx in enumerate(_front_moves(level, d)):
            M += qx**j * block[:, idx]
        P = np.triu(M) + np.triu(M, 1).T
    return GramLevel(k, d, q, P.astype(float))


def pq_apply(x: np.ndarray, k: int, d: int, q: float) -> np.ndarray:
    """Apply ``P_q^k`` to ``x`` (shape ``(d^k,)`` or ``(d^k, b)``) without forming it."""
    x = np.asarray(x, dtype=float)
    vec = x.ndim == 1
    X = x.reshape(d**k, -1)
    out = _pq_apply(X, k, d, q)
    return out.ravel() if vec else out


def _pq_apply(X: np.ndarray, k: int, d: int, q: float) -> np.ndarray:
    if k <= 1 or q == 0.0:
        return X.copy()
    b = X.shape[1]
    T = X.reshape((d,) * k + (b,))
    # R_k: the coefficient tensor of Π_j x is x with axis j moved to the front
    Y = T.copy()
    for j in range(1, k):
        Y += q**j * np.moveaxis(T, j, 0)
    # 1 ⊗ P_{k-1} on the trailing k-1 factors
    Y = Y.reshape(d, d ** (k - 1), b).transpose(1, 0, 2).reshape(d ** (k - 1), d * b)
    Y = _pq_apply(Y, k - 1, d, q)
    return Y.reshape(d ** (k - 1), d, b).transpose(1, 0, 2).reshape(d**k, b)


def gram_sqrt(g: GramLevel, floor: float = EIG_FLOOR_REL) -> GramLevel:
    """Return a copy of ``g`` with the symmetric square root and its inverse."""
    w, V = np.linalg.eigh(g.matrix)
    if not w[0] > floor * w[-1]:
        raise NotPositiveDefinite(
            f"P_q^{g.k} (d={g.d}, q={g.q}) has min eigenvalue {w[0]:.3e} <= {floor:g}·max"
        )
    root = np.sqrt(w)
    sqrt = (V * root) @ V.T
    inv_sqrt = (V / root) @ V.T
    return replace(g, sqrt=sqrt, inv_sqrt=inv_sqrt)


def gram_extrema(g: GramLevel) -> tuple[float, float]:
    w = np.linalg.eigvalsh(g.matrix)
    return float(w[0]), float(w[-1])


def dump_gram_csv(g: GramLevel, path: str | Path) -> None:
    """Write the Gram matrix row-major as CSV after a ``# k,d,q`` comment line."""
    with open(path, "w") as fh:
        fh.write(f"# k,d,q = {g.k},{g.d},{g.q!r}\n")
        np.savetxt(fh, g.matrix, delimiter=",", fmt="%.17g")
