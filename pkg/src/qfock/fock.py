"""Truncated q-Fock space over a ``D``-letter one-particle space.

Vectors and operators live on the flat concatenation of levels ``0..N``. An
operator keeps a record of which of its level blocks coincide with the
untruncated operator, from which its exact window is read off.

Public word and letter APIs are 1-based (``e_1 .. e_D``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .qsym import (
    DEFAULT_DENSE_CAP,
    DEFAULT_ENUM_BUDGET,
    EIG_FLOOR_REL,
    DenseCapExceeded,
    GramLevel,
    QFockError,
    gram_sqrt,
    pq_apply,
    pq_factored,
    word_array,
    word_ranks,
)

__all__ = [
    "QContext",
    "TruncatedFock",
    "FockVector",
    "FockOperator",
    "InsufficientTruncation",
    "q_inner",
    "identity",
    "creation",
    "annihilation",
    "field",
    "conjugation",
    "modular_conjugation",
    "q_adjoint",
    "apply",
    "compose",
    "window_residual",
]


_ADJOINT_CHUNK = 512


class InsufficientTruncation(QFockError):
    """The level cap is too small for the requested computation to be exact."""


@dataclass(frozen=True)
class QContext:
    q: float
    tol_identity: float = 1e-10
    tol_eig: float = EIG_FLOOR_REL
    dense_cap: int = DEFAULT_DENSE_CAP
    enum_budget: int = DEFAULT_ENUM_BUDGET

    def __post_init__(self):
        q = float(self.q)
        if not -1.0 < q < 1.0:
            raise ValueError(f"q must satisfy |q| < 1, got q={q}")
        object.__setattr__(self, "q", q)


class TruncatedFock:
    """Levels ``0..N`` of the q-Fock space of ``R^D``.

    Gram data is built lazily per level and cached: dense for levels of
    dimension at most ``ctx.dense_cap``, applied matrix-free above it.
    """

    def __init__(self, D: int, N: int, ctx: QContext | float):
        if D < 1 or N < 0:
            raise ValueError(f"need D >= 1 and N >= 0, got D={D}, N={N}")
        self.D = int(D)
        self.N = int(N)
        self.ctx = ctx if isinstance(ctx, QContext) else QContext(ctx)
        self.dims = [self.D**k for k in range(self.N + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(np.int64)
        self.dim = int(self.offsets[-1])
        self._grams: dict[int, GramLevel] = {}
        self._solvers: dict[int, tuple] = {}
        self._words: dict[int, np.ndarray] = {}
        self._rev: dict[int, np.ndarray] = {}
        self._cache: dict = {}

    @property
    def q(self) -> float:
        return self.ctx.q

    def __repr__(self):
        return f"TruncatedFock(D={self.D}, N={self.N}, q={self.q})"

    def compatible(self, other: "TruncatedFock") -> bool:
        return self is other or (
            self.D == other.D and self.N == other.N and self.q == other.q
        )

    def level_slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def words(self, k: int) -> np.ndarray:
        if k not in self._words:
            self._words[k] = word_array(k, self.D)
        return self._words[k]

    # -- word basis -------------------------------------------------------

    def word_index(self, word: Sequence[int]) -> int:
        """Rank of a word with letters in ``1..D`` within its level."""
        letters = np.asarray(word, dtype=np.int64) - 1
        if letters.size and (letters.min() < 0 or letters.max() >= self.D):
            raise ValueError(f"letters must lie in 1..{self.D}: {tuple(word)}")
        return int(word_ranks(letters, self.D)) if letters.size else 0

    def unrank(self, k: int, rank: int) -> tuple:
        if not 0 <= rank < self.D**k:
            raise ValueError(f"rank {rank} out of range for level {k} (D={self.D})")
        return tuple(int(x) + 1 for x in self.words(k)[rank])

    def reversal_index(self, k: int) -> np.ndarray:
        """``idx[r]`` = rank of the reversal of the word of rank ``r``."""
        if k not in self._rev:
            self._rev[k] = word_ranks(self.words(k)[:, ::-1], self.D) if k else np.zeros(1, np.int64)
        return self._rev[k]

    # -- vectors ----------------------------------------------------------

    def zeros(self) -> "FockVector":
        return FockVector(self, np.zeros(self.dim))

    def vacuum(self) -> "FockVector":
        v = self.zeros()
        v.coeffs[0] = 1.0
        return v

    def tensor(self, *letters: int) -> "FockVector":
        """Basis vector ``e_{l1} ⊗ ... ⊗ e_{lk}`` (``tensor()`` is the vacuum)."""
        k = len(letters)
        if k > self.N:
            raise InsufficientTruncation(f"level {k} exceeds N={self.N}")
        v = self.zeros()
        v.coeffs[self.offsets[k] + self.word_index(letters)] = 1.0
        return v

    def from_level(self, k: int, coeffs: np.ndarray) -> "FockVector":
        """Vector concentrated on level ``k`` with the given word coefficients.

        ``coeffs`` may be flat (length ``D^k``) or a ``(D,)*k`` tensor.
        """
        if k > self.N:
            raise InsufficientTruncation(f"level {k} exceeds N={self.N}")
        v = self.zeros()
        v.coeffs[self.level_slice(k)] = np.asarray(coeffs, dtype=float).ravel()
        return v

    def embed_level(self, k: int, coeffs: np.ndarray, d: int) -> "FockVector":
        """Embed a level-``k`` tensor over letters ``1..d`` (``d <= D``)."""
        if d > self.D:
            raise ValueError(f"alphabet {d} larger than D={self.D}")
        T = np.asarray(coeffs, dtype=float).reshape((d,) * k)
        full = np.zeros((self.D,) * k)
        full[(slice(0, d),) * k] = T
        return self.from_level(k, full)

    def one_particle(self, j: int) -> np.ndarray:
        """The unit one-particle vector ``e_j`` as a length-``D`` array."""
        if not 1 <= j <= self.D:
            raise ValueError(f"letter {j} outside 1..{self.D}")
        e = np.zeros(self.D)
        e[j - 1] = 1.0
        return e

    # -- Gram data --------------------------------------------------------

    def gram(self, k: int) -> GramLevel:
        """Dense ``P_q^k`` for this space (with square roots), cached."""
        if k not in self._grams:
            g = pq_factored(k, self.D, self.q, dense_cap=self.ctx.dense_cap)
            self._grams[k] = gram_sqrt(g, floor=self.ctx.tol_eig)
        return self._grams[k]

    def is_dense_level(self, k: int) -> bool:
        return self.dims[k] <= self.ctx.dense_cap

    def gram_apply_level(self, k: int, x: np.ndarray) -> np.ndarray:
        if k <= 1 or self.q == 0.0:
            return np.array(x, dtype=float, copy=True)
        if self.is_dense_level(k):
            return self.gram(k).matrix @ x
        return pq_apply(x, k, self.D, self.q)

    def gram_apply(self, x: np.ndarray, levels: Optional[Iterable[int]] = None) -> np.ndarray:
        """Apply the block-diagonal Gram to a flat vector or a stack of columns.

        Only ``levels`` (default: all) are touched; other rows come back zero.
        Levels where ``x`` vanishes are skipped.
        """
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(self.N + 1) if levels is None else levels:
            sl = self.level_slice(k)
            block = x[sl]
            if np.any(block):
                out[sl] = self.gram_apply_level(k, block)
        return out

    def _solver(self, k: int):
        if k not in self._solvers:
            self._solvers[k] = scipy.linalg.cho_factor(self.gram(k).matrix)
        return self._solvers[k]

    def gram_solve_level(self, k: int, x: np.ndarray) -> np.ndarray:
        """Solve ``P_q^k y = x``; Cholesky when dense, conjugate gradients above the cap."""
        if k <= 1 or self.q == 0.0:
            return np.array(x, dtype=float, copy=True)
        if self.is_dense_level(k):
            return scipy.linalg.cho_solve(self._solver(k), x)
        n = self.dims[k]
        op = spla.LinearOperator((n, n), matvec=lambda v: pq_apply(v, k, self.D, self.q), dtype=float)
        cols = x.reshape(n, -1)
        out = np.empty_like(cols)
        for c in range(cols.shape[1]):
            sol, info = spla.cg(op, cols[:, c], rtol=1e-14, atol=0.0, maxiter=10 * n)
            if info != 0:
                raise QFockError(f"CG did not converge on level {k} (info={info})")
            out[:, c] = sol
        return out.reshape(x.shape)

    def gram_solve(self, x: np.ndarray, levels: Optional[Iterable[int]] = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(self.N + 1) if levels is None else levels:
            sl = self.level_slice(k)
            if np.any(x[sl]):
                out[sl] = self.gram_solve_level(k, x[sl])
        return out

    def gram_blockdiag(self, power: str = "matrix") -> sp.csr_matrix:
        """Sparse block-diagonal matrix of the per-level ``matrix``, ``inv``, ``sqrt`` or ``inv_sqrt``."""
        blocks = []
        for k in range(self.N + 1):
            g = self.gram(k)
            if power == "matrix":
                blocks.append(g.matrix)
            elif power == "inv":
                blocks.append(g.inv_sqrt @ g.inv_sqrt)
            elif power == "sqrt":
                blocks.append(g.sqrt)
            elif power == "inv_sqrt":
                blocks.append(g.inv_sqrt)
            else:
                raise ValueError(power)
        return sp.block_diag(blocks, format="csr")


@dataclass(eq=False)
class FockVector:
    space: TruncatedFock
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got {self.coeffs.shape}")

    def level(self, k: int) -> np.ndarray:
        return self.coeffs[self.space.level_slice(k)]

    def level_tensor(self, k: int) -> np.ndarray:
        return self.level(k).reshape((self.space.D,) * k)

    def support(self) -> list[int]:
        return [k for k in range(self.space.N + 1) if np.any(self.level(k))]

    def top_level(self) -> int:
        s = self.support()
        return s[-1] if s else -1

    def norm(self) -> float:
        return float(np.sqrt(max(q_inner(self, self), 0.0)))

    def _check(self, other: "FockVector"):
        if not self.space.compatible(other.space):
            raise ValueError(f"vectors from different spaces: {self.space} vs {other.space}")

    def __add__(self, other):
        self._check(other)
        return FockVector(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return FockVector(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return FockVector(self.space, self.coeffs * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return FockVector(self.space, -self.coeffs)

    def to_json(self) -> str:
        s = self.space
        levels = [{"k": k, "coeffs": self.level(k).tolist()} for k in range(s.N + 1)]
        return json.dumps({"levels": levels, "D": s.D, "N": s.N, "q": s.q})

    @classmethod
    def from_json(cls, text: str, space: Optional[TruncatedFock] = None) -> "FockVector":
        data = json.loads(text)
        if space is None:
            space = TruncatedFock(data["D"], data["N"], data["q"])
        elif (space.D, space.N, space.q) != (data["D"], data["N"], data["q"]):
            raise ValueError("JSON vector does not match the given space")
        v = space.zeros()
        for entry in data["levels"]:
            v.coeffs[space.level_slice(entry["k"])] = entry["coeffs"]
        return v


def q_inner(u: FockVector, v: FockVector) -> float:
    """``Σ_k ⟨P_q^k u_k, v_k⟩``."""
    u._check(v)
    s = u.space
    total = 0.0
    for k in range(s.N + 1):
        uk, vk = u.level(k), v.level(k)
        if np.any(uk) and np.any(vk):
            total += float(s.gram_apply_level(k, uk) @ vk)
    return total


def _reach(N: int, band: int) -> np.ndarray:
    lev = np.arange(N + 1)
    return np.abs(lev[:, None] - lev[None, :]) <= band


@dataclass(eq=False)
class FockOperator:
    """A truncated operator on levels ``0..N``.

    ``exact[t, s]`` marks level blocks equal to the untruncated block.
    ``lost[s]`` marks source levels that the untruncated operator sends
    partly above ``N``; ``incoming[t]`` marks target levels that receive
    contributions from above ``N``. ``band`` bounds the level shift.
    """

    space: TruncatedFock
    matrix: sp.csr_matrix
    band: int
    exact: np.ndarray
    lost: np.ndarray
    incoming: np.ndarray

    def __post_init__(self):
        # blocks beyond the band are zero in the truncation and in the full operator
        self.exact = self.exact | ~_reach(self.space.N, self.band)

    @property
    def exact_window(self) -> int:
        """Highest ``w`` such that the operator is exact on all levels ``<= w`` (``-1`` if none)."""
        good = ~self.lost & self.exact.all(axis=0)
        bad = np.flatnonzero(~good)
        return int(bad[0]) - 1 if bad.size else self.space.N

    def block(self, t: int, s: int):
        sp_ = self.space
        return self.matrix[sp_.level_slice(t), sp_.level_slice(s)]

    def apply(self, v: FockVector) -> FockVector:
        return apply(self, v)

    def window_columns(self, window: Optional[int] = None) -> int:
        w = self.exact_window if window is None else window
        return int(self.space.offsets[w + 1])

    def _check(self, other: "FockOperator"):
        if not self.space.compatible(other.space):
            raise ValueError(f"operators from different spaces: {self.space} vs {other.space}")

    def __matmul__(self, other):
        return compose(self, other)

    def __add__(self, other):
        self._check(other)
        return FockOperator(
            self.space,
            (self.matrix + other.matrix).tocsr(),
            max(self.band, other.band),
            self.exact & other.exact,
            self.lost | other.lost,
            self.incoming | other.incoming,
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        return FockOperator(
            self.space, (self.matrix * float(c)).tocsr(), self.band,
            self.exact.copy(), self.lost.copy(), self.incoming.copy(),
        )

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self


def _exact_op(space: TruncatedFock, matrix, band: int, lost=(), incoming=()) -> FockOperator:
    n = space.N + 1
    lost_mask = np.zeros(n, bool)
    lost_mask[list(lost)] = True
    inc_mask = np.zeros(n, bool)
    inc_mask[list(incoming)] = True
    return FockOperator(space, sp.csr_matrix(matrix), band, np.ones((n, n), bool), lost_mask, inc_mask)


def identity(space: TruncatedFock) -> FockOperator:
    return _exact_op(space, sp.identity(space.dim, format="csr"), 0)


def apply(A: FockOperator, v: FockVector) -> FockVector:
    if not A.space.compatible(v.space):
        raise ValueError(f"operator on {A.space} applied to vector on {v.space}")
    return FockVector(v.space, A.matrix @ v.coeffs)


def compose(A: FockOperator, B: FockOperator) -> FockOperator:
    """The product ``A B`` with exactness tracked blockwise."""
    A._check(B)
    N = A.space.N
    reach_b = _reach(N, B.band)  # (r, s): B may connect s -> r
    reach_a = _reach(N, A.band)  # (t, r)
    bad_a = ((~A.exact).astype(int) @ reach_b.astype(int)) > 0
    bad_b = (reach_b & ~B.exact).any(axis=0)
    exact = ~bad_a & ~bad_b[None, :] & ~(A.incoming[:, None] & B.lost[None, :])
    lost = B.lost | (reach_b & A.lost[:, None]).any(axis=0)
    incoming = A.incoming | (reach_a & B.incoming[None, :]).any(axis=1)
    return FockOperator(A.space, (A.matrix @ B.matrix).tocsr(), A.band + B.band, exact, lost, incoming)


def _one_particle(space: TruncatedFock, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.shape != (space.D,):
        raise ValueError(f"one-particle vector must have length D={space.D}")
    return xi


def creation(space: TruncatedFock, xi) -> FockOperator:
    """``l(ξ) η = ξ ⊗ η``; the top level is mapped to zero."""
    xi = _one_particle(space, xi)
    D = space.D
    rows, cols, vals = [], [], []
    for k in range(space.N):
        n = D**k
        src = np.arange(n)
        for j in np.flatnonzero(xi):
            rows.append(space.offsets[k + 1] + j * n + src)
            cols.append(space.offsets[k] + src)
            vals.append(np.full(n, xi[j]))
    M = _coo(space, rows, cols, vals)
    return _exact_op(space, M, 1, lost=[space.N])


def _annihilation_contraction(space: TruncatedFock, xi) -> sp.csr_matrix:
    """``l*(ξ) e_w = Σ_i q^{i-1} ⟨ξ, e_{w_i}⟩ e_{w without letter i}``."""
    D, q = space.D, space.q
    rows, cols, vals = [], [], []
    for k in range(1, space.N + 1):
        W = space.words(k)
        src = space.offsets[k] + np.arange(D**k)
        for p in range(k):
            weight = xi[W[:, p]] * q**p
            keep = weight != 0
            if not keep.any():
                continue
            rest = np.delete(W[keep], p, axis=1)
            tgt = word_ranks(rest, D) if k > 1 else np.zeros(int(keep.sum()), np.int64)
            rows.append(space.offsets[k - 1] + tgt)
            cols.append(src[keep])
            vals.append(weight[keep])
    return _coo(space, rows, cols, vals)


def annihilation(space: TruncatedFock, xi, method: str = "contraction") -> FockOperator:
    """``l*(ξ)``, the q-adjoint of :func:`creation`.

    ``method="contraction"`` builds the sparse weighted-contraction matrix,
    ``method="adjoint"`` Gram-conjugates the creation matrix (dense levels only).
    Both describe the same operator.
    """
    xi = _one_particle(space, xi)
    if method == "adjoint":
        return q_adjoint(creation(space, xi))
    if method != "contraction":
        raise ValueError(f"unknown method {method!r}")
    return _exact_op(space, _annihilation_contraction(space, xi), 1, incoming=[space.N])


def field(space: TruncatedFock, xi) -> FockOperator:
    """The q-Gaussian ``s(ξ) = l(ξ) + l*(ξ)``."""
    return creation(space, xi) + annihilation(space, xi)


def _coo(space, rows, cols, vals) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((space.dim, space.dim))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.dim, space.dim),
    )


def conjugation(space: TruncatedFock) -> FockOperator:
    """The modular conjugation ``J`` (levelwise word reversal) as an operator."""
    perm = np.concatenate(
        [space.offsets[k] + space.reversal_index(k) for k in range(space.N + 1)]
    )
    M = sp.csr_matrix((np.ones(space.dim), (perm, np.arange(space.dim))), shape=(space.dim,) * 2)
    return _exact_op(space, M, 0)


def modular_conjugation(v: FockVector) -> FockVector:
    s = v.space
    out = s.zeros()
    for k in range(s.N + 1):
        out.coeffs[s.level_slice(k)] = v.level(k)[s.reversal_index(k)]
    return out


def q_adjoint(A: FockOperator) -> FockOperator:
    """Adjoint for ``⟨·,·⟩_q``: block ``(s, t)`` is ``G_s^{-1} A_{t,s}^T G_t``."""
    s = A.space
    rhs = (A.matrix.T @ s.gram_blockdiag("matrix")).tocsc()
    # levelwise Cholesky solves are markedly more accurate than the explicit inverse
    chunks = []
    for start in range(0, s.dim, _ADJOINT_CHUNK):
        cols = rhs[:, start:start + _ADJOINT_CHUNK].toarray()
        chunks.append(sp.csc_matrix(s.gram_solve(cols)))
    mat = sp.hstack(chunks, format="csr")
    return FockOperator(s, mat, A.band, A.exact.T.copy(), A.incoming.copy(), A.lost.copy())


def window_residual(A: FockOperator, B: FockOperator, window: Optional[int] = None) -> float:
    """Max coefficient difference of ``A`` and ``B`` on source levels ``<= window``.

    Defaults to the joint exact window of the two operators.
    """
    A._check(B)
    w = min(A.exact_window, B.exact_window) if window is None else window
    if w < 0:
        raise InsufficientTruncation("operators share no exact window")
    n = int(A.space.offsets[w + 1])
    diff = (A.matrix[:, :n] - B.matrix[:, :n]).tocoo()
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0
