"""Wick operators, their right versions, the vacuum trace and the averaging map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import (
    FockOperator,
    FockVector,
    InsufficientTruncation,
    TruncatedFock,
    compose,
    conjugation,
    field,
    identity,
    modular_conjugation,
    q_inner,
)
from .qsym import QFockError

__all__ = [
    "WickOperator",
    "wick",
    "wick_word",
    "wick_star",
    "right_wick",
    "reverse",
    "trace",
    "phi_m",
    "three_summands",
]


@dataclass(eq=False)
class WickOperator:
    xi: FockVector
    side: str
    op: FockOperator
    k: int


def _degree(xi: FockVector) -> int:
    support = xi.support()
    if len(support) > 1:
        raise ValueError(f"symbol must sit on a single level, found levels {support}")
    return support[0] if support else 0


def _field_cached(space: TruncatedFock, j: int) -> FockOperator:
    key = ("field", j)
    if key not in space._cache:
        e = np.zeros(space.D)
        e[j] = 1.0
        space._cache[key] = field(space, e)
    return space._cache[key]


def wick_word(space: TruncatedFock, word: tuple) -> FockOperator:
    """``W(e_w)`` for a 0-based word, by ``W(e_j ⊗ η) = s(e_j) W(η) − W(l*(e_j) η)``.

    Results are memoised on the space.
    """
    word = tuple(int(x) for x in word)
    if len(word) > space.N:
        raise InsufficientTruncation(f"Wick degree {len(word)} exceeds N={space.N}")
    key = ("wick", word)
    cache = space._cache
    if key in cache:
        return cache[key]
    if not word:
        op = identity(space)
    elif len(word) == 1:
        op = _field_cached(space, word[0])
    else:
        j, rest = word[0], word[1:]
        op = compose(_field_cached(space, j), wick_word(space, rest))
        for p, letter in enumerate(rest):
            if letter == j:
                op = op - space.q**p * wick_word(space, rest[:p] + rest[p + 1:])
    cache[key] = op
    return op


def _linear_wick(xi: FockVector) -> FockOperator:
    space = xi.space
    k = _degree(xi)
    if k > space.N:
        raise InsufficientTruncation(f"level {k} exceeds N={space.N}")
    coeffs = xi.level(k)
    words = space.words(k)
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return 0.0 * wick_word(space, tuple(words[0]))
    op = None
    for r in nz:
        term = float(coeffs[r]) * wick_word(space, tuple(words[r]))
        op = term if op is None else op + term
    return op


def wick(xi: FockVector) -> WickOperator:
    """The left Wick operator ``W(ξ)`` with ``W(ξ) Ω = ξ``."""
    return WickOperator(xi, "left", _linear_wick(xi), _degree(xi))


def reverse(xi: FockVector) -> FockVector:
    """``ξ*``: the levelwise word reversal, ``ξ_k ⊗ ... ⊗ ξ_1``."""
    return modular_conjugation(xi)


def wick_star(xi: FockVector) -> WickOperator:
    """``W(ξ)* = W(ξ*)``, realised through the reversed symbol."""
    rev = reverse(xi)
    return WickOperator(rev, "left", _linear_wick(rev), _degree(xi))


def right_wick(xi: FockVector) -> WickOperator:
    """``W(ξ)^op = J W(ξ*) J``, so that ``W(ξ)^op Ω = ξ``."""
    space = xi.space
    J = space._cache.get("J")
    if J is None:
        J = space._cache["J"] = conjugation(space)
    op = compose(compose(J, _linear_wick(reverse(xi))), J)
    return WickOperator(xi, "right", op, _degree(xi))


def trace(A: FockOperator) -> float:
    """Vacuum state ``τ(A) = ⟨A Ω, Ω⟩_q``."""
    if A.exact_window < 0:
        raise InsufficientTruncation("operator is not exact on the vacuum")
    omega = A.space.vacuum()
    return q_inner(A.apply(omega), omega)


def _sandwich_sum(X: FockOperator, indices) -> FockOperator:
    space = X.space
    total = None
    for i in sorted(indices):
        s = _field_cached(space, i)
        term = compose(compose(s, X), s)
        total = term if total is None else total + term
    return total


def phi_m(A: FockOperator, m: int) -> FockOperator:
    """``Φ_m(A) = (1/m) Σ_{i<=m} W(e_i) A W(e_i)`` over the first ``m`` letters."""
    space = A.space
    if not 1 <= m <= space.D:
        raise ValueError(f"need 1 <= m <= D={space.D}, got m={m}")
    out = (1.0 / m) * _sandwich_sum(A, range(m))
    if out.exact_window < 0:
        raise InsufficientTruncation(
            f"Φ_m leaves no exact window (input window {A.exact_window}, N={space.N})"
        )
    return out


def three_summands(xi: FockVector, m: int, d: int) -> tuple:
    """Split ``Φ_m(W(ξ))`` for ``ξ`` over letters ``1..d``, ``d < m``.

    Returns ``(T1, T2, T3)`` with ``T1 = (1/m) Σ_{i<=d} W(e_i) W(ξ) W(e_i)``,
    ``T2 = ((m-d)/m) q^n W(ξ)`` and ``T3 = (1/m) Σ_{d<i<=m} W(e_i ⊗ ξ ⊗ e_i)``.
    """
    space = xi.space
    if not d < m <= space.D:
        raise ValueError(f"need d < m <= D, got d={d}, m={m}, D={space.D}")
    n = _degree(xi)
    T = xi.level_tensor(n)
    for axis in range(n):
        idx = [slice(None)] * n
        idx[axis] = slice(d, None)
        if np.any(T[tuple(idx)]):
            raise ValueError(f"symbol uses letters above d={d}")
    if n + 2 > space.N:
        raise InsufficientTruncation(f"W(e_i ⊗ ξ ⊗ e_i) needs N >= {n + 2}")
    X = _linear_wick(xi)
    T1 = (1.0 / m) * _sandwich_sum(X, range(d))
    T2 = ((m - d) / m) * space.q**n * X
    T3 = None
    for i in range(d, m):
        big = np.zeros((space.D,) * (n + 2))
        big[(i,) + (slice(None),) * n + (i,)] = T
        term = _linear_wick(space.from_level(n + 2, big))
        T3 = term if T3 is None else T3 + term
    T3 = (1.0 / m) * T3
    return T1, T2, T3
