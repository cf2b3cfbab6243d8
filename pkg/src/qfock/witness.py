"""Akemann-Ostrand witness quantities on truncated q-Fock spaces.

All norms here are norms of truncated operators restricted to their exact
window, hence lower bounds for the untruncated norms. Every inequality that
is checked against an upper bound is therefore one-sided and sound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .fock import (
    FockOperator,
    FockVector,
    InsufficientTruncation,
    TruncatedFock,
    q_inner,
    window_residual,
)
from .qsym import DenseCapExceeded, QFockError, gram_sqrt, pq_factored, word_array
from .wick import phi_m, right_wick, three_summands, trace, wick, wick_star, wick_word

__all__ = [
    "NormNotConverged",
    "PreconditionError",
    "InvariantSubspace",
    "WitnessReport",
    "cq",
    "nou_bound",
    "build_invariant_subspace",
    "pairing_identity",
    "witness_vectors",
    "witness_operator",
    "operator_norm",
    "restricted_witness_norm",
    "witness_pairing",
    "tensor_min_norm",
    "crossover_predicate",
    "crossover_k",
    "ao_witness_report",
    "phi_flow",
    "trace_collapse",
]

GS_DROP_TOL = 1e-10
VERDICT_TOL = 1e-9
CROSSOVER_K_MAX = 10**6
DENSE_NORM_CAP = 6000
_START_SEED = 20240601


class NormNotConverged(QFockError):
    """Power iteration hit its iteration limit; ``estimate`` holds the last value."""

    def __init__(self, estimate: float, iterations: int):
        super().__init__(f"power iteration not converged after {iterations} steps (estimate {estimate!r})")
        self.estimate = estimate


class PreconditionError(QFockError, ValueError):
    pass


# -- constants ------------------------------------------------------------


def cq(q: float, tail_tol: float = 1e-12) -> float:
    """Partial product of ``Π_i (1 - q^i)^{-1}``.

    Stops at the first ``I`` whose tail bound
    ``log Π_{i>I} <= |q|^{I+1} / ((1-|q|)(1-|q|^{I+1}))`` moves the product by
    less than ``tail_tol`` (relative).
    """
    q = float(q)
    if not -1.0 < q < 1.0:
        raise ValueError(f"q must satisfy |q| < 1, got q={q}")
    if q == 0.0:
        return 1.0
    a = abs(q)
    prod, i = 1.0, 0
    while True:
        i += 1
        prod /= 1.0 - q**i
        tail = a ** (i + 1) / ((1.0 - a) * (1.0 - a ** (i + 1)))
        if math.expm1(tail) < tail_tol:
            return prod


def nou_bound(q: float, k: int, d: int) -> float:
    """``C_q^3 (k+1)^2 d^{k/2}``."""
    return cq(q) ** 3 * (k + 1) ** 2 * d ** (k / 2)


def _log_nou_bound(q: float, k: int, d: int) -> float:
    return 3 * math.log(cq(q)) + 2 * math.log(k + 1) + 0.5 * k * math.log(d)


# -- invariant subspaces --------------------------------------------------


@dataclass(eq=False)
class InvariantSubspace:
    """q-orthonormal basis of the truncation of ``span{b f_i c}``, ``f_i = e_{d+i}``."""

    space: TruncatedFock
    i: int
    d: int
    level_cap: int
    matrix: np.ndarray  # columns are the basis vectors

    @property
    def basis(self) -> list[FockVector]:
        return [FockVector(self.space, self.matrix[:, c]) for c in range(self.matrix.shape[1])]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def _words(k: int, d: int):
    return [tuple(int(x) for x in w) for w in word_array(k, d)]


def build_invariant_subspace(space: TruncatedFock, d: int, i: int, level_cap: int) -> InvariantSubspace:
    """Orthonormalise ``W(e_u) W(e_v)^op f_i`` over words ``u, v`` on ``1..d``.

    Words are taken with ``|u| + |v| + 1 <= level_cap`` in a fixed order and
    passed through modified Gram-Schmidt (twice per vector) in ``⟨·,·⟩_q``;
    residuals below ``GS_DROP_TOL`` of the input norm are dropped.
    """
    if space.D < d + i:
        raise ValueError(f"need D >= d + i = {d + i}, have D={space.D}")
    if not 1 <= level_cap <= space.N:
        raise InsufficientTruncation(f"level_cap={level_cap} must lie in 1..N={space.N}")
    f = space.tensor(d + i)
    levels = range(level_cap + 1)
    U = np.zeros((space.dim, 0))
    GU = np.zeros((space.dim, 0))
    right_cache: dict = {}
    for total in range(level_cap):
        for lu in range(total + 1):
            lv = total - lu
            for v in _words(lv, d):
                if v not in right_cache:
                    letters = [x + 1 for x in v]
                    right_cache[v] = right_wick(space.tensor(*letters)).op.apply(f).coeffs
                rv = right_cache[v]
                for u in _words(lu, d):
                    vec = wick_word(space, u).matrix @ rv
                    g = space.gram_apply(vec, levels)
                    norm0 = math.sqrt(max(vec @ g, 0.0))
                    if norm0 == 0.0:
                        continue
                    for _ in range(2):
                        vec = vec - U @ (GU.T @ vec)
                    g = space.gram_apply(vec, levels)
                    nv = math.sqrt(max(vec @ g, 0.0))
                    if nv < GS_DROP_TOL * norm0:
                        continue
                    U = np.column_stack([U, vec / nv])
                    GU = np.column_stack([GU, g / nv])
    return InvariantSubspace(space, i, d, level_cap, U)


# -- witness vectors and operators ----------------------------------------


def _check_letters(xi: FockVector, d: int) -> int:
    k = xi.top_level()
    support = xi.support()
    if len(support) > 1:
        raise ValueError(f"expected a single-level tensor, found levels {support}")
    k = max(k, 0)
    T = xi.level_tensor(k)
    for axis in range(k):
        idx = [slice(None)] * k
        idx[axis] = slice(d, None)
        if np.any(T[tuple(idx)]):
            raise ValueError(f"tensor uses letters above d={d}")
    return k


def pairing_identity(space: TruncatedFock, xi: FockVector, eta: FockVector, d: int, i: int) -> tuple:
    """Both sides of ``⟨W(ξ) f_i W(η), f_i⟩_q = q^k ⟨W(ξ) Ω W(η), Ω⟩_q``.

    Returns ``(lhs, rhs)``; ``rhs`` is evaluated on the vacuum, independently
    of ``f_i``.
    """
    k = _check_letters(xi, d)
    if _check_letters(eta, d) != k and eta.support():
        raise ValueError("ξ and η must have the same degree")
    if space.N < 2 * k + 1:
        raise InsufficientTruncation(f"pairing identity at degree {k} needs N >= {2 * k + 1}")
    if space.D < d + i:
        raise ValueError(f"need D >= d + i = {d + i}")
    W = wick(xi).op
    R = right_wick(eta).op
    f = space.tensor(d + i)
    lhs = q_inner(W.apply(R.apply(f)), f)
    omega = space.vacuum()
    rhs = space.q**k * q_inner(W.apply(R.apply(omega)), omega)
    return lhs, rhs


def _inv_sqrt_columns(k: int, d: int, q: float, dense_cap: int) -> np.ndarray:
    return gram_sqrt(pq_factored(k, d, q, dense_cap=dense_cap)).inv_sqrt


def witness_vectors(space: TruncatedFock, k: int, d: int) -> list[FockVector]:
    """``ξ_j = (P_q^k)^{-1/2} e_j`` over the ``d^k`` words on letters ``1..d``."""
    if d > space.D:
        raise ValueError(f"d={d} exceeds D={space.D}")
    X = _inv_sqrt_columns(k, d, space.q, space.ctx.dense_cap)
    return [space.embed_level(k, X[:, j], d) for j in range(X.shape[1])]


def _witness_pairs(space: TruncatedFock, k: int, d: int):
    key = ("witness_pairs", k, d)
    if key not in space._cache:
        pairs = [(wick_star(x).op, right_wick(x).op) for x in witness_vectors(space, k, d)]
        space._cache[key] = pairs
    return space._cache[key]


def witness_operator(space: TruncatedFock, k: int, d: int) -> FockOperator:
    """``Σ_j W(ξ_j)* W(ξ_j)^op`` as a single operator on ``space``."""
    key = ("witness_op", k, d)
    if key not in space._cache:
        total = None
        for a, b in _witness_pairs(space, k, d):
            term = a @ b
            total = term if total is None else total + term
        space._cache[key] = total
    return space._cache[key]


# -- norms ----------------------------------------------------------------


def _power_norm(forward, backward, tgt_gram, src_gram, src_solve, x0, tol, max_iter) -> float:
    """Largest singular value via power iteration on ``A†A`` in the given inner products."""
    x = x0 / math.sqrt(float(np.sum(x0 * src_gram(x0))))
    lam_old = None
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = forward(x)
        gy = tgt_gram(y)
        lam = float(np.sum(y * gy))
        if lam <= 0.0:
            return 0.0
        if lam_old is not None and abs(lam - lam_old) <= tol * lam:
            return math.sqrt(lam)
        z = src_solve(backward(gy))
        nz = math.sqrt(max(float(np.sum(z * src_gram(z))), 0.0))
        if nz == 0.0:
            return 0.0
        x = z / nz
        lam_old = lam
    raise NormNotConverged(math.sqrt(lam), max_iter)


def _prefix_ops(space: TruncatedFock, w: int):
    n = int(space.offsets[w + 1])
    levels = range(w + 1)

    def pad(x):
        full = np.zeros((space.dim,) + x.shape[1:])
        full[:n] = x
        return full

    def gram(x):
        return space.gram_apply(pad(x), levels)[:n]

    def solve(x):
        return space.gram_solve(pad(x), levels)[:n]

    return n, gram, solve


def operator_norm(
    A: FockOperator,
    mode: str = "dense",
    tol: float = 1e-12,
    max_iter: int = 200_000,
    window: Optional[int] = None,
) -> float:
    """q-operator norm of ``A`` restricted to source levels ``<= window``.

    ``window`` defaults to ``A.exact_window``; larger values are refused.
    ``mode="dense"`` solves the generalized eigenproblem
    ``Aᵀ G A v = λ G_S v``; ``mode="matrix-free"`` runs power iteration from
    a fixed pseudo-random start.
    """
    space = A.space
    w = A.exact_window if window is None else window
    if w < 0 or w > A.exact_window:
        raise InsufficientTruncation(f"window {w} not inside exact window {A.exact_window}")
    n, src_gram, src_solve = _prefix_ops(space, w)
    Y = A.matrix[:, :n].tocsc()
    if mode == "dense":
        if n > DENSE_NORM_CAP:
            raise DenseCapExceeded(f"source dimension {n} too large for dense mode")
        Yd = Y.toarray()
        Mt = Yd.T @ space.gram_apply(Yd)
        Mt = 0.5 * (Mt + Mt.T)
        Ms = src_gram(np.eye(n))
        Ms = 0.5 * (Ms + Ms.T)
        lam = scipy.linalg.eigh(Mt, Ms, eigvals_only=True)[-1]
        return math.sqrt(max(float(lam), 0.0))
    if mode != "matrix-free":
        raise ValueError(f"unknown mode {mode!r}")
    Yt = Y.T.tocsr()
    x0 = np.random.default_rng(_START_SEED).standard_normal(n)
    return _power_norm(
        lambda x: Y @ x, lambda y: Yt @ y, space.gram_apply, src_gram, src_solve, x0, tol, max_iter
    )


def _restricted(space: TruncatedFock, k: int, d: int, i: int, level_cap: Optional[int]):
    if space.N < 2 * k + 1:
        raise InsufficientTruncation(f"restricted witness at degree {k} needs N >= {2 * k + 1}")
    S = witness_operator(space, k, d)
    cap = space.N - 2 * k if level_cap is None else level_cap
    if cap > S.exact_window:
        raise InsufficientTruncation(f"level_cap {cap} exceeds exact window {S.exact_window}")
    sub = build_invariant_subspace(space, d, i, cap)
    U = sub.matrix
    SU = S.matrix @ U
    GU = space.gram_apply(U, range(cap + 1))
    M = GU.T @ SU
    f = space.tensor(d + i)
    pairing = q_inner(S.apply(f), f)
    return float(np.linalg.norm(M, 2)), pairing


def restricted_witness_norm(
    space: TruncatedFock, k: int, d: int, i: int = 1, level_cap: Optional[int] = None
) -> float:
    """Norm of ``Σ_j W(ξ_j)* W(ξ_j)^op`` compressed to the truncated ``H_{q,i}``."""
    return _restricted(space, k, d, i, level_cap)[0]


def witness_pairing(space: TruncatedFock, k: int, d: int, i: int = 1) -> float:
    """``⟨Σ_j W(ξ_j)* W(ξ_j)^op f_i, f_i⟩_q`` computed by operator application."""
    if space.N < 2 * k + 1:
        raise InsufficientTruncation(f"pairing at degree {k} needs N >= {2 * k + 1}")
    S = witness_operator(space, k, d)
    f = space.tensor(d + i)
    return q_inner(S.apply(f), f)


def tensor_min_norm(
    space: TruncatedFock,
    k: int,
    d: Optional[int] = None,
    mode: str = "matrix-free",
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> float:
    """Spatial norm of ``Σ_j W(ξ_j)* ⊗ W(ξ_j)^op`` on ``F_q ⊗ F_q``.

    Source vectors are restricted to (exact window) ⊗ (exact window), so the
    value is a lower bound of the minimal tensor norm.
    """
    d = space.D if d is None else d
    pairs = _witness_pairs(space, k, d)
    w = min(min(a.exact_window, b.exact_window) for a, b in pairs)
    if w < 0:
        raise InsufficientTruncation(f"degree {k} leaves no exact window at N={space.N}")
    n, g1, s1 = _prefix_ops(space, w)
    As = [a.matrix[:, :n].tocsr() for a, _ in pairs]
    Bs = [b.matrix[:, :n].tocsr() for _, b in pairs]

    def tgt_gram(Y):
        return space.gram_apply(space.gram_apply(Y).T).T

    def src_gram(X):
        return g1(g1(X).T).T

    def src_solve(X):
        return s1(s1(X).T).T

    if mode == "dense":
        if n * n > DENSE_NORM_CAP:
            raise DenseCapExceeded(f"tensor source dimension {n * n} too large for dense mode")
        K = None
        for a, b in zip(As, Bs):
            term = sp.kron(a, b, format="csr")
            K = term if K is None else K + term
        Kd = K.toarray()
        dim = space.dim
        GK = tgt_gram_cols(space, Kd, dim)
        Mt = Kd.T @ GK
        Mt = 0.5 * (Mt + Mt.T)
        Gs = g1(np.eye(n))
        Ms = np.kron(Gs, Gs)
        Ms = 0.5 * (Ms + Ms.T)
        lam = scipy.linalg.eigh(Mt, Ms, eigvals_only=True)[-1]
        return math.sqrt(max(float(lam), 0.0))
    if mode != "matrix-free":
        raise ValueError(f"unknown mode {mode!r}")
    AsT = [a.T.tocsr() for a in As]
    BsT = [b.T.tocsr() for b in Bs]

    def forward(X):
        out = np.zeros((space.dim, space.dim))
        for a, b in zip(As, Bs):
            out += (b @ (a @ X).T).T
        return out

    def backward(Y):
        out = np.zeros((n, n))
        for aT, bT in zip(AsT, BsT):
            out += (bT @ (aT @ Y).T).T
        return out

    x0 = np.random.default_rng(_START_SEED).standard_normal((n, n))
    return _power_norm(forward, backward, tgt_gram, src_gram, src_solve, x0, tol, max_iter)


def tgt_gram_cols(space: TruncatedFock, K: np.ndarray, dim: int) -> np.ndarray:
    """Apply ``G ⊗ G`` to each column of ``K`` (row-major vectorised ``dim × dim`` matrices)."""
    c = K.shape[1]
    Y = K.reshape(dim, dim * c)
    Y = space.gram_apply(Y).reshape(dim, dim, c).transpose(1, 0, 2).reshape(dim, dim * c)
    Y = space.gram_apply(Y).reshape(dim, dim, c).transpose(1, 0, 2)
    return Y.reshape(dim * dim, c)


# -- crossover ------------------------------------------------------------


def crossover_predicate(q: float, d: int, delta: float, k: int) -> bool:
    """``|q|^k d^k >= (1 + delta) C_q^3 (k+1)^2 d^{k/2}``, compared in logs."""
    if q == 0.0:
        return False
    return k * math.log(abs(q) * d) >= math.log1p(delta) + _log_nou_bound(q, k, d)


def crossover_k(q: float, d: int, delta: float = 0.01, k_max: int = CROSSOVER_K_MAX) -> int:
    """Smallest ``k >= 1`` at which the exact lower value beats ``(1+delta)`` times the Khintchine bound."""
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if not q * q * d > 1:
        raise PreconditionError(f"crossover needs q^2 d > 1, got q^2 d = {q * q * d:g} <= 1")
    for k in range(1, k_max + 1):
        if crossover_predicate(q, d, delta, k):
            return k
    raise QFockError(f"no crossover found for k <= {k_max} (q={q}, d={d}, delta={delta})")


# -- reports --------------------------------------------------------------


@dataclass
class WitnessReport:
    q: float
    d: int
    k: int
    delta: float
    identity_value: float
    pairing_value: float
    restricted_norm: float
    tensor_norm_truncated: float
    nou_bound: float
    crossover_k: Optional[int] = None
    restricted_by_i: dict = field(default_factory=dict)

    @property
    def ok_lower(self) -> bool:
        return self.restricted_norm >= abs(self.identity_value) - VERDICT_TOL

    @property
    def ok_upper(self) -> bool:
        return self.tensor_norm_truncated <= self.nou_bound + VERDICT_TOL

    def row(self) -> dict:
        return {
            "k": self.k,
            "identity": self.identity_value,
            "restricted": self.restricted_norm,
            "tensor": self.tensor_norm_truncated,
            "nou": self.nou_bound,
            "ok_lower": self.ok_lower,
            "ok_upper": self.ok_upper,
        }


def witness_row(
    q: float, d: int, k: int, N: int, delta: float = 0.01,
    i_list: Sequence[int] = (1,), mode: str = "matrix-free", tol: float = 1e-12,
) -> WitnessReport:
    """One report row. The restricted side runs at level cap ``max(N, 2k+1)``."""
    n_r = max(N, 2 * k + 1)
    space_r = TruncatedFock(d + max(i_list), n_r, q)
    by_i = {}
    pairing = None
    for i in i_list:
        norm_i, pair_i = _restricted(space_r, k, d, i, None)
        by_i[i] = norm_i
        pairing = pair_i if pairing is None else pairing
    space_t = TruncatedFock(d, N, q)
    tensor = tensor_min_norm(space_t, k, d, mode=mode, tol=tol)
    return WitnessReport(
        q=q, d=d, k=k, delta=delta,
        identity_value=q**k * d**k,
        pairing_value=pairing,
        restricted_norm=min(by_i.values()),
        tensor_norm_truncated=tensor,
        nou_bound=nou_bound(q, k, d),
        restricted_by_i=by_i,
    )


def ao_witness_report(
    q: float, d: int, k_range: Sequence[int], N: int, delta: float = 0.01,
    i_list: Sequence[int] = (1,), mode: str = "matrix-free", tol: float = 1e-12,
    threads: int = 1, on_row: Optional[Callable[[WitnessReport], None]] = None,
) -> list[WitnessReport]:
    """Rows for each ``k`` in ``k_range`` (in order), with the crossover degree attached.

    The crossover is ``None`` when ``q^2 d <= 1``.
    """
    ks = list(k_range)
    star = crossover_k(q, d, delta) if q * q * d > 1 else None

    def job(k):
        return witness_row(q, d, k, N, delta, i_list, mode, tol)

    rows = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for r in pool.map(job, ks):
                r.crossover_k = star
                rows.append(r)
                if on_row:
                    on_row(r)
    else:
        for k in ks:
            r = job(k)
            r.crossover_k = star
            rows.append(r)
            if on_row:
                on_row(r)
    return rows


def _loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def phi_flow(
    q: float, m_values: Sequence[int], N: int = 4, n: int = 1, mode: str = "dense",
) -> dict:
    """Distances ``‖Φ_m(X) − q^n X‖`` for ``X = W(e_1^{⊗n})`` and their assembled bounds.

    All values for one call share the alphabet ``D = max(m_values)`` and the
    common exact window of the summands. The bound per ``m`` is
    ``‖T1‖ + ‖T2 − q^n X‖ + (n+3) C_q^{3/2} ‖e_2 ⊗ ξ ⊗ e_2‖_q m^{-1/2}``.
    """
    ms = sorted(int(m) for m in m_values)
    if ms[0] < 2:
        raise ValueError("phi-flow needs m >= 2 (d = 1 letter carries the symbol)")
    space = TruncatedFock(ms[-1], N, q)
    xi = space.tensor(*([1] * n))
    X = wick(xi).op
    c_norm = space.tensor(*([2] + [1] * n + [2])).norm() if n + 2 <= N else float("nan")
    bound_const = (n + 3) * cq(q) ** 1.5 * c_norm
    rows = []
    for m in ms:
        T1, T2, T3 = three_summands(xi, m, 1)
        phi = phi_m(X, m)
        dist = phi - space.q**n * X
        w = min(dist.exact_window, T1.exact_window, T3.exact_window)
        reassembly = window_residual(T1 + T2 + T3, phi, window=w)
        delta_m = operator_norm(dist, mode=mode, window=w)
        t1 = operator_norm(T1, mode=mode, window=w)
        t2 = operator_norm(T2 - space.q**n * X, mode=mode, window=w)
        t3 = operator_norm(T3, mode=mode, window=w)
        t3_bound = bound_const * m**-0.5
        bound = t1 + t2 + t3_bound
        vacuum_distance = dist.apply(space.vacuum()).norm()
        rows.append({
            "m": m, "distance": delta_m, "vacuum_distance": vacuum_distance,
            "t1": t1, "t2": t2, "t3": t3,
            "t3_bound": t3_bound, "bound": bound, "reassembly": reassembly,
            "ok": bool(delta_m <= bound + VERDICT_TOL and t3 <= t3_bound + VERDICT_TOL),
        })
    xs = [r["m"] for r in rows]
    if len(rows) > 1:
        slope = _loglog_slope(xs, [r["distance"] for r in rows])
        vacuum_slope = _loglog_slope(xs, [r["vacuum_distance"] for r in rows])
    else:
        slope = vacuum_slope = float("nan")
    return {
        "q": q, "N": N, "n": n, "D": space.D, "window": w, "rows": rows,
        "slope": slope, "vacuum_slope": vacuum_slope,
    }


def trace_collapse(
    q: float, n: int = 1, d: int = 1, m: int = 4, N: Optional[int] = None,
    r_max: int = 5, seed: int = 0,
) -> dict:
    """Iterates of the limit map on the trace of ``W(ξ)`` plus one numerical ``Φ_m`` step.

    ``ξ`` is a random level-``n`` tensor over letters ``1..d`` drawn with ``seed``.
    The limit map multiplies ``W(ξ)`` by ``q^n``, so the ``r``-th iterate has
    trace ``q^{rn} τ(W(ξ))``. The numerical step reports ``τ(Φ_m(W(ξ)))`` and the
    ``ξ``-coefficient of ``Φ_m(W(ξ)) Ω``, which tends to ``q^n``.
    """
    N = n + 2 if N is None else N
    D = max(d, m)
    space = TruncatedFock(D, N, q)
    rng = np.random.default_rng(seed)
    xi = space.embed_level(n, rng.standard_normal(d**n), d)
    W = wick(xi).op
    tau0 = trace(W)
    rows = [
        {"r": r, "multiplier": q ** (r * n), "trace_iterate": q ** (r * n) * tau0}
        for r in range(r_max + 1)
    ]
    P = phi_m(W, m)
    img = P.apply(space.vacuum())
    coefficient = q_inner(img, xi) / q_inner(xi, xi)
    tau1 = trace(P)
    # |τ(Φ_m(W) − q^n W)| <= ‖(Φ_m(W) − q^n W) Ω‖ <= the operator distance
    distance = operator_norm(P - q**n * W, mode="dense")
    step = {
        "m": m,
        "trace_before": tau0,
        "trace_after": tau1,
        "trace_limit": q**n * tau0,
        "distance": distance,
        "coefficient": coefficient,
        "limit": q**n,
        "ok": bool(abs(tau1 - q**n * tau0) <= distance + VERDICT_TOL),
    }
    return {"q": q, "n": n, "d": d, "N": N, "rows": rows, "phi_step": step}
