import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfock import TruncatedFock, q_inner
from qfock.fock import InsufficientTruncation, field
from qfock.wick import wick
from qfock.witness import (
    PreconditionError,
    ao_witness_report,
    build_invariant_subspace,
    cq,
    crossover_k,
    crossover_predicate,
    nou_bound,
    operator_norm,
    pairing_identity,
    phi_flow,
    restricted_witness_norm,
    tensor_min_norm,
    trace_collapse,
    witness_pairing,
    witness_vectors,
)

from conftest import random_level


# -- C_q and the Khintchine bound --------------------------------------------------


def cq_oracle(q):
    """1 / (q; q)_∞ evaluated by mpmath at 30 digits."""
    with mpmath.workdps(30):
        return float(1 / mpmath.qp(mpmath.mpf(q)))


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9, -0.3, -0.8])
def test_cq_matches_mpmath(q):
    assert cq(q) == pytest.approx(cq_oracle(q), rel=1e-11)


def test_cq_zero_and_loose_tolerance():
    assert cq(0.0) == 1.0
    assert abs(cq(0.5, 1e-8) - cq_oracle(0.5)) < 1e-6 * cq_oracle(0.5)
    with pytest.raises(ValueError):
        cq(1.0)


def test_nou_bound_formula():
    assert nou_bound(0.0, 2, 4) == 9 * 4
    assert nou_bound(0.5, 1, 2) == pytest.approx(cq(0.5) ** 3 * 4 * math.sqrt(2))


# -- crossover -------------------------------------------------------------


def crossover_scan(q, d, delta):
    """Direct evaluation of |q|^k d^k vs (1+δ) C_q^3 (k+1)^2 d^{k/2} in floating point."""
    c3 = cq_oracle(q) ** 3
    k = 1
    while True:
        lhs = k * math.log(abs(q) * d)
        rhs = math.log((1 + delta) * c3) + 2 * math.log(k + 1) + 0.5 * k * math.log(d)
        if lhs >= rhs:
            return k
        k += 1


def test_crossover_reference_case():
    k = crossover_k(0.6, 3, 0.01)
    assert k == crossover_scan(0.6, 3, 0.01)
    assert crossover_predicate(0.6, 3, 0.01, k)
    assert not crossover_predicate(0.6, 3, 0.01, k - 1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 0.95), st.integers(2, 12), st.floats(0, 0.5))
def test_crossover_flips_once(q, d, delta):
    if q * q * d <= 1.02:
        return
    k = crossover_k(q, d, delta)
    assert crossover_predicate(q, d, delta, k)
    assert not any(crossover_predicate(q, d, delta, j) for j in range(1, k))
    assert all(crossover_predicate(q, d, delta, j) for j in range(k, k + 50))


def test_crossover_requires_q2d_above_one():
    with pytest.raises(PreconditionError, match="q\\^2 d"):
        crossover_k(0.3, 2, 0.01)
    with pytest.raises(ValueError):
        crossover_k(0.3, 2)


# -- invariant subspaces and the pairing identity -------------------------


def test_subspaces_are_mutually_orthogonal():
    F = TruncatedFock(5, 4, 0.5)
    subs = {i: build_invariant_subspace(F, 2, i, 4) for i in (1, 2, 3)}
    for i, a in subs.items():
        G = a.matrix.T @ F.gram_apply(a.matrix)
        np.testing.assert_allclose(G, np.eye(a.dim), atol=1e-10)
        for j, b in subs.items():
            if i < j:
                assert np.abs(a.matrix.T @ F.gram_apply(b.matrix)).max() < 1e-10


def test_subspace_dimension_counts_words():
    # generic q: the W(e_u) W(e_v)^op f vectors are independent, Σ over |u|+|v| < cap of 2^{|u|+|v|}
    F = TruncatedFock(3, 3, 0.4)
    sub = build_invariant_subspace(F, 2, 1, 3)
    assert sub.dim == sum((t + 1) * 2**t for t in range(3))


@pytest.mark.parametrize("q", [0.5, -0.5])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_pairing_identity_dual_route(q, k, rng):
    d = 2 if k < 3 else 1
    F = TruncatedFock(d + 1, 2 * k + 2, q)
    xi = random_level(F, k, rng, d)
    eta = random_level(F, k, rng, d)
    lhs, rhs = pairing_identity(F, xi, eta, d, 1)
    assert abs(lhs - rhs) < 1e-10


def test_pairing_identity_k3_d2():
    q = 0.5
    F = TruncatedFock(3, 7, q)
    rng = np.random.default_rng(7)
    xi, eta = random_level(F, 3, rng, 2), random_level(F, 3, rng, 2)
    lhs, rhs = pairing_identity(F, xi, eta, 2, 1)
    assert abs(lhs - rhs) < 1e-10


def test_pairing_vanishes_at_q_zero(rng):
    for k in (1, 2):
        F = TruncatedFock(3, 2 * k + 2, 0.0)
        xi, eta = random_level(F, k, rng, 2), random_level(F, k, rng, 2)
        lhs, rhs = pairing_identity(F, xi, eta, 2, 1)
        assert lhs == 0.0 and rhs == 0.0


def test_witness_vectors_are_q_orthonormal():
    F = TruncatedFock(2, 3, 0.7)
    vs = witness_vectors(F, 3, 2)
    G = np.array([[q_inner(a, b) for b in vs] for a in vs])
    np.testing.assert_allclose(G, np.eye(8), atol=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_lower_estimate(k):
    q, d = 0.5, 2
    values = []
    for N in (2 * k + 1, 2 * k + 2):
        F = TruncatedFock(d + 1, N, q)
        p = witness_pairing(F, k, d)
        assert abs(p - q**k * d**k) < 1e-12
        values.append(restricted_witness_norm(F, k, d))
    assert values[0] >= 1.0 - 1e-9
    assert values[1] >= values[0] - 1e-12


def test_restricted_needs_room():
    F = TruncatedFock(3, 2, 0.5)
    with pytest.raises(InsufficientTruncation):
        restricted_witness_norm(F, 1, 2)


# -- norms ------------------------------------------------------------------


def test_free_field_norm_approaches_two():
    vals = []
    for N in (4, 8, 16):
        F = TruncatedFock(1, N, 0.0)
        vals.append(operator_norm(field(F, [1.0])))
    assert vals == sorted(vals)
    assert vals[-1] < 2.0 and vals[-1] > 1.9


def test_q_gaussian_norm_below_spectral_edge():
    # ‖s(e1)‖ = 2 / sqrt(1 - q) for 0 <= q < 1
    q = 0.5
    F = TruncatedFock(1, 15, q)
    val = operator_norm(field(F, [1.0]))
    assert val <= 2 / math.sqrt(1 - q) + 1e-9
    assert val > 0.9 * 2 / math.sqrt(1 - q)


def test_norm_modes_agree(rng):
    F = TruncatedFock(2, 5, 0.5)
    X = wick(random_level(F, 2, rng)).op
    a = operator_norm(X, mode="dense")
    b = operator_norm(X, mode="matrix-free")
    assert a == pytest.approx(b, rel=1e-8)


def test_norm_refuses_window_beyond_exact():
    F = TruncatedFock(1, 4, 0.5)
    s = field(F, [1.0])
    with pytest.raises(InsufficientTruncation):
        operator_norm(s, window=4)


@pytest.mark.parametrize("q", [0.0, 0.5])
def test_tensor_norm_below_nou(q):
    for k in (1, 2):
        prev = 0.0
        for N in range(k, 6):
            val = tensor_min_norm(TruncatedFock(2, N, q), k, 2)
            assert val <= nou_bound(q, k, 2) + 1e-9
            assert val >= prev - 1e-9
            prev = val


def test_tensor_norm_modes_agree():
    F = TruncatedFock(2, 3, 0.5)
    a = tensor_min_norm(F, 1, 2, mode="dense")
    b = tensor_min_norm(F, 1, 2, mode="matrix-free")
    assert a == pytest.approx(b, rel=1e-8)


# -- report -----------------------------------------------------------------


def test_report_rows_pass_at_reference():
    rows = ao_witness_report(0.5, 2, [1, 2], 6, i_list=(1, 2))
    for r in rows:
        assert r.identity_value == 1.0
        assert abs(r.pairing_value - 1.0) < 1e-12
        assert r.ok_lower and r.ok_upper
        assert r.crossover_k is None
        # i-independence of the restricted value
        vals = list(r.restricted_by_i.values())
        assert max(vals) - min(vals) < 1e-9


def test_report_q_zero_degenerates():
    r = ao_witness_report(0.0, 2, [1], 4)[0]
    assert r.identity_value == 0.0
    assert r.ok_lower


def test_report_threads_do_not_change_values():
    a = [r.row() for r in ao_witness_report(0.5, 2, [1, 2], 5, threads=1)]
    b = [r.row() for r in ao_witness_report(0.5, 2, [1, 2], 5, threads=2)]
    assert a == b


# -- flow and trace collapse -------------------------------------------------


def test_phi_flow_bounds_and_reassembly():
    res = phi_flow(0.5, [2, 4], N=4)
    for r in res["rows"]:
        assert r["reassembly"] < 1e-10
        assert r["ok"]
        assert r["distance"] <= r["bound"]


def test_trace_collapse_arithmetic():
    res = trace_collapse(0.5, n=2, d=2, m=3, seed=1)
    tau0 = res["rows"][0]["trace_iterate"]
    for row in res["rows"]:
        assert row["trace_iterate"] == pytest.approx(0.5 ** (2 * row["r"]) * tau0, abs=1e-15)
    assert res["phi_step"]["ok"]
