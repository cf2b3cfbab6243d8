import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfock import qsym
from qfock.qsym import (
    BudgetExceeded,
    DenseCapExceeded,
    NotPositiveDefinite,
    Permutation,
    gram_sqrt,
    inversion_count,
    pq_apply,
    pq_dense,
    pq_factored,
    word_array,
    word_ranks,
)

perms = st.integers(1, 6).flatmap(lambda k: st.permutations(list(range(1, k + 1))))
qs = st.floats(-0.95, 0.95)


def brute_inversions(images):
    return sum(1 for a, b in itertools.combinations(range(len(images)), 2) if images[b] < images[a])


@given(perms)
def test_inversion_count_matches_pair_scan(images):
    assert inversion_count(Permutation(images)) == brute_inversions(images)


@given(perms)
def test_reversal_complements_inversions(images):
    p = Permutation(images)
    k = p.k
    assert inversion_count(p) + inversion_count(p.reversed()) == k * (k - 1) // 2


@given(perms, perms)
def test_compose_is_function_composition(a, b):
    if len(a) != len(b):
        return
    pa, pb = Permutation(a), Permutation(b)
    c = pa.compose(pb)
    assert all(c.images[x - 1] == a[b[x - 1] - 1] for x in range(1, len(a) + 1))


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((1, 1, 2))


def test_inversion_generating_function():
    # Σ_σ q^{inv σ} = [k]_q! (Rodrigues)
    q = 0.37
    for k in range(1, 7):
        total = sum(q ** inversion_count(p) for p in itertools.permutations(range(k)))
        qfact = math.prod((1 - q**j) / (1 - q) for j in range(1, k + 1))
        assert total == pytest.approx(qfact, rel=1e-13)


def test_word_ranks_roundtrip():
    for k, d in [(1, 3), (3, 2), (4, 3)]:
        w = word_array(k, d)
        np.testing.assert_array_equal(word_ranks(w, d), np.arange(d**k))
    # first letter most significant
    assert list(word_array(2, 2)[1]) == [0, 1]


def test_known_entries():
    # ⟨e1⊗e2, e2⊗e1⟩ = q, ⟨e1⊗e1, e1⊗e1⟩ = 1 + q
    q = 0.5
    P = pq_dense(2, 2, q).matrix
    assert P[1, 2] == q and P[2, 1] == q
    assert P[0, 0] == 1 + q
    # e1e1e2 vs e1e2e1: σ moving the 2 one step, two such with inversions 1 and 2
    P3 = pq_dense(3, 2, q).matrix
    assert P3[word_ranks([0, 0, 1], 2), word_ranks([0, 1, 0], 2)] == q + q**2


def test_q_zero_is_identity_and_diagonal_counts_stabilizer():
    for k in range(4):
        np.testing.assert_array_equal(pq_factored(k, 2, 0.0).matrix, np.eye(2**k))
    # q=1 limit not allowed, but the diagonal at small q tends to |stabilizer| = Π m_a!
    with pytest.raises(ValueError):
        pq_dense(2, 2, 1.0)


def test_dense_is_bitwise_symmetric():
    for q in (0.3, -0.7, 0.9):
        P = pq_dense(4, 3, q).matrix
        assert np.array_equal(P, P.T)


@pytest.mark.parametrize("q", [0.0, 0.3, -0.3, 0.5, -0.5, 0.9])
def test_factored_matches_dense_small(q):
    for k in range(0, 5):
        for d in (1, 2, 3):
            a = pq_dense(k, d, q).matrix
            b = pq_factored(k, d, q).matrix
            assert np.max(np.abs(a - b), initial=0) < 1e-12
            assert np.array_equal(b, b.T)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), qs, st.integers(0, 2**32 - 1))
def test_matrix_free_apply_matches_dense(k, d, q, seed):
    x = np.random.default_rng(seed).standard_normal((d**k, 2))
    P = pq_factored(k, d, q).matrix
    np.testing.assert_allclose(pq_apply(x, k, d, q), P @ x, atol=1e-11 * max(1.0, np.abs(P).max()))


def test_two_by_two_closed_form_spectrum():
    # level 2, d = 2: eigenvalues 1 + q (symmetric, multiplicity 3) and 1 - q (antisymmetric)
    for q in (0.2, -0.6, 0.9):
        w = np.linalg.eigvalsh(pq_factored(2, 2, q).matrix)
        np.testing.assert_allclose(w, sorted([1 - q, 1 + q, 1 + q, 1 + q]), atol=1e-14)


def test_single_letter_level_is_q_factorial():
    q = 0.45
    for k in range(1, 7):
        val = pq_factored(k, 1, q).matrix[0, 0]
        assert val == pytest.approx(math.prod((1 - q**j) / (1 - q) for j in range(1, k + 1)), rel=1e-13)


def test_gram_sqrt_roundtrip():
    g = gram_sqrt(pq_factored(3, 2, 0.7))
    np.testing.assert_allclose(g.sqrt @ g.sqrt, g.matrix, atol=1e-12)
    np.testing.assert_allclose(g.inv_sqrt @ g.matrix @ g.inv_sqrt, np.eye(8), atol=1e-12)


def test_not_positive_definite_detected():
    g = pq_factored(2, 2, 0.5)
    bad = qsym.GramLevel(2, 2, 0.5, g.matrix - 0.5 * np.eye(4))
    with pytest.raises(NotPositiveDefinite):
        gram_sqrt(bad)


def test_budget_and_cap_errors():
    with pytest.raises(BudgetExceeded):
        pq_dense(8, 3, 0.5)
    with pytest.raises(DenseCapExceeded):
        pq_factored(8, 3, 0.5)


def test_dump_gram_csv(tmp_path):
    g = pq_factored(2, 2, 0.3)
    path = tmp_path / "g.csv"
    qsym.dump_gram_csv(g, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# k,d,q")
    back = np.loadtxt(path, delimiter=",")
    assert np.array_equal(back, g.matrix)
