import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from bosecone.fock import (
    DimensionCapError,
    LocalOperator,
    annihilation,
    creation,
    enumerate_sector,
    number_operator,
    one_body_operator,
    read_triplets,
    relative_number,
    second_quantize,
    spectral_projection_threshold,
    support_check,
    write_triplets,
)


def test_sector_sizes():
    assert enumerate_sector(3, 2).dim == 6
    s = enumerate_sector(1, 5)
    assert s.dim == 1 and tuple(s.basis[0]) == (5,)
    assert enumerate_sector(9, 3).dim == 165
    with pytest.raises(DimensionCapError):
        enumerate_sector(9, 3, dim_cap=100)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 4))
def test_sector_invariants(L, n):
    s = enumerate_sector(L, n)
    assert s.dim == math.comb(L + n - 1, n)
    assert np.all(s.basis.sum(axis=1) == n)
    assert all(s.index_of(b) == k for k, b in enumerate(s.basis))
    # lexicographic order
    assert [tuple(b) for b in s.basis] == sorted(tuple(b) for b in s.basis)


def test_ladder_examples():
    s2, s1 = enumerate_sector(1, 2), enumerate_sector(1, 1)
    assert annihilation(s2, s1, 0).toarray()[0, 0] == pytest.approx(math.sqrt(2))
    a = annihilation(enumerate_sector(2, 3), enumerate_sector(2, 2), 0)
    t2, t1 = enumerate_sector(2, 3), enumerate_sector(2, 2)
    assert a[t1.index_of((1, 1)), t2.index_of((2, 1))] == pytest.approx(math.sqrt(2))
    # column of a state with m_0 = 0 is empty
    assert a[:, t2.index_of((0, 3))].nnz == 0
    with pytest.raises(ValueError):
        annihilation(t2, enumerate_sector(2, 3), 0)


def test_ccr_on_sectors():
    L, n = 3, 2
    sec = {k: enumerate_sector(L, k) for k in range(n + 2)}
    for x in range(L):
        for y in range(L):
            # [a_x, a_y^*] on the n sector
            lhs = annihilation(sec[n + 1], sec[n], x) @ creation(sec[n], sec[n + 1], y)
            rhs = creation(sec[n - 1], sec[n], y) @ annihilation(sec[n], sec[n - 1], x)
            comm = (lhs - rhs).toarray()
            assert np.allclose(comm, np.eye(sec[n].dim) * (x == y), atol=1e-14)


def test_number_operators():
    s = enumerate_sector(3, 2)
    lat_all = [0, 1, 2]
    assert np.allclose(number_operator(s, lat_all).toarray(), 2 * np.eye(6))
    assert number_operator(s, []).count_nonzero() == 0
    assert np.array_equal(number_operator(s, [0]).diagonal(), s.basis[:, 0])
    assert np.allclose((number_operator(s, [0]) + number_operator(s, [1, 2])).toarray(), 2 * np.eye(6))


def test_second_quantize():
    s = enumerate_sector(3, 2)
    assert np.allclose(second_quantize(s, np.ones(3)).toarray(), 2 * np.eye(6))
    assert np.allclose(second_quantize(s, [1, 0, 1]).toarray(), number_operator(s, [0, 2]).toarray())
    s2 = enumerate_sector(3, 2)
    val = second_quantize(s2, lambda x: x).diagonal()[s2.index_of((0, 1, 1))]
    assert val == 3
    f, g = np.array([0.3, -1, 2]), np.array([1.5, 0.2, 0.1])
    assert np.allclose(second_quantize(s, f + g).toarray(), (second_quantize(s, f) + second_quantize(s, g)).toarray())


def test_relative_number_and_projection():
    s = enumerate_sector(2, 2)
    assert np.allclose(relative_number(s, [0, 1]).toarray(), np.eye(3))
    assert relative_number(s, []).count_nonzero() == 0
    nb = relative_number(s, [0])
    assert sorted(nb.diagonal()) == [0, 0.5, 1]
    with pytest.raises(ValueError):
        relative_number(enumerate_sector(2, 0), [0])
    assert np.allclose(spectral_projection_threshold(nb, 0, ">=").toarray(), np.eye(3))
    assert spectral_projection_threshold(nb, 1.1, ">=").count_nonzero() == 0
    P = spectral_projection_threshold(nb, 0.6, ">=")
    assert P.diagonal().sum() == 1 and P.diagonal()[s.index_of((2, 0))] == 1
    assert np.allclose((P @ P).toarray(), P.toarray())
    with pytest.raises(ValueError):
        spectral_projection_threshold(one_body_operator(s, np.ones((2, 2))), 0.5)


def test_one_body_matches_ladder_products():
    L, n = 3, 2
    s, sm = enumerate_sector(L, n), enumerate_sector(L, n - 1)
    rng = np.random.default_rng(0)
    M = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
    ref = sum(M[x, y] * (creation(sm, s, x) @ annihilation(s, sm, y)) for x in range(L) for y in range(L))
    assert np.allclose(one_body_operator(s, M).toarray(), ref.toarray(), atol=1e-13)


def test_support_check():
    L = 4
    sectors = {k: enumerate_sector(L, k) for k in range(1, 4)}
    X = [0, 1]
    reps = {k: number_operator(sectors[k], X) for k in sectors}
    assert support_check(reps, X, sectors)
    reps_bad = {k: number_operator(sectors[k], [3]) for k in sectors}
    assert not support_check(reps_bad, X, sectors)


def test_local_operator_embedding():
    # hopping between sites 1 and 2 of a 4-site chain, written locally on S={1,2}
    S = (1, 2)
    M = np.array([[0, 1], [1, 0]], dtype=complex)
    local = LocalOperator.from_function(S, 3, lambda sec: one_body_operator(sec, M).toarray())
    big = np.zeros((4, 4), complex)
    big[1, 2] = big[2, 1] = 1
    for n in range(4):
        sec = enumerate_sector(4, n)
        assert np.allclose(local.on(sec).toarray(), one_body_operator(sec, big).toarray())
    sectors = {k: enumerate_sector(4, k) for k in range(4)}
    assert support_check({k: local.on(sectors[k]) for k in sectors}, S, sectors)


def test_triplet_roundtrip(tmp_path):
    s = enumerate_sector(3, 2)
    op = one_body_operator(s, np.array([[0, 1j, 0], [-1j, 0, 0.3], [0, 0.3, 1]]))
    p = tmp_path / "op.txt"
    write_triplets(p, op)
    back, herm = read_triplets(p)
    assert herm
    assert (back != op).nnz == 0
    header = p.read_text().splitlines()[0].split()
    assert int(header[1]) == op.nnz


def test_is_localized_in():
    from bosecone.fock import is_localized_in

    sec = enumerate_sector(4, 2)
    assert is_localized_in(sec, number_operator(sec, [0, 1]), [0, 1])
    assert not is_localized_in(sec, number_operator(sec, [2]), [0, 1])
    hop = np.zeros((4, 4))
    hop[0, 1] = hop[1, 0] = 1
    assert is_localized_in(sec, one_body_operator(sec, hop), [0, 1])
    assert not is_localized_in(sec, one_body_operator(sec, hop), [0, 2])


def test_rank_index_on_long_lattices():
    # positional base-(n+1) keys would overflow int64 here
    for L, n in [(200, 1), (40, 3)]:
        s = enumerate_sector(L, n, dim_cap=20_000)
        assert np.array_equal(s.indices_of(s.basis), np.arange(s.dim))
