import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from vqst.errors import DimensionError
from vqst.tensor import as_tensor, contract, reshape, svd


def naive_matmul(a, b):
    m, k = a.shape
    _, n = b.shape
    out = np.zeros((m, n), dtype=complex)
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


def test_contract_identity():
    v = np.array([0.3 + 1j, -2.0])
    np.testing.assert_array_equal(contract(np.eye(2, dtype=complex), [1], v, [0]), v)


def test_contract_orthogonal_vectors():
    assert contract(np.array([1, 0], dtype=complex), [0], np.array([0, 1], dtype=complex), [0]) == 0


def test_contract_matches_triple_loop(rng):
    a, b = crandn(rng, 2, 3), crandn(rng, 3, 4)
    np.testing.assert_allclose(contract(a, [1], b, [0]), naive_matmul(a, b), atol=1e-13)


def test_contract_free_axis_order(rng):
    a, b = crandn(rng, 2, 3, 5), crandn(rng, 4, 3)
    out = contract(a, [1], b, [1])
    assert out.shape == (2, 5, 4)
    np.testing.assert_allclose(out[1, 2, 3], sum(a[1, k, 2] * b[3, k] for k in range(3)))


def test_contract_extent_mismatch():
    with pytest.raises(DimensionError):
        contract(np.ones((2, 3)), [1], np.ones((4, 2)), [0])


def test_contract_bilinear(rng):
    a, b = crandn(rng, 3, 4), crandn(rng, 4, 2)
    alpha = 0.7 - 1.3j
    np.testing.assert_allclose(contract(alpha * a, [1], b, [0]), alpha * contract(a, [1], b, [0]), atol=1e-13)


def test_reshape_roundtrip_and_order():
    t = as_tensor(np.arange(4))
    r = reshape(t, [2, 2])
    np.testing.assert_array_equal(r, [[0, 1], [2, 3]])
    np.testing.assert_array_equal(reshape(reshape(r, [4]), [2, 2]), r)
    assert np.shares_memory(r, t)


def test_reshape_row_major_rule(rng):
    t = crandn(rng, 2, 2, 2)
    r = reshape(t, [2, 4])
    for i in range(2):
        for j in range(2):
            for k in range(2):
                assert r[i, 2 * j + k] == t[i, j, k]


def test_reshape_size_mismatch():
    with pytest.raises(DimensionError):
        reshape(np.zeros(4, dtype=complex), [3])


def test_as_tensor_rejects_nan():
    with pytest.raises(DimensionError):
        as_tensor([1.0, np.nan])


def test_svd_examples():
    np.testing.assert_allclose(svd(np.eye(2, dtype=complex)).s, [1, 1])
    np.testing.assert_allclose(svd(np.diag([3.0, 0.0]).astype(complex)).s, [3, 0])


def test_svd_against_eigensolve(rng):
    m = crandn(rng, 4, 4)
    res = svd(m)
    assert np.max(np.abs(res.reconstruct() - m)) <= 1e-10
    oracle = np.sqrt(np.clip(np.linalg.eigvalsh(m.conj().T @ m), 0, None))[::-1]
    np.testing.assert_allclose(res.s, oracle, atol=1e-10)


def test_svd_rank_check():
    with pytest.raises(DimensionError):
        svd(np.zeros((2, 2, 2)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_svd_reconstruction_property(rows, cols, seed):
    m = crandn(np.random.default_rng(seed), rows, cols)
    res = svd(m)
    k = min(rows, cols)
    assert res.s.shape == (k,)
    assert np.all(np.diff(res.s) <= 0) and np.all(res.s >= 0)
    assert np.max(np.abs(res.reconstruct() - m)) <= 1e-10
    assert np.max(np.abs(res.u.conj().T @ res.u - np.eye(k))) <= 1e-10
    assert np.max(np.abs(res.vdag @ res.vdag.conj().T - np.eye(k))) <= 1e-10


def test_svd_of_unitary(rng):
    q, _ = np.linalg.qr(crandn(rng, 8, 8))
    np.testing.assert_allclose(svd(q).s, np.ones(8), atol=1e-10)
