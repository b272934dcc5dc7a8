import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from vqst.errors import CapacityError, ConvergenceError, DimensionError, ParameterError
from vqst.spinchain import (
    XXZOperator,
    XXZParams,
    dense_hamiltonian,
    energy_expectation,
    ground_state_lanczos,
    hamiltonian_matvec,
)
from vqst.statevector import StateVector, basis_state

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def kron_oracle(p: XXZParams) -> np.ndarray:
    """Independent Kronecker-product assembly of the chain Hamiltonian."""
    L = p.L

    def site(op, i):
        return reduce(np.kron, [op if k == i else np.eye(2) for k in range(L)])

    h = np.zeros((2**L, 2**L), dtype=complex)
    for i in range(L - 1):
        h += p.J * (site(X, i) @ site(X, i + 1) + site(Y, i) @ site(Y, i + 1))
        h += p.Delta * site(Z, i) @ site(Z, i + 1)
    for i in range(L):
        h += p.h * site(Z, i)
    return h


def test_single_site_field():
    p = XXZParams(1, h=1.0)
    np.testing.assert_allclose(hamiltonian_matvec(p, basis_state("0")).amplitudes, [1, 0])
    np.testing.assert_allclose(hamiltonian_matvec(p, basis_state("1")).amplitudes, [0, -1])


def test_two_site_matvec_example():
    out = hamiltonian_matvec(XXZParams(2, 1.0, 0.5, 1.0), basis_state("01")).amplitudes
    np.testing.assert_allclose(out, [0, -0.5, 2, 0], atol=1e-15)


def test_two_site_dense_example():
    m = dense_hamiltonian(XXZParams(2, 1.0, 0.5, 1.0))
    expected = np.diag([2.5, -0.5, -0.5, -1.5])
    expected[1, 2] = expected[2, 1] = 2
    np.testing.assert_allclose(m, expected, atol=1e-15)
    assert np.isrealobj(m) or np.max(np.abs(np.imag(m))) == 0


@pytest.mark.parametrize("L", [1, 2, 3, 5])
def test_field_only_dense(L):
    m = dense_hamiltonian(XXZParams(L, 0.0, 0.0, 1.0))
    for idx in range(2**L):
        ones = bin(idx).count("1")
        assert m[idx, idx] == (L - ones) - ones
    assert np.count_nonzero(m - np.diag(np.diag(m))) == 0


@pytest.mark.parametrize("p", [XXZParams(3, 1, 1.5, 1), XXZParams(4, 0.3, -0.7, 0.2), XXZParams(5, 1, 0.5, 1)])
def test_dense_matches_kron_oracle(p):
    m = dense_hamiltonian(p)
    np.testing.assert_allclose(m, kron_oracle(p), atol=1e-12)
    assert np.array_equal(m, m.T)


def test_dense_capacity():
    with pytest.raises(CapacityError):
        dense_hamiltonian(XXZParams(13))


@pytest.mark.parametrize("L", [2, 4, 7, 10])
def test_matvec_matches_dense(L, rng):
    p = XXZParams(L, 1.0, 1.3, 1.0)
    m = dense_hamiltonian(p)
    for _ in range(3):
        v = random_state(rng, L)
        np.testing.assert_allclose(hamiltonian_matvec(p, v).amplitudes, m @ v, atol=1e-12)


def test_matvec_dimension_error():
    with pytest.raises(DimensionError):
        hamiltonian_matvec(XXZParams(3), np.ones(4))
    with pytest.raises(DimensionError):
        energy_expectation(basis_state("00"), XXZParams(3))


def test_params_validation():
    with pytest.raises(ParameterError):
        XXZParams(0)
    with pytest.raises(ParameterError):
        XXZParams(3, J=math.nan)


@given(L=st.integers(2, 7), idx=st.integers(0, 2**7 - 1), delta=st.floats(-2, 2))
@settings(max_examples=60, deadline=None)
def test_matvec_preserves_hamming_weight(L, idx, delta):
    idx %= 2**L
    v = np.zeros(2**L)
    v[idx] = 1
    out = XXZOperator(XXZParams(L, 1.0, delta, 1.0))(v)
    weight = bin(idx).count("1")
    for k in np.flatnonzero(np.abs(out) > 0):
        assert bin(int(k)).count("1") == weight


def test_lanczos_two_site_example():
    gs = ground_state_lanczos(XXZParams(2, 1.0, 0.5, 1.0))
    assert gs.energy == pytest.approx(-2.5, abs=1e-10)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(gs.vector.amplitudes, [0, r, -r, 0], atol=1e-9)
    assert gs.residual <= 1e-10


@pytest.mark.parametrize("L", [1, 3, 6])
def test_lanczos_field_only(L):
    gs = ground_state_lanczos(XXZParams(L, 0.0, 0.0, 1.0))
    assert gs.energy == pytest.approx(-L, abs=1e-10)
    assert abs(gs.vector.amplitudes[-1]) == pytest.approx(1, abs=1e-9)
    assert energy_expectation(basis_state("1" * L), XXZParams(L, 0.0, 0.0, 1.0)) == -L


@pytest.mark.parametrize("L", [3, 5, 8])
@pytest.mark.parametrize("delta", [0.5, 1.0, 1.5])
def test_lanczos_matches_dense(L, delta):
    p = XXZParams(L, 1.0, delta, 1.0)
    gs = ground_state_lanczos(p)
    e_dense = np.linalg.eigvalsh(dense_hamiltonian(p))
    assert abs(gs.energy - e_dense[0]) <= 1e-8
    assert gs.residual <= 1e-10
    assert abs(energy_expectation(gs.vector, p) - gs.energy) <= 1e-9
    if e_dense[1] - e_dense[0] > 1e-6:
        assert not gs.degenerate
        assert gs.gap_estimate == pytest.approx(e_dense[1] - e_dense[0], abs=1e-6)


def test_ground_state_real_and_phase_fixed():
    for delta in (0.5, 1.0, 1.5):
        amps = ground_state_lanczos(XXZParams(10, 1.0, delta, 1.0)).vector.amplitudes
        assert np.max(np.abs(amps.imag)) <= 1e-10
        first = np.flatnonzero(np.abs(amps) > 1e-8 * np.abs(amps).max())[0]
        assert amps[first].real > 0
        assert np.linalg.norm(amps) == pytest.approx(1, abs=1e-12)


def test_variational_bound(rng):
    p = XXZParams(6, 1.0, 1.5, 1.0)
    e0 = ground_state_lanczos(p).energy
    for _ in range(100):
        assert energy_expectation(StateVector(random_state(rng, 6)), p) >= e0 - 1e-9


def test_energy_is_real(rng):
    p = XXZParams(5, 1.0, 0.7, 1.0)
    v = random_state(rng, 5)
    assert abs(np.vdot(v, hamiltonian_matvec(p, v).amplitudes).imag) <= 1e-10


def test_lanczos_deterministic():
    p = XXZParams(9, 1.0, 1.0, 1.0)
    a = ground_state_lanczos(p, seed=3)
    b = ground_state_lanczos(p, seed=3)
    assert abs(a.energy - b.energy) <= 1e-12
    np.testing.assert_array_equal(a.vector.amplitudes, b.vector.amplitudes)


def test_degenerate_flag():
    # J=0, Delta=0, h=0: every basis state has energy zero
    gs = ground_state_lanczos(XXZParams(3, 0.0, 0.0, 0.0))
    assert gs.degenerate


def test_convergence_error_carries_residual():
    with pytest.raises(ConvergenceError) as info:
        ground_state_lanczos(XXZParams(10, 1.0, 1.0, 1.0), tol=1e-30, max_iter=2, krylov_dim=5)
    assert info.value.residual > 0


def test_export_roundtrip(tmp_path):
    from vqst.statevector import read_statevector, write_statevector

    gs = ground_state_lanczos(XXZParams(4, 1.0, 1.0, 1.0))
    write_statevector(tmp_path / "gs.bin", gs.vector)
    np.testing.assert_array_equal(read_statevector(tmp_path / "gs.bin").amplitudes, gs.vector.amplitudes)
