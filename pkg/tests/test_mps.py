import math

import numpy as np
import pytest

from conftest import crandn
from vqst.circuit import AnsatzSpec, Circuit, Gate, build_ansatz
from vqst.errors import ConsistencyError, DimensionError, UsageError
from vqst.mps import (
    MpoOperator,
    MpsState,
    amplitude,
    apply_single_qubit_mps,
    apply_two_qubit_mps,
    bond_bound,
    bond_dimension,
    check_right_canonical,
    load_json,
    mpo_element,
    mps_to_statevector,
    partial_trace_to_mpo,
    product_state_mps,
    run_circuit_mps,
    save_json,
)
from vqst.statevector import StateVector, reduced_density, run_circuit, zero_state


def random_ansatz(rng, n, d, scheme="alternating_xy"):
    spec = AnsatzSpec(n, d, scheme)
    return build_ansatz(spec, rng.uniform(-math.pi, math.pi, spec.n_params))


def bell_mps():
    s = product_state_mps(2)
    s = apply_single_qubit_mps(s, Gate("H", (0,)))
    return apply_two_qubit_mps(s, Gate("CNOT", (0, 1)))


def random_canonical_mps(rng, n, chi):
    """Right-canonical MPS built by right-to-left QR of random tensors."""
    dims = [1] + [min(chi, 2 ** min(i, n - i)) for i in range(1, n)] + [1]
    sites = []
    for i in reversed(range(n)):
        a, b = dims[i], dims[i + 1]
        m = crandn(rng, 2 * b, a)
        q, _ = np.linalg.qr(m)
        sites.append(q.conj().T.reshape(a, 2, b))
    return MpsState(tuple(reversed(sites)))


def test_product_state():
    assert amplitude(product_state_mps(1), "0") == 1
    assert bond_dimension(product_state_mps(5)) == 1
    np.testing.assert_array_equal(mps_to_statevector(product_state_mps(3)).amplitudes, zero_state(3).amplitudes)
    assert check_right_canonical(product_state_mps(4))


def test_single_qubit_gates():
    s = product_state_mps(3)
    same = apply_single_qubit_mps(s, Gate("RX", (1,), 0.0))
    for a, b in zip(s.sites, same.sites):
        assert np.max(np.abs(a - b)) <= 1e-15
    flipped = apply_single_qubit_mps(s, Gate("X", (0,)))
    assert amplitude(flipped, "100") == 1
    with pytest.raises(UsageError):
        apply_single_qubit_mps(s, Gate("CNOT", (0, 1)))


def test_single_qubit_preserves_canonical(rng):
    s = random_canonical_mps(rng, 6, 4)
    assert check_right_canonical(s)
    for site in range(6):
        s2 = apply_single_qubit_mps(s, Gate("RY", (site,), 0.7))
        assert check_right_canonical(s2, 1e-10)
        assert s2.bond_dimensions() == s.bond_dimensions()


def test_cnot_on_zero_keeps_bond():
    s = apply_two_qubit_mps(product_state_mps(2), Gate("CNOT", (0, 1)))
    assert s.bond_dimensions() == [1]
    assert amplitude(s, "00") == pytest.approx(1)


def test_bell_state():
    s = bell_mps()
    assert s.bond_dimensions() == [2]
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(mps_to_statevector(s).amplitudes, [r, 0, 0, r], atol=1e-15)
    assert amplitude(s, "01") == 0
    assert check_right_canonical(s)


def test_reversed_cnot_orientation(rng):
    circ = Circuit(3, (Gate("H", (2,)), Gate("RY", (1,), 0.4), Gate("CNOT", (2, 1)), Gate("CNOT", (1, 0))))
    np.testing.assert_allclose(
        mps_to_statevector(run_circuit_mps(circ)).amplitudes, run_circuit(circ).amplitudes, atol=1e-14
    )


def test_non_adjacent_rejected():
    with pytest.raises(UsageError):
        apply_two_qubit_mps(product_state_mps(3), Gate("CNOT", (0, 2)))
    with pytest.raises(UsageError):
        run_circuit_mps(Circuit(3, (Gate("CSWAP", (0, 1, 2)),)))


def test_bond_growth_one_layer(rng):
    circ = random_ansatz(rng, 8, 1)
    s = run_circuit_mps(circ)
    assert s.max_bond <= 2


@pytest.mark.parametrize("n, d", [(10, 8), (6, 3), (9, 10), (4, 0)])
def test_dense_agreement(n, d, rng):
    circ = random_ansatz(rng, n, d)
    s = run_circuit_mps(circ, chi_max=None, svd_tol=1e-14)
    dense = run_circuit(circ).amplitudes
    assert np.max(np.abs(mps_to_statevector(s).amplitudes - dense)) <= 1e-10
    assert s.max_bond <= bond_bound(d)
    assert check_right_canonical(s, 1e-10)
    for _ in range(5):
        bits = rng.integers(0, 2, n)
        idx = int("".join(map(str, bits)), 2)
        assert abs(amplitude(s, bits) - dense[idx]) <= 1e-10


def test_depth_zero_is_product():
    s = run_circuit_mps(random_ansatz(np.random.default_rng(0), 5, 0))
    assert s.max_bond == 1


def test_bond_bound_paper_case(rng):
    s = run_circuit_mps(random_ansatz(rng, 12, 10, "ry_only"))
    assert s.max_bond <= 32


def test_zero_tolerance_keeps_everything(rng):
    circ = random_ansatz(rng, 6, 4)
    s = run_circuit_mps(circ, svd_tol=0.0)
    # with no dropping, every split keeps min(rows, cols) singular values
    assert s.max_bond >= run_circuit_mps(circ).max_bond
    np.testing.assert_allclose(mps_to_statevector(s).amplitudes, run_circuit(circ).amplitudes, atol=1e-10)


def test_chi_max_truncates(rng):
    circ = random_ansatz(rng, 8, 8)
    s = run_circuit_mps(circ, chi_max=2)
    assert s.max_bond <= 2
    # truncation only spoils the left factor of each split
    assert check_right_canonical(s, 1e-10, sites=[7])
    full = run_circuit_mps(circ)
    t = apply_two_qubit_mps(full, Gate("CNOT", (3, 4)), chi_max=2)
    assert t.bond_dimensions()[3] <= 2
    assert check_right_canonical(t, 1e-10, sites=range(4, 8))


def test_canonical_after_long_random_sequence(rng):
    n = 7
    s = product_state_mps(n)
    for _ in range(1000):
        if rng.random() < 0.5:
            g = Gate(str(rng.choice(["RX", "RY"])), (int(rng.integers(n)),), float(rng.uniform(-3, 3)))
            s = apply_single_qubit_mps(s, g)
        else:
            q = int(rng.integers(n - 1))
            pair = (q, q + 1) if rng.random() < 0.5 else (q + 1, q)
            s = apply_two_qubit_mps(s, Gate("CNOT", pair))
        assert check_right_canonical(s, 1e-8)


def test_check_right_canonical_violation():
    s = bell_mps()
    bad = s.replace({1: 2 * s.sites[1]})
    assert not check_right_canonical(bad, 1e-8)


def test_amplitude_length_mismatch():
    with pytest.raises(DimensionError):
        amplitude(product_state_mps(3), "01")


def test_mpo_product_state():
    op = partial_trace_to_mpo(product_state_mps(4), 2)
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    np.testing.assert_allclose(op.to_dense(), expected)
    assert mpo_element(op, "00", "00") == 1
    assert mpo_element(op, "01", "01") == 0


def test_mpo_bell():
    op = partial_trace_to_mpo(bell_mps(), 1)
    np.testing.assert_allclose(op.to_dense(), np.eye(2) / 2, atol=1e-15)


def test_mpo_matches_dense_partial_trace(rng):
    for _ in range(3):
        circ = random_ansatz(rng, 8, int(rng.integers(1, 7)))
        op = partial_trace_to_mpo(run_circuit_mps(circ), 4)
        rho = reduced_density(run_circuit(circ), 4).entries
        np.testing.assert_allclose(op.to_dense(), rho, atol=1e-9)
        assert abs(op.trace() - 1) <= 1e-8
        for _ in range(20):
            k, b = rng.integers(0, 2, 4), rng.integers(0, 2, 4)
            ki, bi = int("".join(map(str, k)), 2), int("".join(map(str, b)), 2)
            assert abs(mpo_element(op, k, b) - rho[bi, ki]) <= 1e-9
            assert abs(mpo_element(op, k, b) - np.conj(mpo_element(op, b, k))) <= 1e-12


def test_mpo_diagonal_real_nonnegative(rng):
    op = partial_trace_to_mpo(run_circuit_mps(random_ansatz(rng, 6, 4)), 3)
    diag = np.diag(op.to_dense())
    assert np.max(np.abs(diag.imag)) <= 1e-10
    assert diag.real.min() >= -1e-8


def test_mpo_size_bound(rng):
    d = 4
    op = partial_trace_to_mpo(run_circuit_mps(random_ansatz(rng, 8, d)), 4)
    chi = bond_bound(d)
    for w in op.sites:
        assert w.shape[0] <= chi**2 and w.shape[3] <= chi**2


def test_partial_trace_rejects_non_canonical():
    s = bell_mps()
    bad = s.replace({1: 2 * s.sites[1]})
    with pytest.raises(ConsistencyError):
        partial_trace_to_mpo(bad, 1)


def test_mpo_element_length_mismatch():
    op = partial_trace_to_mpo(product_state_mps(4), 2)
    with pytest.raises(DimensionError):
        mpo_element(op, "0", "00")


def test_export_roundtrip(tmp_path, rng):
    s = run_circuit_mps(random_ansatz(rng, 6, 3))
    op = partial_trace_to_mpo(s, 3)
    save_json(tmp_path / "mps.json", s)
    save_json(tmp_path / "mpo.json", op)
    s2, op2 = load_json(tmp_path / "mps.json"), load_json(tmp_path / "mpo.json")
    assert isinstance(s2, MpsState) and isinstance(op2, MpoOperator)
    for a, b in zip(s.sites, s2.sites):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(op.to_dense(), op2.to_dense())


def test_layered_and_fused_elements_agree(rng):
    op = partial_trace_to_mpo(run_circuit_mps(random_ansatz(rng, 8, 5)), 4)
    fused = MpoOperator(op.sites)
    assert op.layers is not None and fused.layers is None
    for _ in range(30):
        k, b = rng.integers(0, 2, 4), rng.integers(0, 2, 4)
        assert abs(mpo_element(op, k, b) - mpo_element(fused, k, b)) <= 1e-12
