"""Dense statevector simulator and SWAP-test fidelity estimation.

Basis index convention: qubit 0 is the most significant bit, so the index
of ``|s_0 s_1 ... s_{n-1}>`` is ``int("s_0 s_1 ... s_{n-1}", 2)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, Gate
from .errors import CapacityError, DimensionError, ParameterError

MAX_QUBITS = 26


def _check_capacity(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"{n} qubits outside the dense range 1..{MAX_QUBITS}")


def _n_from_length(length: int) -> int:
    n = length.bit_length() - 1
    if length < 2 or 1 << n != length:
        raise DimensionError(f"length {length} is not a power of two >= 2")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        _check_capacity(_n_from_length(amps.size))
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __len__(self):
        return self.amplitudes.size


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {m.shape}")
        _n_from_length(m.shape[0])
        object.__setattr__(self, "entries", m)

    @property
    def n_qubits(self) -> int:
        return self.entries.shape[0].bit_length() - 1

    def is_valid(self, tol: float = 1e-10) -> bool:
        m = self.entries
        if np.max(np.abs(m - m.conj().T)) > tol or abs(np.trace(m) - 1) > tol:
            return False
        return bool(np.linalg.eigvalsh(m).min() >= -tol)

    @classmethod
    def from_pure(cls, state: StateVector) -> DensityMatrix:
        a = state.amplitudes
        return cls(np.outer(a, a.conj()))


@dataclass(frozen=True)
class ShotPlan:
    """``shots=None`` means exact (infinite-shot) estimation."""

    shots: int | None = None
    rng_seed: int | Sequence[int] = 0

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ParameterError("shots must be >= 1 (or None for exact)")

    @property
    def exact(self) -> bool:
        return self.shots is None


EXACT = ShotPlan(None)


# ---------------------------------------------------------------- kernels
# Raw-array kernels.  They accept real or complex arrays and never modify
# their input.


def apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    r = 1 << (n - q - 1)
    if r <= 8:
        # narrow trailing block: one GEMM against kron(u^T, I_r)
        m = np.kron(u.T, np.eye(r, dtype=u.dtype)) if r > 1 else u.T
        return (psi.reshape(-1, 2 * r) @ m).reshape(-1)
    return np.matmul(u, psi.reshape(1 << q, 2, r)).reshape(-1)


def _index(n: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * n
    for q, bit in fixed.items():
        idx[q] = bit
    return tuple(idx)


def apply_cnot(psi: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    v = psi.reshape((2,) * n)
    out = v.copy()
    out[_index(n, {control: 1, target: 0})] = v[_index(n, {control: 1, target: 1})]
    out[_index(n, {control: 1, target: 1})] = v[_index(n, {control: 1, target: 0})]
    return out.reshape(-1)


def apply_swap(psi: np.ndarray, a: int, b: int, n: int, control: int | None = None) -> np.ndarray:
    v = psi.reshape((2,) * n)
    out = v.copy()
    c = {} if control is None else {control: 1}
    out[_index(n, {**c, a: 0, b: 1})] = v[_index(n, {**c, a: 1, b: 0})]
    out[_index(n, {**c, a: 1, b: 0})] = v[_index(n, {**c, a: 0, b: 1})]
    return out.reshape(-1)


def apply_matrix(psi: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to ``qubits`` (first listed = most significant)."""
    k = len(qubits)
    v = psi.reshape((2,) * n)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, v, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits)).reshape(-1)


def apply_gate_raw(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    q = gate.qubits
    if max(q) >= n:
        raise ParameterError(f"{gate} out of range for {n} qubits")
    if gate.kind == "CNOT":
        return apply_cnot(psi, q[0], q[1], n)
    if gate.kind == "SWAP":
        return apply_swap(psi, q[0], q[1], n)
    if gate.kind == "CSWAP":
        return apply_swap(psi, q[1], q[2], n, control=q[0])
    return apply_1q(psi, gate.matrix(), q[0], n)


def evolve(psi: np.ndarray, gates: Iterable[Gate], n: int) -> np.ndarray:
    for g in gates:
        psi = apply_gate_raw(psi, g, n)
    return psi


# ------------------------------------------------------------- public API


def zero_state(n: int) -> StateVector:
    _check_capacity(n)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps)


def basis_state(bits: str) -> StateVector:
    """``basis_state("10")`` is |10>, i.e. qubit 0 in |1>."""
    amps = np.zeros(1 << len(bits), dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    return StateVector(apply_gate_raw(state.amplitudes, gate, state.n_qubits))


def run_circuit(circuit: Circuit) -> StateVector:
    _check_capacity(circuit.width)
    return StateVector(evolve(zero_state(circuit.width).amplitudes, circuit.gates, circuit.width))


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"width mismatch: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def reduced_density(state: StateVector, keep_first: int) -> DensityMatrix:
    """Partial trace over every qubit after the first ``keep_first``."""
    n = state.n_qubits
    if not 1 <= keep_first < n:
        raise DimensionError(f"keep_first must be in 1..{n - 1}, got {keep_first}")
    if 2 * keep_first > MAX_QUBITS:
        raise CapacityError(f"dense reduced density on {keep_first} qubits exceeds capacity")
    m = state.amplitudes.reshape(1 << keep_first, -1)
    return DensityMatrix(m @ m.conj().T)


def mixed_fidelity_raw(psi_o: np.ndarray, rho: np.ndarray) -> float:
    """<psi_o| rho (x) I |psi_o> for raw arrays, clamped to [0, 1]."""
    dim = rho.shape[0]
    m = psi_o.reshape(dim, -1)
    value = np.vdot(m, rho @ m).real
    return float(min(1.0, max(0.0, value)))


def exact_mixed_fidelity(psi_o: StateVector, rho: DensityMatrix) -> float:
    """tr(rho . tr_A|psi_o><psi_o|), with the first n qubits of psi_o kept."""
    if psi_o.n_qubits != 2 * rho.n_qubits:
        raise DimensionError(f"need a {2 * rho.n_qubits}-qubit state, got {psi_o.n_qubits}")
    return mixed_fidelity_raw(psi_o.amplitudes, rho.entries)


def swap_test_circuit(n: int) -> Circuit:
    """(H x I)(c-SWAP)(H x I) on ancilla 0, registers 1..n and n+1..2n."""
    gates = [Gate("H", (0,))]
    gates += [Gate("CSWAP", (0, 1 + k, 1 + n + k)) for k in range(n)]
    gates.append(Gate("H", (0,)))
    return Circuit(2 * n + 1, tuple(gates))


def swap_test_probability(psi: StateVector, psi_o: StateVector) -> float:
    """Exact probability of reading the SWAP-test ancilla in |1>.

    Simulates the full 2n+1 qubit register ``|0>|psi>|psi_o>``.
    """
    n = psi.n_qubits
    if psi_o.n_qubits != n:
        raise DimensionError(f"width mismatch: {n} vs {psi_o.n_qubits}")
    width = 2 * n + 1
    _check_capacity(width)
    joint = np.kron(psi.amplitudes, psi_o.amplitudes)
    full = np.concatenate([joint, np.zeros_like(joint)])
    full = evolve(full, swap_test_circuit(n).gates, width)
    p1 = float(np.vdot(full[full.size // 2 :], full[full.size // 2 :]).real)
    return min(1.0, max(0.0, p1))


def overlap_from_probability(p1: float, plan: ShotPlan, rng: np.random.Generator | None = None) -> float:
    """|<psi|psi_o>| estimate from the ancilla probability, with shot noise if requested."""
    if not plan.exact:
        if rng is None:
            rng = np.random.default_rng(plan.rng_seed)
        p1 = rng.binomial(plan.shots, p1) / plan.shots
    return math.sqrt(max(0.0, 1.0 - 2.0 * p1))


def swap_test(psi: StateVector, psi_o: StateVector, plan: ShotPlan = EXACT, rng: np.random.Generator | None = None) -> float:
    """SWAP-test estimate of |<psi|psi_o>|.

    With finite shots one binomial count is drawn from ``rng`` (or a
    generator seeded from ``plan.rng_seed``); a negative radicand is clamped
    to zero.
    """
    return overlap_from_probability(swap_test_probability(psi, psi_o), plan, rng)


# ------------------------------------------------------------------- I/O


def write_statevector(path: str | Path, state: StateVector) -> None:
    """Binary dump: int32 n, then 2^n little-endian (re, im) double pairs."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<i", state.n_qubits))
        fh.write(state.amplitudes.astype("<c16").tobytes())


def read_statevector(path: str | Path) -> StateVector:
    raw = Path(path).read_bytes()
    (n,) = struct.unpack("<i", raw[:4])
    _check_capacity(n)
    amps = np.frombuffer(raw[4:], dtype="<c16")
    if amps.size != 1 << n:
        raise DimensionError(f"file holds {amps.size} amplitudes, header says n={n}")
    return StateVector(amps.astype(np.complex128))
