"""Right-canonical matrix-product-state circuit simulator.

Site tensors have index order (left bond, physical, right bond).  Every
site is kept right-canonical: ``sum_{s,b} B[a,s,b] conj(B[a',s,b]) = delta``.
After a two-site update the singular values are absorbed into the left
tensor, so the right-canonical form is preserved without a sweep and the
norm of the state lives in the first site.

Tracing out a suffix of a right-canonical MPS is free: the traced
environment is the identity on the cut bond.  :func:`partial_trace_to_mpo`
exploits that to turn the kept prefix into a matrix product operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .errors import CapacityError, ConsistencyError, DimensionError, UsageError
from .statevector import MAX_QUBITS, StateVector
from .tensor import contract, reshape, svd

DEFAULT_SVD_TOL = 1e-12

_SWAP4 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


def _bits(bits: str | Sequence[int], n: int) -> list[int]:
    out = [int(b) for b in bits]
    if len(out) != n:
        raise DimensionError(f"expected {n} bits, got {len(out)}")
    if any(b not in (0, 1) for b in out):
        raise DimensionError(f"bits must be 0/1, got {bits!r}")
    return out


@dataclass(frozen=True, eq=False)
class MpsState:
    sites: tuple[np.ndarray, ...]

    def __post_init__(self):
        sites = tuple(np.asarray(s, dtype=np.complex128) for s in self.sites)
        if not sites:
            raise DimensionError("an MPS needs at least one site")
        for i, s in enumerate(sites):
            if s.ndim != 3 or s.shape[1] != 2:
                raise DimensionError(f"site {i} has shape {s.shape}, expected (a, 2, b)")
        if sites[0].shape[0] != 1 or sites[-1].shape[2] != 1:
            raise DimensionError("boundary bonds must have extent 1")
        for i in range(len(sites) - 1):
            if sites[i].shape[2] != sites[i + 1].shape[0]:
                raise DimensionError(f"bond mismatch between sites {i} and {i + 1}")
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.sites)

    def bond_dimensions(self) -> list[int]:
        """Extents of the n-1 internal bonds."""
        return [s.shape[2] for s in self.sites[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dimensions(), default=1)

    def replace(self, updates: dict[int, np.ndarray]) -> MpsState:
        sites = list(self.sites)
        for i, t in updates.items():
            sites[i] = t
        return MpsState(tuple(sites))

    def to_dict(self) -> dict:
        return {"n": self.n, "sites": [_tensor_record(s) for s in self.sites]}


def bond_dimension(state: MpsState) -> int:
    return state.max_bond


def product_state_mps(n: int) -> MpsState:
    """|0...0> with every bond of extent 1."""
    if n < 1:
        raise DimensionError("n must be >= 1")
    site = np.zeros((1, 2, 1), dtype=np.complex128)
    site[0, 0, 0] = 1.0
    return MpsState(tuple(site.copy() for _ in range(n)))


def apply_single_qubit_mps(state: MpsState, gate: Gate, site: int | None = None) -> MpsState:
    if len(gate.qubits) != 1:
        raise UsageError(f"{gate} is not a single-qubit gate")
    site = gate.qubits[0] if site is None else site
    if not 0 <= site < state.n:
        raise UsageError(f"site {site} out of range for {state.n} sites")
    b = state.sites[site]
    new = np.moveaxis(contract(gate.matrix(), [1], b, [1]), 0, 1)
    return state.replace({site: np.ascontiguousarray(new)})


def _split(theta: np.ndarray, chi_max: int | None, svd_tol: float) -> tuple[np.ndarray, np.ndarray, int]:
    """SVD-split a (a, 2, 2, b) block into left (a, 2, k) and right (k, 2, b)."""
    a, _, _, b = theta.shape
    res = svd(reshape(theta, (2 * a, 2 * b)))
    s = res.s
    keep = int(np.count_nonzero(s >= svd_tol * s[0])) if s[0] > 0 else 1
    keep = max(1, keep)
    if chi_max is not None:
        keep = min(keep, chi_max)
    left = res.u[:, :keep] * s[:keep]
    right = res.vdag[:keep, :]
    return reshape(left, (a, 2, keep)), reshape(np.ascontiguousarray(right), (keep, 2, b)), keep


def apply_two_qubit_mps(
    state: MpsState,
    gate: Gate,
    left_site: int | None = None,
    chi_max: int | None = None,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> MpsState:
    """Apply a nearest-neighbour two-qubit gate and re-split by SVD.

    Singular values below ``svd_tol * s_max`` are dropped and at most
    ``chi_max`` are kept (``None`` = unbounded).
    """
    if len(gate.qubits) != 2:
        raise UsageError(f"{gate} is not a two-qubit gate")
    q0, q1 = gate.qubits
    lo = min(q0, q1)
    if abs(q0 - q1) != 1:
        raise UsageError(f"{gate} acts on non-adjacent qubits")
    if left_site is not None and left_site != lo:
        raise UsageError(f"{gate} does not act on ({left_site}, {left_site + 1})")
    if q1 >= state.n or q0 >= state.n:
        raise UsageError(f"{gate} out of range for {state.n} sites")
    u = gate.matrix()
    if q0 > q1:
        u = _SWAP4 @ u @ _SWAP4
    bl, br = state.sites[lo], state.sites[lo + 1]
    theta = contract(bl, [2], br, [0])  # (a, s1, s2, b)
    theta = contract(reshape(u, (2, 2, 2, 2)), [2, 3], theta, [1, 2])  # (s1', s2', a, b)
    theta = np.ascontiguousarray(theta.transpose(2, 0, 1, 3))
    left, right, _ = _split(theta, chi_max, svd_tol)
    return state.replace({lo: left, lo + 1: right})


def run_circuit_mps(circuit: Circuit, chi_max: int | None = None, svd_tol: float = DEFAULT_SVD_TOL) -> MpsState:
    state = product_state_mps(circuit.width)
    for g in circuit.gates:
        if len(g.qubits) == 1:
            state = apply_single_qubit_mps(state, g)
        elif len(g.qubits) == 2:
            state = apply_two_qubit_mps(state, g, chi_max=chi_max, svd_tol=svd_tol)
        else:
            raise UsageError(f"{g}: gates on more than two qubits are not supported by the MPS simulator")
    return state


def amplitude(state: MpsState, bits: str | Sequence[int]) -> complex:
    """<bits|state>, contracting the selected bond matrices left to right."""
    v = np.ones(1, dtype=np.complex128)
    for site, b in zip(state.sites, _bits(bits, state.n)):
        v = v @ site[:, b, :]
    return complex(v[0])


def mps_to_statevector(state: MpsState) -> StateVector:
    if state.n > MAX_QUBITS:
        raise CapacityError(f"{state.n} sites exceed dense capacity {MAX_QUBITS}")
    psi = state.sites[0].reshape(2, -1)
    for site in state.sites[1:]:
        chi_r = site.shape[2]
        psi = (psi @ site.reshape(site.shape[0], -1)).reshape(-1, chi_r)
    return StateVector(psi.reshape(-1))


def check_right_canonical(state: MpsState, tol: float = 1e-10, sites: Sequence[int] | None = None) -> bool:
    """True iff each (selected) site contracts with its conjugate to the identity."""
    indices = range(state.n) if sites is None else sites
    for i in indices:
        b = state.sites[i]
        m = b.reshape(b.shape[0], -1)
        if np.max(np.abs(m @ m.conj().T - np.eye(b.shape[0]))) > tol:
            return False
    return True


@dataclass(frozen=True, eq=False)
class MpoOperator:
    """Reduced density operator as a chain of rank-4 site tensors.

    Site ``l`` has shape (a*a', 2, 2, b*b'): the ket-layer and
    conjugate-layer bonds are fused, the middle indices are (row, column)
    of the operator.  The last site's right bond is already contracted.

    ``layers`` optionally keeps the unfused ket-layer tensors (a, 2, b) the
    sites were built from; element extraction then works on the two layers
    separately in O(chi^3) per site instead of O(chi^4).
    """

    sites: tuple[np.ndarray, ...]
    layers: tuple[np.ndarray, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def size(self) -> int:
        return sum(s.size for s in self.sites)

    def trace(self) -> complex:
        v = np.ones(1, dtype=np.complex128)
        for w in self.sites:
            v = v @ (w[:, 0, 0, :] + w[:, 1, 1, :])
        return complex(v[0])

    def to_dense(self) -> np.ndarray:
        if 2 * self.n > MAX_QUBITS:
            raise CapacityError(f"dense {self.n}-qubit operator exceeds capacity")
        r = self.sites[0][0]  # (2, 2, D)
        for w in self.sites[1:]:
            rows, cols, _ = r.shape
            r = np.einsum("ijd,dste->isjte", r, w).reshape(rows * 2, cols * 2, w.shape[3])
        return r[:, :, 0]

    def to_dict(self) -> dict:
        d = {"n": self.n, "sites": [_tensor_record(s) for s in self.sites]}
        if self.layers is not None:
            d["layers"] = [_tensor_record(b) for b in self.layers]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MpoOperator:
        layers = d.get("layers")
        return cls(
            tuple(_tensor_from_record(r) for r in d["sites"]),
            None if layers is None else tuple(_tensor_from_record(r) for r in layers),
        )


def partial_trace_to_mpo(state: MpsState, keep_first: int, tol: float = 1e-8) -> MpoOperator:
    """Trace out every site after ``keep_first`` and return the kept block as an MPO.

    Raises ConsistencyError if the traced sites are not right-canonical
    within ``tol``, since the identity-environment shortcut would then be
    wrong.
    """
    if not 1 <= keep_first < state.n:
        raise DimensionError(f"keep_first must be in 1..{state.n - 1}, got {keep_first}")
    if not check_right_canonical(state, tol, sites=range(keep_first, state.n)):
        raise ConsistencyError("traced sites are not right-canonical; cannot use identity environment")
    out = []
    for i in range(keep_first):
        b = state.sites[i]
        a, _, c = b.shape
        if i < keep_first - 1:
            w = np.einsum("asb,ctd->acstbd", b, b.conj()).reshape(a * a, 2, 2, c * c)
        else:
            w = np.einsum("asb,ctb->acst", b, b.conj()).reshape(a * a, 2, 2, 1)
        out.append(np.ascontiguousarray(w))
    return MpoOperator(tuple(out), tuple(state.sites[:keep_first]))


def mpo_element(op: MpoOperator, ket_bits: str | Sequence[int], bra_bits: str | Sequence[int]) -> complex:
    """<bra|rho|ket> by sequential contraction of the selected bond matrices."""
    ket = _bits(ket_bits, op.n)
    bra = _bits(bra_bits, op.n)
    if op.layers is not None:
        # m[a, a'] carries the ket layer (row index) and conjugate layer (column index)
        m = np.ones((1, 1), dtype=np.complex128)
        for b, r, c in zip(op.layers, bra, ket):
            m = b[:, r, :].T @ m @ b[:, c, :].conj()
        return complex(np.trace(m))
    v = np.ones(1, dtype=np.complex128)
    for w, r, c in zip(op.sites, bra, ket):
        v = v @ w[:, r, c, :]
    return complex(v[0])


# ------------------------------------------------------------------- I/O


def _tensor_record(t: np.ndarray) -> dict:
    flat = np.ascontiguousarray(t, dtype=np.complex128).reshape(-1).view(np.float64)
    return {"shape": list(t.shape), "data": flat.tolist()}


def _tensor_from_record(r: dict) -> np.ndarray:
    data = np.asarray(r["data"], dtype=np.float64).view(np.complex128)
    return data.reshape(r["shape"])


def save_json(path: str | Path, obj: MpsState | MpoOperator) -> None:
    """Write site count, per-site shapes and interleaved (re, im) data."""
    kind = "mpo" if isinstance(obj, MpoOperator) else "mps"
    Path(path).write_text(json.dumps({"kind": kind, **obj.to_dict()}))


def load_json(path: str | Path) -> MpsState | MpoOperator:
    d = json.loads(Path(path).read_text())
    if d["kind"] == "mpo":
        return MpoOperator.from_dict(d)
    return MpsState(tuple(_tensor_from_record(r) for r in d["sites"]))


def bond_bound(depth: int) -> int:
    """Largest bond reachable by ``depth`` brickwork CNOT layers."""
    return 2 ** math.ceil(depth / 2)
