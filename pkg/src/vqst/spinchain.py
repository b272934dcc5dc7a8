"""Open XXZ chain in a field, and its ground state by Lanczos.

    H = sum_{l<L} [J (X_l X_{l+1} + Y_l Y_{l+1}) + Delta Z_l Z_{l+1}] + h sum_l Z_l

with Z|0> = +|0>.  Basis ordering follows :mod:`vqst.statevector` (spin 0
is the most significant bit).  The XX+YY term acts as ``2J`` times a swap
of antiparallel neighbours, which is how :func:`hamiltonian_matvec` applies
it without building a matrix.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import CapacityError, ConvergenceError, DimensionError, ParameterError
from .statevector import MAX_QUBITS, StateVector

log = logging.getLogger(__name__)

DENSE_MAX_L = 12
DEGENERACY_TOL = 1e-8

_I2 = np.eye(2)
_PX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_PY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_PZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)


@dataclass(frozen=True)
class XXZParams:
    L: int
    J: float = 1.0
    Delta: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError("L must be >= 1")
        if not all(math.isfinite(x) for x in (self.J, self.Delta, self.h)):
            raise ParameterError("couplings must be finite")


@dataclass(frozen=True, eq=False)
class GroundState:
    energy: float
    vector: StateVector
    params: XXZParams
    residual: float
    gap_estimate: float = math.inf
    iterations: int = 0
    degenerate: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "degenerate", bool(self.gap_estimate < DEGENERACY_TOL))


def _diagonal(params: XXZParams) -> np.ndarray:
    L = params.L
    idx = np.arange(1 << L)
    # spin l sits at bit L-1-l
    z = 1 - 2 * ((idx[None, :] >> (L - 1 - np.arange(L))[:, None]) & 1)
    diag = params.h * z.sum(axis=0).astype(float)
    if L > 1:
        diag += params.Delta * (z[:-1] * z[1:]).sum(axis=0)
    return diag


class XXZOperator:
    """Matrix-free XXZ Hamiltonian with a cached diagonal."""

    def __init__(self, params: XXZParams):
        if params.L > MAX_QUBITS:
            raise CapacityError(f"L={params.L} exceeds capacity {MAX_QUBITS}")
        self.params = params
        self.dim = 1 << params.L
        self.diag = _diagonal(params)
        self.n_matvec = 0

    def __call__(self, v: np.ndarray) -> np.ndarray:
        L, J = self.params.L, self.params.J
        if v.shape != (self.dim,):
            raise DimensionError(f"vector of length {v.shape} for L={L}")
        self.n_matvec += 1
        out = self.diag * v
        if J != 0 and L > 1:
            t = v.reshape((2,) * L)
            o = out.reshape((2,) * L)
            for l in range(L - 1):
                lead = (slice(None),) * l
                o[lead + (0, 1)] += 2 * J * t[lead + (1, 0)]
                o[lead + (1, 0)] += 2 * J * t[lead + (0, 1)]
        return out


def hamiltonian_matvec(params: XXZParams, v: StateVector | np.ndarray) -> StateVector:
    """H v (unnormalized)."""
    arr = v.amplitudes if isinstance(v, StateVector) else np.asarray(v)
    if arr.size != 1 << params.L:
        raise DimensionError(f"vector of length {arr.size} for L={params.L}")
    return StateVector(XXZOperator(params)(arr.astype(np.complex128)))


def _site_operator(op: np.ndarray, site: int, L: int) -> np.ndarray:
    mats = [op if k == site else _I2 for k in range(L)]
    return reduce(np.kron, mats)


def dense_hamiltonian(params: XXZParams) -> np.ndarray:
    """Explicit Kronecker-product matrix; a test oracle for small chains."""
    L = params.L
    if L > DENSE_MAX_L:
        raise CapacityError(f"dense Hamiltonian limited to L <= {DENSE_MAX_L}")
    dim = 1 << L
    H = np.zeros((dim, dim), dtype=np.complex128)
    for l in range(L - 1):
        for op, c in ((_PX, params.J), (_PY, params.J), (_PZ, params.Delta)):
            H += c * _site_operator(op, l, L) @ _site_operator(op, l + 1, L)
    for l in range(L):
        H += params.h * _site_operator(_PZ, l, L)
    return H.real.copy()


def _lanczos_pass(matvec, v0: np.ndarray, m: int, deflate: np.ndarray | None):
    """One Lanczos run with full reorthogonalization.

    Returns (ritz values, ritz vector of the lowest, basis size).
    """
    dim = v0.size
    m = min(m, dim)
    V = np.zeros((m, dim))
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v0
    k = m
    for j in range(m):
        w = matvec(V[j])
        if deflate is not None:
            w -= deflate * (deflate @ w)
        alpha[j] = V[j] @ w
        # two rounds of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            w -= V[: j + 1].T @ (V[: j + 1] @ w)
            if deflate is not None:
                w -= deflate * (deflate @ w)
        b = np.linalg.norm(w)
        if j == m - 1:
            break
        if b < 1e-12 * max(1.0, abs(alpha[j])):
            k = j + 1
            break
        beta[j] = b
        V[j + 1] = w / b
    T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    evals, evecs = np.linalg.eigh(T)
    x = V[:k].T @ evecs[:, 0]
    return evals, x / np.linalg.norm(x), k


def _lowest_eigenpair(matvec, dim, rng, tol, max_iter, krylov_dim, deflate=None):
    v = rng.standard_normal(dim)
    if deflate is not None:
        v -= deflate * (deflate @ v)
    v /= np.linalg.norm(v)
    best = math.inf
    for restart in range(1, max_iter + 1):
        evals, x, _ = _lanczos_pass(matvec, v, krylov_dim, deflate)
        hx = matvec(x)
        if deflate is not None:
            hx -= deflate * (deflate @ hx)
        energy = float(x @ hx)
        residual = float(np.linalg.norm(hx - energy * x))
        best = min(best, residual)
        if residual <= tol:
            return energy, x, residual, restart
        v = x
    raise ConvergenceError(f"Lanczos did not reach residual {tol:g} in {max_iter} restarts", residual=best)


def fix_phase(v: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Rotate the global phase so the first significant amplitude is real positive."""
    mags = np.abs(v)
    first = int(np.argmax(mags > rel_tol * mags.max()))
    return v * (abs(v[first]) / v[first])


def ground_state_lanczos(
    params: XXZParams,
    tol: float = 1e-10,
    max_iter: int = 200,
    seed: int = 0,
    krylov_dim: int = 60,
    check_degeneracy: bool = True,
) -> GroundState:
    """Lowest eigenpair of the XXZ chain by restarted Lanczos.

    ``max_iter`` bounds the number of restarts, each building a Krylov basis
    of at most ``krylov_dim`` vectors.  When ``check_degeneracy`` is set a
    second, deflated run estimates the gap to the next level.
    """
    op = XXZOperator(params)
    rng = np.random.default_rng(seed)
    energy, x, residual, its = _lowest_eigenpair(op, op.dim, rng, tol, max_iter, krylov_dim)
    gap = math.inf
    if check_degeneracy and op.dim > 1:
        try:
            e1, *_ = _lowest_eigenpair(op, op.dim, rng, max(tol, 1e-9), max_iter, krylov_dim, deflate=x)
            gap = e1 - energy
        except ConvergenceError as exc:
            log.warning("gap estimate did not converge (residual %.3g)", exc.residual)
    gs = GroundState(
        energy=energy,
        vector=StateVector(fix_phase(x.astype(np.complex128))),
        params=params,
        residual=residual,
        gap_estimate=gap,
        iterations=its,
    )
    if gs.degenerate:
        log.warning("ground state of %s is (near-)degenerate: gap %.3g", params, gap)
    return gs


def energy_expectation(state: StateVector, params: XXZParams) -> float:
    if state.n_qubits != params.L:
        raise DimensionError(f"state on {state.n_qubits} qubits, chain has L={params.L}")
    hv = XXZOperator(params)(state.amplitudes)
    return float(np.vdot(state.amplitudes, hv).real)
