"""Fidelity estimation, loss, and parameter-shift gradients.

Every fidelity evaluation is tagged by a tuple of non-negative integers.
In SWAP-test mode the tag, together with the master seed, seeds a private
random stream, so an evaluation's shot noise does not depend on the order
in which evaluations are scheduled.

For pure targets with exactly known overlaps the 2P shifted fidelities of
one gradient are computed in a single backward sweep: with ``phi`` the
state right after rotation ``i`` and ``lam`` the target pulled back through
the remaining gates,

    <psi| C(theta_i +- pi/2) |0> = (c +- <lam| -iP |phi>) / sqrt(2),

where ``c`` is the unshifted overlap and ``P`` the rotation's Pauli.  These
are the same numbers a circuit-by-circuit evaluation produces, at O(P)
instead of O(P^2) gate applications.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..circuit import AnsatzSpec, Gate, build_ansatz, parameter_count, shift_parameter
from ..errors import CapacityError, DimensionError, DomainError, ParameterError
from ..statevector import (
    MAX_QUBITS,
    DensityMatrix,
    ShotPlan,
    StateVector,
    apply_1q,
    apply_gate_raw,
    evolve,
    mixed_fidelity_raw,
    overlap_from_probability,
    swap_test_probability,
)

CENTRAL, PLUS, MINUS = 0, 1, 2
SQRT_GUARD = 1e-12

# -i * Pauli for each rotation kind
_KICK = {
    "RX": np.array([[0, -1j], [-1j, 0]], dtype=np.complex128),
    "RY": np.array([[0, -1], [1, 0]], dtype=np.float64),
}


@dataclass(frozen=True, eq=False)
class Target:
    """State to learn: a pure statevector or a density matrix on ``n`` qubits."""

    kind: str
    state: StateVector | None = None
    rho: DensityMatrix | None = None

    def __post_init__(self):
        if self.kind == "pure":
            if self.state is None:
                raise ParameterError("pure target needs a state")
            if abs(self.state.norm() - 1) > 1e-8:
                raise DomainError("pure target must be normalized")
        elif self.kind == "mixed":
            if self.rho is None:
                raise ParameterError("mixed target needs a density matrix")
            if not self.rho.is_valid(1e-8):
                raise DomainError("mixed target must be Hermitian, unit-trace and PSD")
        else:
            raise ParameterError(f"target kind must be 'pure' or 'mixed', got {self.kind!r}")

    @classmethod
    def pure(cls, state: StateVector) -> Target:
        return cls("pure", state=state)

    @classmethod
    def mixed(cls, rho: DensityMatrix) -> Target:
        return cls("mixed", rho=rho)

    @property
    def n(self) -> int:
        return self.state.n_qubits if self.kind == "pure" else self.rho.n_qubits

    @property
    def circuit_width(self) -> int:
        return self.n if self.kind == "pure" else 2 * self.n

    def fidelity_ceiling(self) -> float:
        """Largest reachable tr(rho rho_S): 1 for pure targets, lambda_max otherwise."""
        if self.kind == "pure":
            return 1.0
        return float(np.linalg.eigvalsh(self.rho.entries)[-1])


@dataclass(frozen=True)
class EstimatorConfig:
    """How fidelities are obtained.

    ``swap_backend`` selects how the SWAP-test ancilla probability is found
    before sampling: ``"circuit"`` simulates the full 2n+1 qubit test,
    ``"analytic"`` uses p1 = (1 - F) / 2.  Mixed targets always use the
    analytic probability.
    """

    mode: str = "exact"
    shots: int = 10000
    master_seed: int = 0
    swap_backend: str = "circuit"

    def __post_init__(self):
        if self.mode not in ("exact", "swap_test"):
            raise ParameterError(f"estimator mode must be 'exact' or 'swap_test', got {self.mode!r}")
        if self.mode == "swap_test" and self.shots < 1:
            raise ParameterError("shots must be >= 1 in swap_test mode")
        if self.swap_backend not in ("circuit", "analytic"):
            raise ParameterError(f"unknown swap_backend {self.swap_backend!r}")

    @property
    def noisy(self) -> bool:
        return self.mode == "swap_test"


def _tag_tuple(tag: int | Sequence[int]) -> tuple[int, ...]:
    return (int(tag),) if np.isscalar(tag) else tuple(int(t) for t in tag)


def loss(fidelity_value: float, kind: str = "pure") -> float:
    """1 - sqrt(F).  For pure targets sqrt(F) is |<psi_o|psi>|."""
    if kind not in ("pure", "mixed"):
        raise ParameterError(f"unknown target kind {kind!r}")
    if not 0.0 <= fidelity_value <= 1.0:
        raise DomainError(f"fidelity {fidelity_value!r} outside [0, 1]")
    return 1.0 - math.sqrt(fidelity_value)


def chain_factor(F: float, guard: float = SQRT_GUARD) -> float:
    """d(1 - sqrt F)/dF, regularized below ``guard``."""
    return -0.5 / math.sqrt(F if F >= guard else F + guard)


class FidelityEvaluator:
    """Counts and performs fidelity evaluations for one (spec, target, estimator)."""

    def __init__(self, spec: AnsatzSpec, target: Target, est: EstimatorConfig, workers: int = 1):
        if spec.n_qubits != target.circuit_width:
            raise DimensionError(
                f"{target.kind} target on {target.n} qubits needs circuit width "
                f"{target.circuit_width}, spec has {spec.n_qubits}"
            )
        if spec.n_qubits > MAX_QUBITS:
            raise CapacityError(f"width {spec.n_qubits} exceeds dense capacity")
        if est.noisy and target.kind == "pure" and est.swap_backend == "circuit" and 2 * target.n + 1 > MAX_QUBITS:
            raise CapacityError(f"SWAP test on {2 * target.n + 1} qubits exceeds dense capacity")
        self.spec, self.target, self.est = spec, target, est
        self.workers = max(1, int(workers))
        self.n_params = parameter_count(spec)
        self.n_evals = 0
        if target.kind == "pure":
            amps = target.state.amplitudes
            real = spec.rotation_scheme == "ry_only" and not np.any(amps.imag)
            self._dtype = np.float64 if real else np.complex128
            self._psi = amps.real.copy() if real else amps
        else:
            self._dtype = np.complex128

    # -- exact quantities --------------------------------------------------

    def output_state(self, theta: np.ndarray) -> np.ndarray:
        w = self.spec.n_qubits
        psi = np.zeros(1 << w, dtype=self._dtype)
        psi[0] = 1.0
        return evolve(psi, build_ansatz(self.spec, theta).gates, w)

    def _exact(self, theta: np.ndarray) -> float:
        out = self.output_state(theta)
        if self.target.kind == "pure":
            return min(1.0, abs(np.vdot(self._psi, out)) ** 2)
        return mixed_fidelity_raw(out, self.target.rho.entries)

    def exact_fidelity(self, theta: Sequence[float]) -> float:
        """Noise-free fidelity; not counted as an evaluation."""
        return self._exact(np.asarray(theta, dtype=float))

    def _rng(self, tag: tuple[int, ...]) -> np.random.Generator:
        return np.random.default_rng([self.est.master_seed, *tag])

    def _sample(self, p1: float, tag: tuple[int, ...]) -> float:
        plan = ShotPlan(self.est.shots)
        return min(1.0, overlap_from_probability(p1, plan, self._rng(tag)) ** 2)

    def _evaluate_one(self, theta: np.ndarray, tag: tuple[int, ...]) -> float:
        if not self.est.noisy:
            return self._exact(theta)
        if self.target.kind == "pure" and self.est.swap_backend == "circuit":
            out = StateVector(self.output_state(theta).astype(np.complex128))
            p1 = swap_test_probability(self.target.state, out)
        else:
            p1 = (1.0 - self._exact(theta)) / 2
        return self._sample(p1, tag)

    def fidelity(self, theta: Sequence[float], tag: int | Sequence[int] = 0) -> float:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ParameterError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        self.n_evals += 1
        return self._evaluate_one(theta, _tag_tuple(tag))

    # -- gradient batches ----------------------------------------------------

    def _sweep_overlaps(self, theta: np.ndarray) -> tuple[complex, np.ndarray]:
        """Unshifted overlap c and k_i = <lam_i| -iP |phi_i> for every parameter."""
        circuit = build_ansatz(self.spec, theta)
        w = circuit.width
        phi = self.output_state(theta)
        lam = self._psi.astype(self._dtype, copy=True)
        c = np.vdot(lam, phi)
        k = np.zeros(self.n_params, dtype=np.complex128)
        slot_param = {pos: i for i, pos in enumerate(circuit.param_slots)}
        for pos in range(len(circuit.gates) - 1, -1, -1):
            g = circuit.gates[pos]
            if pos in slot_param:
                kicked = apply_1q(phi, _KICK[g.kind], g.qubits[0], w)
                k[slot_param[pos]] = np.vdot(lam, kicked)
                inv = Gate(g.kind, g.qubits, -g.angle)
            else:
                inv = g  # CNOT / X / H / SWAP are involutions
            phi = apply_gate_raw(phi, inv, w)
            lam = apply_gate_raw(lam, inv, w)
        return complex(c), k

    def shifted_fidelities(self, theta: Sequence[float], iteration: int = 0) -> tuple[float, np.ndarray, np.ndarray]:
        """Central F(theta) and F(theta_i +- pi/2) for every i: 2P + 1 evaluations.

        Tags are (iteration, CENTRAL, 0), (iteration, PLUS, i), (iteration, MINUS, i).
        """
        theta = np.asarray(theta, dtype=float)
        P = self.n_params
        if theta.shape != (P,):
            raise ParameterError(f"expected {P} parameters, got shape {theta.shape}")
        self.n_evals += 2 * P + 1
        tags = [(iteration, CENTRAL, 0)]
        tags += [(iteration, PLUS, i) for i in range(P)]
        tags += [(iteration, MINUS, i) for i in range(P)]

        analytic = self.target.kind == "pure" and (not self.est.noisy or self.est.swap_backend == "analytic")
        if analytic:
            c, k = self._sweep_overlaps(theta)
            fids = np.concatenate([[abs(c) ** 2], np.abs((c + k) / math.sqrt(2)) ** 2, np.abs((c - k) / math.sqrt(2)) ** 2])
            fids = np.minimum(fids, 1.0)
            if self.est.noisy:
                fids = np.array([self._sample((1.0 - f) / 2, t) for f, t in zip(fids, tags)])
        else:
            thetas = [theta]
            thetas += [shift_parameter(theta, i, +1) for i in range(P)]
            thetas += [shift_parameter(theta, i, -1) for i in range(P)]
            if self.workers > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    fids = np.array(list(pool.map(self._evaluate_one, thetas, tags)))
            else:
                fids = np.array([self._evaluate_one(t, tag) for t, tag in zip(thetas, tags)])
        return float(fids[0]), fids[1 : P + 1], fids[P + 1 :]

    def loss_and_gradient(self, theta: Sequence[float], iteration: int = 0) -> tuple[float, np.ndarray, float]:
        """(loss, d loss / d theta, central fidelity) from one batch of 2P + 1 evaluations."""
        F, f_plus, f_minus = self.shifted_fidelities(theta, iteration)
        dF = 0.5 * (f_plus - f_minus)
        return loss(F, self.target.kind), chain_factor(F, self.guard) * dF, F

    @property
    def guard(self) -> float:
        # a shot estimate below one count's worth of fidelity is indistinguishable from 0
        return max(SQRT_GUARD, 1.0 / self.est.shots) if self.est.noisy else SQRT_GUARD


def fidelity(
    theta: Sequence[float],
    spec: AnsatzSpec,
    target: Target,
    est: EstimatorConfig = EstimatorConfig(),
    eval_tag: int | Sequence[int] = 0,
) -> float:
    """One fidelity evaluation; deterministic given (master_seed, eval_tag)."""
    return FidelityEvaluator(spec, target, est).fidelity(theta, eval_tag)


def gradient_parameter_shift(
    theta: Sequence[float],
    spec: AnsatzSpec,
    target: Target,
    est: EstimatorConfig = EstimatorConfig(),
    iteration: int = 0,
) -> np.ndarray:
    """Loss gradient from the +-pi/2 shift rule and the chain rule."""
    return FidelityEvaluator(spec, target, est).loss_and_gradient(theta, iteration)[1]
