"""Gates, the layered brickwork ansatz, and the theta <-> gate-angle map.

Qubits are 0-based internally.  Human-readable output (``str(gate)``) uses
1-based labels so that qubit 1 is the leftmost ket entry and the most
significant bit of a basis index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError

ROTATIONS = ("RX", "RY")
ARITY = {"RX": 1, "RY": 1, "H": 1, "X": 1, "CNOT": 2, "SWAP": 2, "CSWAP": 3}
ROTATION_SCHEMES = ("alternating_xy", "ry_only")

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    """2x2 matrix of ``RX(angle)`` or ``RY(angle)``, i.e. exp(-i angle P / 2)."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    raise ParameterError(f"not a rotation gate: {kind!r}")


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise ParameterError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise ParameterError(f"{self.kind} acts on {ARITY[self.kind]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ParameterError(f"repeated qubit in {self.kind}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ParameterError(f"negative qubit index in {self.qubits}")
        if self.kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ParameterError(f"{self.kind} needs one finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ParameterError(f"{self.kind} takes no angle")

    def matrix(self) -> np.ndarray:
        """Unitary on ``self.qubits``; the first listed qubit is the most significant."""
        if self.kind in ROTATIONS:
            return rotation_matrix(self.kind, self.angle)
        if self.kind == "H":
            return _H
        if self.kind == "X":
            return _X
        if self.kind == "CNOT":
            return _CNOT
        if self.kind == "SWAP":
            return _SWAP
        u = np.eye(8, dtype=np.complex128)
        u[4:, 4:] = _SWAP
        return u

    def to_dict(self) -> dict:
        return {"kind": self.kind, "qubits": list(self.qubits), "angle": self.angle}

    @classmethod
    def from_dict(cls, d: dict) -> Gate:
        return cls(d["kind"], tuple(d["qubits"]), d.get("angle"))

    def __str__(self):
        where = ",".join(str(q + 1) for q in self.qubits)
        if self.kind in ROTATIONS:
            return f"{self.kind}({self.angle:.6g})@{where}"
        return f"{self.kind}@{where}"


@dataclass(frozen=True)
class AnsatzSpec:
    """Layout of the layered ansatz.

    ``n_qubits`` is the circuit width: the number of target qubits for pure
    targets, twice that for mixed targets (purification register).
    """

    n_qubits: int
    depth: int
    rotation_scheme: str = "ry_only"
    cnot_pattern: str = "brickwork"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ParameterError("n_qubits must be positive")
        if self.depth < 0:
            raise ParameterError("depth must be non-negative")
        if self.rotation_scheme not in ROTATION_SCHEMES:
            raise ParameterError(f"rotation_scheme must be one of {ROTATION_SCHEMES}")
        if self.cnot_pattern != "brickwork":
            raise ParameterError("only the brickwork CNOT pattern is supported")

    @property
    def n_params(self) -> int:
        return parameter_count(self)

    def layer_kind(self, layer: int) -> str:
        """Rotation gate used in 1-based rotation layer ``layer``."""
        if self.rotation_scheme == "ry_only":
            return "RY"
        return "RX" if layer % 2 == 1 else "RY"


def parameter_count(spec: AnsatzSpec) -> int:
    return spec.n_qubits * (spec.depth + 1)


def brickwork_pairs(width: int, layer: int) -> list[tuple[int, int]]:
    """(control, target) pairs of 1-based CNOT layer ``layer``.

    Odd layers start at qubit 0, even layers at qubit 1; control is the
    lower index.
    """
    start = 0 if layer % 2 == 1 else 1
    return [(q, q + 1) for q in range(start, width - 1, 2)]


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = ()
    param_slots: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.width < 1:
            raise ParameterError("circuit width must be positive")
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "param_slots", tuple(self.param_slots))
        for g in self.gates:
            if max(g.qubits) >= self.width:
                raise ParameterError(f"{g} exceeds circuit width {self.width}")
        for pos in self.param_slots:
            if self.gates[pos].kind not in ROTATIONS:
                raise ParameterError(f"param slot {pos} is not a rotation")
        if len(set(self.param_slots)) != len(self.param_slots):
            raise ParameterError("param slots must be distinct")

    @property
    def n_params(self) -> int:
        return len(self.param_slots)

    def params(self) -> np.ndarray:
        return np.array([self.gates[pos].angle for pos in self.param_slots], dtype=float)

    def bind(self, theta: Sequence[float]) -> Circuit:
        """Same structure with new angles in the parameter slots."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ParameterError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        gates = list(self.gates)
        for value, pos in zip(theta, self.param_slots):
            g = gates[pos]
            gates[pos] = Gate(g.kind, g.qubits, float(value))
        return Circuit(self.width, tuple(gates), self.param_slots)

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def to_json(self, **kwargs) -> str:
        return json.dumps(
            {"width": self.width, "param_slots": list(self.param_slots), "gates": [g.to_dict() for g in self.gates]},
            **kwargs,
        )

    @classmethod
    def from_json(cls, text: str) -> Circuit:
        d = json.loads(text)
        return cls(d["width"], tuple(Gate.from_dict(g) for g in d["gates"]), tuple(d.get("param_slots", ())))

    def __str__(self):
        return " ".join(str(g) for g in self.gates)


def build_ansatz(spec: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    """Lay out ``spec`` with angles ``theta`` (layer-major, then qubit).

    Layers 1..depth are a full rotation layer followed by a brickwork CNOT
    layer; rotation layer depth+1 closes the circuit.
    """
    theta = np.asarray(theta, dtype=float)
    w = spec.n_qubits
    if theta.shape != (parameter_count(spec),):
        raise ParameterError(f"expected {parameter_count(spec)} parameters, got shape {theta.shape}")
    gates: list[Gate] = []
    slots: list[int] = []
    for layer in range(1, spec.depth + 2):
        kind = spec.layer_kind(layer)
        offset = (layer - 1) * w
        for q in range(w):
            slots.append(len(gates))
            gates.append(Gate(kind, (q,), float(theta[offset + q])))
        if layer <= spec.depth:
            gates.extend(Gate("CNOT", pair) for pair in brickwork_pairs(w, layer))
    return Circuit(w, tuple(gates), tuple(slots))


def shift_parameter(theta: Sequence[float], i: int, sign: int) -> np.ndarray:
    """Copy of ``theta`` with entry ``i`` moved by ``sign * pi / 2``."""
    theta = np.array(theta, dtype=float)
    if not 0 <= i < theta.size:
        raise ParameterError(f"parameter index {i} out of range for {theta.size} parameters")
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    theta[i] += sign * math.pi / 2
    return theta


def random_theta(spec: AnsatzSpec, rng: np.random.Generator, low: float = -math.pi, high: float = math.pi) -> np.ndarray:
    return rng.uniform(low, high, size=parameter_count(spec))


def layer_of(spec: AnsatzSpec, i: int) -> int:
    """1-based rotation layer holding 0-based parameter ``i``."""
    return i // spec.n_qubits + 1


def iter_rotations(circuit: Circuit) -> Iterable[tuple[int, Gate]]:
    for i, pos in enumerate(circuit.param_slots):
        yield i, circuit.gates[pos]
