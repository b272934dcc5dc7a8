"""Training loop, per-iteration records, and MPS/MPO reconstruction."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..circuit import AnsatzSpec, build_ansatz, parameter_count
from ..errors import ConfigError, ParameterError
from ..mps import DEFAULT_SVD_TOL, MpoOperator, MpsState, mps_to_statevector, partial_trace_to_mpo, run_circuit_mps
from .estimator import EstimatorConfig, FidelityEvaluator, Target, loss
from .optim import AdamState, adam_step, lbfgs_minimize

log = logging.getLogger(__name__)

CSV_HEADER = "iter,loss,fidelity,grad_norm,evals,loss_ideal"


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "lbfgs"
    max_iterations: int = 100
    loss_tolerance: float = 0.0
    init: str | Sequence[float] = "uniform"
    init_range: float = math.pi  # uniform init draws from (-init_range, init_range)
    seed: int = 0
    # ADAM
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # L-BFGS
    memory: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in ("adam", "lbfgs"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}", "training.optimizer")
        if self.max_iterations < 1:
            raise ConfigError("must be >= 1", "training.max_iterations")
        if self.lr <= 0:
            raise ConfigError("must be > 0", "training.lr")
        if isinstance(self.init, str) and self.init not in ("uniform", "zeros"):
            raise ConfigError(f"unknown init {self.init!r}", "training.init")
        if not self.init_range > 0:
            raise ConfigError("must be > 0", "training.init_range")
        if not 0 < self.c1 < self.c2 < 1:
            raise ConfigError("need 0 < c1 < c2 < 1", "training.c1")

    def initial_theta(self, n_params: int) -> np.ndarray:
        if isinstance(self.init, str):
            if self.init == "zeros":
                return np.zeros(n_params)
            return np.random.default_rng(self.seed).uniform(-self.init_range, self.init_range, n_params)
        theta = np.asarray(self.init, dtype=float)
        if theta.shape != (n_params,):
            raise ParameterError(f"explicit init has shape {theta.shape}, expected ({n_params},)")
        return theta.copy()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if not isinstance(self.init, str):
            d["init"] = [float(x) for x in self.init]
        return d


@dataclass(frozen=True)
class TrainRow:
    iteration: int
    loss: float
    fidelity: float
    grad_norm: float
    evals: int
    loss_ideal: float

    def csv(self) -> str:
        return ",".join(
            [str(self.iteration), repr(float(self.loss)), repr(float(self.fidelity)),
             repr(float(self.grad_norm)), str(self.evals), repr(float(self.loss_ideal))]
        )


@dataclass
class TrainRecord:
    rows: list[TrainRow]
    final_theta: np.ndarray
    reason: str
    final_fidelity: float
    final_loss: float
    fidelity_ceiling: float
    n_evals: int
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def iterations_to(self, threshold: float) -> int | None:
        """First logged iteration whose loss is <= threshold."""
        for row in self.rows:
            if row.loss <= threshold:
                return row.iteration
        return None

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER, *(r.csv() for r in self.rows)]) + "\n"

    def summary(self) -> dict:
        return {
            "config": self.config,
            "final_theta": [float(x) for x in self.final_theta],
            "final_fidelity": self.final_fidelity,
            "final_loss": self.final_loss,
            "fidelity_ceiling": self.fidelity_ceiling,
            "termination_reason": self.reason,
            "iterations": len(self.rows),
            "fidelity_evaluations": self.n_evals,
            "wall_time": self.wall_time,
        }

    def save(self, directory: str | Path, stem: str) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = directory / f"{stem}.csv", directory / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.summary(), indent=2))
        return csv_path, json_path


def train(
    target: Target,
    spec: AnsatzSpec,
    est: EstimatorConfig = EstimatorConfig(),
    cfg: TrainConfig = TrainConfig(),
    workers: int = 1,
) -> TrainRecord:
    """Fit the ansatz to ``target`` by minimizing 1 - sqrt(F).

    In SWAP-test mode each row also carries the noise-free loss at the same
    parameters (``loss_ideal``); those recomputations are not counted as
    fidelity evaluations.
    """
    if est.noisy and cfg.optimizer == "lbfgs":
        raise ConfigError("L-BFGS needs exact fidelities; use ADAM with swap_test", "training.optimizer")
    ev = FidelityEvaluator(spec, target, est, workers=workers)
    theta = cfg.initial_theta(parameter_count(spec))
    rows: list[TrainRow] = []
    start = time.perf_counter()

    def ideal_loss(th, noisy_loss):
        return loss(ev.exact_fidelity(th), target.kind) if est.noisy else noisy_loss

    if cfg.optimizer == "adam":
        state = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        reason = "max_iterations"
        for it in range(cfg.max_iterations):
            f, grad, F = ev.loss_and_gradient(theta, it)
            rows.append(TrainRow(it, f, F, float(np.max(np.abs(grad))), ev.n_evals, ideal_loss(theta, f)))
            if not (math.isfinite(f) and np.all(np.isfinite(grad))):
                reason = "non_finite"
                break
            if f <= cfg.loss_tolerance:
                reason = "loss_tolerance"
                break
            state, theta = adam_step(state, theta, grad)
    else:
        fid_cache: dict[bytes, float] = {}
        calls = 0

        def objective(th):
            nonlocal calls
            f, grad, F = ev.loss_and_gradient(th, calls)
            calls += 1
            fid_cache[th.tobytes()] = F
            return f, grad

        def record(k, th, f, grad):
            rows.append(TrainRow(k, f, fid_cache[th.tobytes()], float(np.max(np.abs(grad))), ev.n_evals, f))
            log.debug("iter %d loss %.6g", k, f)

        res = lbfgs_minimize(
            objective, theta, memory=cfg.memory, max_iterations=cfg.max_iterations, gtol=cfg.gtol,
            loss_tolerance=cfg.loss_tolerance, c1=cfg.c1, c2=cfg.c2, callback=record,
        )
        theta, reason = res.theta, res.reason

    final_F = ev.exact_fidelity(theta)
    return TrainRecord(
        rows=rows,
        final_theta=np.asarray(theta, dtype=float),
        reason=reason,
        final_fidelity=final_F,
        final_loss=loss(final_F, target.kind),
        fidelity_ceiling=target.fidelity_ceiling(),
        n_evals=ev.n_evals,
        config={
            "ansatz": dataclasses.asdict(spec),
            "estimator": dataclasses.asdict(est),
            "training": cfg.to_dict(),
            "target_kind": target.kind,
        },
        wall_time=time.perf_counter() - start,
    )


def reconstruct(
    theta: Sequence[float],
    spec: AnsatzSpec,
    mode: str = "pure",
    chi_max: int | None = None,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> MpsState | MpoOperator:
    """Replay the trained circuit on the MPS simulator.

    Pure mode returns the output MPS; mixed mode traces out the second half
    of the register and returns the reduced density operator as an MPO.
    """
    mps = run_circuit_mps(build_ansatz(spec, theta), chi_max=chi_max, svd_tol=svd_tol)
    if mode == "pure":
        return mps
    if mode == "mixed":
        if spec.n_qubits % 2:
            raise ParameterError("mixed mode needs an even circuit width")
        return partial_trace_to_mpo(mps, spec.n_qubits // 2)
    raise ParameterError(f"mode must be 'pure' or 'mixed', got {mode!r}")


def reconstruction_fidelity(recon: MpsState | MpoOperator, target: Target) -> float:
    """Fidelity of a reconstruction against the target, computed densely."""
    if isinstance(recon, MpsState):
        amps = mps_to_statevector(recon).amplitudes
        return float(abs(np.vdot(target.state.amplitudes, amps)) ** 2)
    rho_s = recon.to_dense()
    return float(np.real(np.trace(target.rho.entries @ rho_s)))
