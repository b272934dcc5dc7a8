"""Command implementations: ground states, training sweeps, reconstruction, gradient checks."""

from __future__ import annotations

import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..circuit import AnsatzSpec, build_ansatz
from ..errors import ConfigError
from ..mps import bond_bound, mps_to_statevector, run_circuit_mps, save_json
from ..spinchain import XXZParams, ground_state_lanczos
from ..statevector import StateVector, read_statevector, reduced_density, run_circuit, write_statevector
from ..tomography import EstimatorConfig, FidelityEvaluator, Target, TrainConfig, loss, reconstruct, reconstruction_fidelity, train
from .config import merge, resolve

log = logging.getLogger(__name__)

AGGREGATE_HEADER = "Delta,depth,seed,final_fidelity,iters_to_loss_0.05,iters_to_loss_0.01"
DENSE_DUMP_MAX = 16  # at most 2^16 dense amplitudes / matrix rows * cols per side

# Iteration counts quoted for the d = 20, L = 15 runs at Delta = 0.5, 1.0, 1.5
PAPER_ITERS = {0.5: (50, 240), 1.0: (44, 209), 1.5: (34, 206)}

FIG3_PRESETS = {
    "a": {
        "spinchain": {"L": 15, "Delta": [0.5, 1.0, 1.5]},
        "ansatz": {"depth": list(range(1, 21))},
        "estimator": {"mode": "exact"},
        "training": {"optimizer": "lbfgs", "iterations": 500, "seeds": [0, 1, 2]},
    },
    "b": {
        "spinchain": {"L": 15, "Delta": [0.5, 1.0, 1.5]},
        "ansatz": {"depth": [20]},
        "estimator": {"mode": "exact"},
        "training": {"optimizer": "lbfgs", "iterations": 1000, "seeds": [0, 1, 2]},
    },
    "c": {
        "spinchain": {"L": 6, "Delta": [0.5, 1.0, 1.5]},
        "ansatz": {"depth": list(range(1, 11))},
        "estimator": {"mode": "swap_test", "shots": 10000},
        "training": {"optimizer": "adam", "iterations": 100, "seeds": [0, 1, 2, 3, 4], "lr": 0.1},
    },
    "d": {
        "spinchain": {"L": 6, "Delta": [0.5, 1.0, 1.5]},
        "ansatz": {"depth": [5]},
        "estimator": {"mode": "swap_test", "shots": 10000},
        "training": {"optimizer": "adam", "iterations": 100, "seeds": [0, 1, 2, 3, 4], "lr": 0.1},
    },
}


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x)) if isinstance(x, float) else str(x)


def _delta_tag(delta) -> str:
    return "none" if delta is None else f"{delta:g}"


def job_seed(master: int, delta_index: int, depth: int, seed: int) -> int:
    """Deterministic per-cell seed from (master seed, Delta index, depth, seed)."""
    return int(np.random.SeedSequence([master, delta_index, depth, seed]).generate_state(1)[0])


# ----------------------------------------------------------------- targets


def ground_state(cfg: dict, delta: float):
    sc = cfg["spinchain"]
    params = XXZParams(sc["L"], sc["J"], delta, sc["h"])
    gs = ground_state_lanczos(params, tol=sc["tol"], max_iter=sc["max_iter"], seed=cfg["seed"], krylov_dim=sc["krylov_dim"])
    if gs.degenerate:
        log.warning("Delta=%g: ground state is near-degenerate (gap %.3g); target is one vector of the ground space", delta, gs.gap_estimate)
    return gs


def _pure_state(cfg: dict, delta, depth: int) -> StateVector:
    source = cfg["target"]["source"]
    if source == "xxz":
        return ground_state(cfg, delta).vector
    if source == "file":
        return read_statevector(cfg["target"]["file"])
    # planted: the ansatz itself at seeded random angles
    L = cfg["spinchain"]["L"]
    spec = AnsatzSpec(L, depth, cfg["ansatz"]["rotation_scheme"])
    theta = np.random.default_rng([cfg["seed"], depth]).uniform(-math.pi, math.pi, spec.n_params)
    return run_circuit(build_ansatz(spec, theta))


def make_target(cfg: dict, delta, depth: int) -> Target:
    state = _pure_state(cfg, delta, depth)
    if cfg["ansatz"]["mode"] == "pure":
        return Target.pure(state)
    keep = cfg["target"]["mixed_qubits"] or state.n_qubits // 2
    if not 1 <= keep < state.n_qubits:
        raise ConfigError(f"need 1 <= mixed_qubits < {state.n_qubits}", "target.mixed_qubits")
    return Target.mixed(reduced_density(state, keep))


def target_deltas(cfg: dict) -> list:
    return list(cfg["spinchain"]["Delta"]) if cfg["target"]["source"] == "xxz" else [None]


# ------------------------------------------------------------------- cells


@dataclass(frozen=True)
class Cell:
    delta_index: int
    delta: float | None
    depth: int
    seed: int
    job_seed: int

    @property
    def stem(self) -> str:
        return f"D{_delta_tag(self.delta)}_d{self.depth}_s{self.seed}"


def sweep_cells(cfg: dict) -> list[Cell]:
    cells = []
    for di, delta in enumerate(target_deltas(cfg)):
        for depth in cfg["ansatz"]["depth"]:
            for seed in cfg["training"]["seeds"]:
                cells.append(Cell(di, delta, depth, seed, job_seed(cfg["seed"], di, depth, seed)))
    return cells


def train_configs(cfg: dict, cell: Cell, target: Target) -> tuple[AnsatzSpec, EstimatorConfig, TrainConfig]:
    tr, e = cfg["training"], cfg["estimator"]
    spec = AnsatzSpec(target.circuit_width, cell.depth, cfg["ansatz"]["rotation_scheme"])
    est = EstimatorConfig(e["mode"], e["shots"], cell.job_seed, e["swap_backend"])
    tc = TrainConfig(
        optimizer=tr["optimizer"], max_iterations=tr["iterations"], loss_tolerance=tr["loss_tolerance"],
        init=tr["init"], init_range=tr["init_range"], seed=cell.job_seed, lr=tr["lr"], beta1=tr["beta1"],
        beta2=tr["beta2"], eps=tr["eps"], memory=tr["memory"], c1=tr["c1"], c2=tr["c2"], gtol=tr["gtol"],
    )
    return spec, est, tc


def run_cell(cfg: dict, cell: Cell, target: Target, out: Path | None) -> dict:
    """Train one (Delta, depth, seed) cell; write its CSV and summary; return its aggregate row."""
    spec, est, tc = train_configs(cfg, cell, target)
    rec = train(target, spec, est, tc)
    row = {
        "Delta": cell.delta,
        "depth": cell.depth,
        "seed": cell.seed,
        "final_fidelity": rec.final_fidelity,
        "iters_to_loss_0.05": rec.iterations_to(0.05),
        "iters_to_loss_0.01": rec.iterations_to(0.01),
    }
    if out is not None:
        runs = out / "runs"
        runs.mkdir(parents=True, exist_ok=True)
        formats = cfg["output"]["formats"]
        if "csv" in formats:
            (runs / f"{cell.stem}.csv").write_text(rec.to_csv())
        if "json" in formats:
            summary = rec.summary()
            summary["cell"] = asdict(cell)
            summary["resolved_config"] = cfg
            (runs / f"{cell.stem}.json").write_text(json.dumps(summary, indent=2))
    log.info("%s: F=%.5f after %d iterations (%s)", cell.stem, rec.final_fidelity, len(rec.rows), rec.reason)
    return {"row": row, "losses": [(r.iteration, r.loss, r.loss_ideal) for r in rec.rows], "reason": rec.reason}


def _cell_job(args):
    cfg, cell, target, out = args
    return run_cell(cfg, cell, target, out)


def run_sweep(cfg: dict, out: Path | None, jobs: int = 1) -> list[dict]:
    cells = sweep_cells(cfg)
    planted = cfg["target"]["source"] == "planted"
    targets = {}
    work = []
    for c in cells:
        # targets are built once in the parent and shipped to the workers
        key = (c.delta_index, c.depth) if planted else c.delta_index
        if key not in targets:
            targets[key] = make_target(cfg, c.delta, c.depth)
        work.append((cfg, c, targets[key], out))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_cell_job, work))
    else:
        results = [_cell_job(w) for w in work]
    if out is not None:
        write_aggregate(out / "aggregate.csv", [r["row"] for r in results])
    return results


def write_aggregate(path: Path, rows: list[dict]) -> None:
    lines = [AGGREGATE_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(r[k]) for k in AGGREGATE_HEADER.split(",")))
    path.write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------- commands


def cmd_ground_state(cfg: dict, out: Path) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    L = cfg["spinchain"]["L"]
    reports = []
    for delta in cfg["spinchain"]["Delta"]:
        start = time.perf_counter()
        gs = ground_state(cfg, delta)
        stem = f"gs_L{L}_D{delta:g}"
        write_statevector(out / f"{stem}.bin", gs.vector)
        meta = {
            "params": asdict(gs.params),
            "energy": gs.energy,
            "residual": gs.residual,
            "degenerate": gs.degenerate,
            "gap_estimate": None if math.isinf(gs.gap_estimate) else gs.gap_estimate,
            "restarts": gs.iterations,
            "state_file": f"{stem}.bin",
            "wall_time": time.perf_counter() - start,
            "resolved_config": cfg,
        }
        (out / f"{stem}.json").write_text(json.dumps(meta, indent=2))
        print(f"L={L} Delta={delta:g}: E0={gs.energy:.12f} residual={gs.residual:.2e}" + (" (degenerate)" if gs.degenerate else ""))
        reports.append(meta)
    return reports


def cmd_train(cfg: dict, out: Path, jobs: int = 1) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    results = run_sweep(cfg, out, jobs)
    for r in results:
        row = r["row"]
        print(
            f"Delta={_delta_tag(row['Delta'])} d={row['depth']} seed={row['seed']}: "
            f"F={row['final_fidelity']:.6f} iters(f<=0.05)={_fmt(row['iters_to_loss_0.05']) or '-'} "
            f"iters(f<=0.01)={_fmt(row['iters_to_loss_0.01']) or '-'}"
        )
    return results


def cmd_reconstruct(summary_path: Path, cfg_override: dict | None, out: Path | None) -> dict:
    summary = json.loads(Path(summary_path).read_text())
    try:
        cfg = summary["resolved_config"]
        cell = Cell(**summary["cell"])
        theta = np.asarray(summary["final_theta"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"missing field {exc} in training summary", str(summary_path)) from exc
    if cfg_override:
        cfg = resolve(merge(cfg, cfg_override))
    out = Path(out or cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    target = make_target(cfg, cell.delta, cell.depth)
    spec = AnsatzSpec(target.circuit_width, cell.depth, cfg["ansatz"]["rotation_scheme"])
    mode = cfg["ansatz"]["mode"]
    rc = cfg["reconstruction"]
    recon = reconstruct(theta, spec, mode, rc["chi_max"], rc["svd_tol"])
    stem = cell.stem
    mps = recon if mode == "pure" else None
    kind = "mps" if mode == "pure" else "mpo"
    save_json(out / f"{stem}_{kind}.json", recon)

    # bond bound check on the MPS the circuit produced
    if mps is None:
        mps = run_circuit_mps(build_ansatz(spec, theta), rc["chi_max"], rc["svd_tol"])
    chi, bound = mps.max_bond, bond_bound(cell.depth)
    if chi > bound:
        log.warning("max bond %d exceeds 2^ceil(d/2) = %d", chi, bound)

    dense_file = None
    n = target.n
    limit = DENSE_DUMP_MAX if mode == "pure" else DENSE_DUMP_MAX // 2
    if n <= limit:
        if mode == "pure":
            dense_file = f"{stem}_state.bin"
            write_statevector(out / dense_file, mps_to_statevector(recon))
        else:
            dense_file = f"{stem}_rho.npy"
            np.save(out / dense_file, recon.to_dense())
    else:
        log.warning("n=%d too large for a dense dump; wrote the %s only", n, kind.upper())

    ev = FidelityEvaluator(spec, target, EstimatorConfig())
    report = {
        "summary": str(summary_path),
        "mode": mode,
        "export": f"{stem}_{kind}.json",
        "dense_dump": dense_file,
        "max_bond": chi,
        "bond_bound": bound,
        "bond_bound_ok": chi <= bound,
        "reconstruction_fidelity": reconstruction_fidelity(recon, target) if n <= limit else None,
        "training_fidelity": summary.get("final_fidelity"),
        "exact_fidelity_at_theta": ev.exact_fidelity(theta),
    }
    (out / f"{stem}_reconstruct.json").write_text(json.dumps(report, indent=2))
    print(f"{stem}: chi={chi} (bound {bound}) fidelity={_fmt(report['reconstruction_fidelity']) or 'n/a'}")
    return report


def cmd_gradcheck(cfg: dict) -> dict:
    gc = cfg["gradcheck"]
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    trials = []
    for k in range(gc["trials"]):
        n = int(rng.integers(1, gc["max_qubits"] + 1))
        d = int(rng.integers(0, gc["max_depth"] + 1))
        scheme = ("ry_only", "alternating_xy")[int(rng.integers(2))]
        spec = AnsatzSpec(n, d, scheme)
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        target = Target.pure(StateVector(amps / np.linalg.norm(amps)))
        ev = FidelityEvaluator(spec, target, EstimatorConfig())
        theta = rng.uniform(-math.pi, math.pi, spec.n_params)
        _, grad, _ = ev.loss_and_gradient(theta)
        fd = np.empty_like(theta)
        h = gc["step"]
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = h
            fd[i] = (loss(ev.exact_fidelity(theta + e)) - loss(ev.exact_fidelity(theta - e))) / (2 * h)
        dev = float(np.max(np.abs(grad - fd)))
        worst = max(worst, dev)
        trials.append({"n": n, "depth": d, "scheme": scheme, "params": spec.n_params, "max_deviation": dev})
        print(f"trial {k}: n={n} d={d} {scheme} P={spec.n_params} max|ps - fd| = {dev:.3e}")
    passed = worst <= gc["threshold"]
    print(f"gradcheck {'PASS' if passed else 'FAIL'}: max deviation {worst:.3e} (threshold {gc['threshold']:g})")
    return {"trials": trials, "max_deviation": worst, "passed": passed}


# ------------------------------------------------------------------ Fig. 3


def fig3_config(panel: str, user: dict) -> dict:
    return resolve(merge(FIG3_PRESETS[panel], user))


def cmd_reproduce_fig3(panel: str, cfg: dict, out: Path, jobs: int = 1) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    results = run_sweep(cfg, out, jobs)
    rows = [r["row"] for r in results]
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["Delta"], r["depth"]), []).append(r)

    lines = []
    if panel == "a":
        lines.append("Delta,depth,best_final_fidelity,best_seed")
        for (delta, depth), rs in groups.items():
            best = max(rs, key=lambda r: r["final_fidelity"])
            lines.append(f"{_fmt(delta)},{depth},{_fmt(best['final_fidelity'])},{best['seed']}")
            print(f"Delta={_delta_tag(delta)} d={depth}: best F={best['final_fidelity']:.5f} (seed {best['seed']})")
    elif panel == "c":
        lines.append("Delta,depth,median_final_fidelity,min_final_fidelity,max_final_fidelity")
        for (delta, depth), rs in groups.items():
            fs = [r["final_fidelity"] for r in rs]
            lines.append(f"{_fmt(delta)},{depth},{_fmt(statistics.median(fs))},{_fmt(min(fs))},{_fmt(max(fs))}")
            print(f"Delta={_delta_tag(delta)} d={depth}: median F={statistics.median(fs):.5f}")
    elif panel == "b":
        lines.append("Delta,depth,seed,iters_to_loss_0.05,iters_to_loss_0.01,reference_0.05,reference_0.01")
        for r in rows:
            ref = PAPER_ITERS.get(r["Delta"], (None, None))
            lines.append(
                f"{_fmt(r['Delta'])},{r['depth']},{r['seed']},{_fmt(r['iters_to_loss_0.05'])},"
                f"{_fmt(r['iters_to_loss_0.01'])},{_fmt(ref[0])},{_fmt(ref[1])}"
            )
            print(
                f"Delta={_delta_tag(r['Delta'])} seed={r['seed']}: iterations to f<=0.05: {_fmt(r['iters_to_loss_0.05']) or '-'} "
                f"(reference {_fmt(ref[0]) or '-'}), to f<=0.01: {_fmt(r['iters_to_loss_0.01']) or '-'} (reference {_fmt(ref[1]) or '-'})"
            )
    else:
        lines.append("Delta,depth,seed,iter,loss,loss_ideal,abs_diff")
        for r, res in zip(rows, results):
            for it, f, fi in res["losses"]:
                lines.append(f"{_fmt(r['Delta'])},{r['depth']},{r['seed']},{it},{_fmt(f)},{_fmt(fi)},{_fmt(abs(f - fi))}")
            late = [abs(f - fi) for it, f, fi in res["losses"] if it > 10]
            print(
                f"Delta={_delta_tag(r['Delta'])} seed={r['seed']}: final F={r['final_fidelity']:.5f}, "
                f"max |f - f_ideal| after iteration 10 = {max(late, default=0.0):.4f}"
            )
    (out / f"fig3{panel}.csv").write_text("\n".join(lines) + "\n")
    return results
