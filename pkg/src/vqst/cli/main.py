"""``vqst`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import CapacityError, ConfigError, ConvergenceError, VqstError
from . import config, runner

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_CAPACITY = 0, 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="master seed (overrides seed)")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep cells (default 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="vqst", description="Variational quantum state tomography with MPS reconstruction.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ground-state", parents=[common], help="XXZ ground states by Lanczos")
    sub.add_parser("train", parents=[common], help="train the ansatz over a (Delta, depth, seed) sweep")
    rec = sub.add_parser("reconstruct", parents=[common], help="rebuild a trained state as an MPS / MPO")
    rec.add_argument("summary", type=Path, help="training summary JSON (runs/<stem>.json)")
    sub.add_parser("gradcheck", parents=[common], help="parameter-shift vs finite-difference gradients")
    fig = sub.add_parser("reproduce-fig3", parents=[common], help="preset sweeps for the four Fig. 3 panels")
    fig.add_argument("panel", choices=sorted(runner.FIG3_PRESETS))
    fig.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return p


def _user_config(args) -> dict:
    user = {}
    if args.config is not None:
        user = config.load_user(args.config)
    if args.seed is not None:
        user = config.merge(user, {"seed": args.seed})
    if args.out is not None:
        user = config.merge(user, {"output": {"directory": str(args.out)}})
    return user


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("must be >= 1", "--jobs")
        user = _user_config(args)
        if args.command == "reconstruct":
            runner.cmd_reconstruct(args.summary, user or None, args.out)
            return EXIT_OK
        if args.command == "reproduce-fig3":
            if args.out is None and not user.get("output", {}).get("directory"):
                user = config.merge(user, {"output": {"directory": f"out/fig3{args.panel}"}})
            cfg = runner.fig3_config(args.panel, user)
            if args.print_config:
                print(json.dumps(cfg, indent=2))
                return EXIT_OK
            runner.cmd_reproduce_fig3(args.panel, cfg, Path(cfg["output"]["directory"]), args.jobs)
            return EXIT_OK
        cfg = config.resolve(user)
        out = Path(cfg["output"]["directory"])
        if args.command == "ground-state":
            runner.cmd_ground_state(cfg, out)
        elif args.command == "train":
            runner.cmd_train(cfg, out, args.jobs)
        elif args.command == "gradcheck":
            if not runner.cmd_gradcheck(cfg)["passed"]:
                return EXIT_FAIL
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc} (best residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except VqstError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
