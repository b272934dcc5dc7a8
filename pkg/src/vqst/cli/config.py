"""Run configuration: JSON schema with explicit defaults, strict validation."""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any

import jsonschema

from ..errors import ConfigError


def _num(default, **kw):
    return {"type": "number", "default": default, **kw}


def _int(default, **kw):
    return {"type": "integer", "default": default, **kw}


def _section(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": props,
        "additionalProperties": False,
        "required": list(required),
        "default": {},
    }


_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}

SCHEMA: dict = _section(
    {
        "seed": _int(0, minimum=0),
        "spinchain": _section(
            {
                "L": _int(6, minimum=1, maximum=26),
                "J": _num(1.0),
                "Delta": {"type": "array", "items": {"type": "number"}, "minItems": 1, "default": [0.5, 1.0, 1.5]},
                "h": _num(1.0),
                "tol": _num(1e-10, exclusiveMinimum=0),
                "max_iter": _int(200, minimum=1),
                "krylov_dim": _int(60, minimum=2),
            }
        ),
        "target": _section(
            {
                # xxz: Lanczos ground state per Delta; file: statevector binary;
                # planted: output of the ansatz at random angles
                "source": {"enum": ["xxz", "file", "planted"], "default": "xxz"},
                "file": {"type": ["string", "null"], "default": None},
                # mixed mode learns the reduced state of the first mixed_qubits spins
                "mixed_qubits": {"type": ["integer", "null"], "minimum": 1, "default": None},
            }
        ),
        "ansatz": _section(
            {
                "depth": {**_INT_LIST, "default": [5]},
                "rotation_scheme": {"enum": ["ry_only", "alternating_xy"], "default": "ry_only"},
                "mode": {"enum": ["pure", "mixed"], "default": "pure"},
            }
        ),
        "estimator": _section(
            {
                "mode": {"enum": ["exact", "swap_test"], "default": "exact"},
                "shots": _int(10000, minimum=1),
                "swap_backend": {"enum": ["circuit", "analytic"], "default": "circuit"},
            }
        ),
        "training": _section(
            {
                "optimizer": {"enum": ["adam", "lbfgs"], "default": "lbfgs"},
                "iterations": _int(100, minimum=1),
                "seeds": {**_INT_LIST, "default": [0]},
                "loss_tolerance": _num(0.0, minimum=0),
                "init": {
                    "oneOf": [{"enum": ["uniform", "zeros"]}, {"type": "array", "items": {"type": "number"}}],
                    "default": "uniform",
                },
                "init_range": _num(math.pi, exclusiveMinimum=0),
                "lr": _num(0.05, exclusiveMinimum=0),
                "beta1": _num(0.9, minimum=0, exclusiveMaximum=1),
                "beta2": _num(0.999, minimum=0, exclusiveMaximum=1),
                "eps": _num(1e-8, exclusiveMinimum=0),
                "memory": _int(20, minimum=1),
                "c1": _num(1e-4, exclusiveMinimum=0, exclusiveMaximum=1),
                "c2": _num(0.9, exclusiveMinimum=0, exclusiveMaximum=1),
                "gtol": _num(1e-8, minimum=0),
            }
        ),
        "reconstruction": _section(
            {
                "chi_max": {"type": ["integer", "null"], "minimum": 1, "default": None},
                "svd_tol": _num(1e-12, minimum=0),
            }
        ),
        "gradcheck": _section(
            {
                "trials": _int(20, minimum=1),
                "max_qubits": _int(6, minimum=1, maximum=12),
                "max_depth": _int(4, minimum=0),
                "step": _num(1e-5, exclusiveMinimum=0),
                "threshold": _num(1e-6, exclusiveMinimum=0),
            }
        ),
        "output": _section(
            {
                "directory": {"type": "string", "default": "out"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["csv", "json"]},
                    "default": ["csv", "json"],
                },
            }
        ),
    }
)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _fill_defaults(schema: dict, value: Any) -> Any:
    if schema.get("type") != "object" or not isinstance(value, dict):
        return value
    out = {}
    for key, sub in schema["properties"].items():
        if key in value:
            out[key] = _fill_defaults(sub, value[key])
        else:
            out[key] = _fill_defaults(sub, copy.deepcopy(sub.get("default")))
    return out


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; lists and scalars in ``override`` replace."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(user: dict) -> dict:
    """Validate ``user`` against the schema and return it with every default filled in."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(user), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema["properties"]))
            path.append(extra[0])
            raise ConfigError("unknown key", _path(path))
        raise ConfigError(err.message, _path(path))
    cfg = _fill_defaults(SCHEMA, user)
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: dict) -> None:
    t, a, e, tr = cfg["target"], cfg["ansatz"], cfg["estimator"], cfg["training"]
    if t["source"] == "file" and not t["file"]:
        raise ConfigError("required when target.source is 'file'", "target.file")
    if e["mode"] == "swap_test" and tr["optimizer"] == "lbfgs":
        raise ConfigError("L-BFGS needs exact fidelities; use adam with swap_test", "training.optimizer")
    if tr["c1"] >= tr["c2"]:
        raise ConfigError("need c1 < c2", "training.c1")
    L = cfg["spinchain"]["L"]
    if a["mode"] == "mixed":
        n = t["mixed_qubits"] if t["mixed_qubits"] is not None else L // 2
        if not 1 <= n < L:
            raise ConfigError(f"need 1 <= mixed_qubits < L={L}", "target.mixed_qubits")


def load_user(path: str | Path) -> dict:
    """Read a JSON config file without validating it."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(str(exc), "--config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "--config") from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "<root>")
    return data


def load(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Read a JSON config (optional), apply ``overrides`` and resolve defaults."""
    user = load_user(path) if path is not None else {}
    return resolve(merge(user, overrides or {}))
