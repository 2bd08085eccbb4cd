"""JSON scenario files.

A scenario file is a JSON object::

    {
      "algebra": {"kind": "car", "modes": 1},         # or {"kind": "matrix", "dim": d}
      "rho": {"preset": "diag", "values": [0.7, 0.3]},
      "partition": {"kind": "orthogonal-projective", "elements": [M1, M2]},
      "family": {"kind": "rotated-basis", "bounds": [[0, 1.5708]]},
      "automorphism": {"preset": "phase", "t": 1.0},
      "variant": "car",
      "horizon": 10,
      "prune": 0.0,
      "log_base": "e"
    }

Matrices are row-major lists of rows. An entry is a real number or an
``[re, im]`` pair. See ``README.md`` for every preset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from carq.dynamics import DEFAULT_CAP, PARTITION_KINDS, VARIANTS, Automorphism, Partition, Scenario, validate_partition
from carq.fock import build_fock_system
from carq.linalg import density_violations, is_unitary
from carq.optimize import PartitionFamily, constant_family, rotated_basis_family


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ScenarioSpec:
    scenario: Scenario
    family: PartitionFamily | None = None
    family_points: int | None = None
    log_base: str = "e"


def parse_matrix(value, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ScenarioError(path, "expected a non-empty list of rows")
    n = len(value)
    out = np.zeros((n, n), dtype=np.complex128)
    for i, row in enumerate(value):
        if len(row) != n:
            raise ScenarioError(f"{path}[{i}]", f"row has {len(row)} entries, matrix is not square ({n} rows)")
        for j, x in enumerate(row):
            out[i, j] = _parse_complex(x, f"{path}[{i}][{j}]")
    if dim is not None and n != dim:
        raise ScenarioError(path, f"matrix is {n}x{n}, expected {dim}x{dim}")
    return out


def _parse_complex(x, path: str) -> complex:
    if isinstance(x, bool):
        raise ScenarioError(path, f"expected a number or [re, im], got {x!r}")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ScenarioError(path, f"expected a number or [re, im], got {x!r}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _number(value, path: str, lo=None, integer=False):
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if not ok or isinstance(value, bool):
        raise ScenarioError(path, f"expected {'an integer' if integer else 'a number'}, got {value!r}")
    if lo is not None and value < lo:
        raise ScenarioError(path, f"must be >= {lo}, got {value!r}")
    return value


def _algebra(obj) -> tuple:
    if not isinstance(obj, dict):
        raise ScenarioError("algebra", "expected an object")
    kind = _require(obj, "kind", "algebra")
    if kind == "car":
        modes = _number(_require(obj, "modes", "algebra"), "algebra.modes", 1, integer=True)
        try:
            sys = build_fock_system(modes)
        except ValueError as exc:
            raise ScenarioError("algebra.modes", str(exc)) from None
        return {"kind": "car", "modes": modes}, sys.dim, sys
    if kind == "matrix":
        dim = _number(_require(obj, "dim", "algebra"), "algebra.dim", 1, integer=True)
        return {"kind": "matrix", "dim": dim}, dim, None
    raise ScenarioError("algebra.kind", f"expected 'car' or 'matrix', got {kind!r}")


def _default_number_operator(dim: int, sys) -> np.ndarray:
    if sys is not None:
        return sys.number_operator()
    return np.diag(np.arange(dim, dtype=np.complex128))


def _rho(obj, dim: int, sys) -> np.ndarray:
    if isinstance(obj, list):
        rho = parse_matrix(obj, "rho", dim)
    elif isinstance(obj, dict):
        preset = _require(obj, "preset", "rho")
        if preset == "diag":
            vals = _require(obj, "values", "rho")
            if not isinstance(vals, list) or len(vals) != dim:
                raise ScenarioError("rho.values", f"expected {dim} numbers")
            rho = np.diag([_number(v, f"rho.values[{i}]") for i, v in enumerate(vals)]).astype(np.complex128)
        elif preset == "gibbs":
            beta = _number(obj.get("beta", 1.0), "rho.beta")
            h = obj.get("hamiltonian")
            h = _default_number_operator(dim, sys) if h is None else parse_matrix(h, "rho.hamiltonian", dim)
            rho = scipy.linalg.expm(-beta * h)
            rho = rho / np.trace(rho)
        else:
            raise ScenarioError("rho.preset", f"unknown preset {preset!r} (expected 'diag' or 'gibbs')")
    else:
        raise ScenarioError("rho", "expected a matrix or a preset object")
    problems = density_violations(rho)
    if problems:
        raise ScenarioError("rho", "; ".join(problems))
    return rho


def _automorphism(obj, dim: int, sys) -> Automorphism:
    if obj is None:
        return Automorphism.identity(dim)
    if isinstance(obj, list):
        u = parse_matrix(obj, "automorphism", dim)
    elif isinstance(obj, dict):
        preset = _require(obj, "preset", "automorphism")
        if preset == "identity":
            u = np.eye(dim)
        elif preset == "phase":
            t = _number(_require(obj, "t", "automorphism"), "automorphism.t")
            u = scipy.linalg.expm(1j * t * _default_number_operator(dim, sys))
        elif preset == "permutation":
            sigma = _require(obj, "sigma", "automorphism")
            if not isinstance(sigma, list) or sorted(sigma) != list(range(dim)):
                raise ScenarioError("automorphism.sigma", f"expected a permutation of 0..{dim - 1}")
            u = np.zeros((dim, dim), dtype=np.complex128)
            u[sigma, np.arange(dim)] = 1.0
        else:
            raise ScenarioError("automorphism.preset", f"unknown preset {preset!r}")
    else:
        raise ScenarioError("automorphism", "expected a matrix or a preset object")
    if not is_unitary(u):
        raise ScenarioError("automorphism", "matrix is not unitary within 1e-10")
    return Automorphism(u)


def _partition(obj, dim: int, sys) -> Partition:
    if not isinstance(obj, dict):
        raise ScenarioError("partition", "expected an object")
    kind = obj.get("kind", "orthogonal-projective")
    if kind not in PARTITION_KINDS:
        raise ScenarioError("partition.kind", f"expected one of {PARTITION_KINDS}, got {kind!r}")
    if "preset" in obj:
        preset = obj["preset"]
        if preset == "diagonal":
            els = [np.diag(np.eye(dim)[j]).astype(np.complex128) for j in range(dim)]
        elif preset == "number":
            if sys is None:
                raise ScenarioError("partition.preset", "'number' needs a car algebra")
            mode = _number(obj.get("mode", 0), "partition.mode", 0, integer=True)
            if mode >= sys.modes:
                raise ScenarioError("partition.mode", f"mode {mode} out of range")
            n_op = sys.number_operator(mode)
            els = [n_op, np.eye(dim) - n_op]
        elif preset == "trivial":
            els = [np.eye(dim, dtype=np.complex128)]
        else:
            raise ScenarioError("partition.preset", f"unknown preset {preset!r}")
    else:
        raw = _require(obj, "elements", "partition")
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("partition.elements", "expected a non-empty list of matrices")
        els = [parse_matrix(m, f"partition.elements[{i}]", dim) for i, m in enumerate(raw)]
    p = Partition(tuple(els), kind)
    report = validate_partition(p)
    if not report.passed:
        raise ScenarioError("partition", "not a partition of the identity: " + ", ".join(report.failed()))
    return p


def _family(obj, dim: int, partition) -> tuple:
    if not isinstance(obj, dict):
        raise ScenarioError("family", "expected an object")
    kind = _require(obj, "kind", "family")
    points = obj.get("points")
    if points is not None:
        points = _number(points, "family.points", 1, integer=True)
    bounds = obj.get("bounds")
    if bounds is not None:
        if not isinstance(bounds, list) or not all(isinstance(b, list) and len(b) == 2 for b in bounds):
            raise ScenarioError("family.bounds", "expected a list of [low, high] pairs")
        for i, (lo, hi) in enumerate(bounds):
            _number(lo, f"family.bounds[{i}][0]")
            _number(hi, f"family.bounds[{i}][1]")
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ScenarioError(f"family.bounds[{i}]", "need finite low <= high")
    if kind == "rotated-basis":
        try:
            return rotated_basis_family(dim, bounds), points
        except ValueError as exc:
            raise ScenarioError("family", str(exc)) from None
    if kind == "constant":
        if partition is None:
            raise ScenarioError("family", "'constant' family needs a partition")
        return constant_family(partition, bounds or ((0.0, 1.0),)), points
    raise ScenarioError("family.kind", f"unknown family {kind!r} (expected 'rotated-basis' or 'constant')")


def parse_scenario(data: dict) -> ScenarioSpec:
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario must be a JSON object")
    algebra, dim, sys = _algebra(_require(data, "algebra", ""))
    rho = _rho(_require(data, "rho", ""), dim, sys)
    th = _automorphism(data.get("automorphism"), dim, sys)
    partition = _partition(data["partition"], dim, sys) if "partition" in data else None
    family, points = _family(data["family"], dim, partition) if "family" in data else (None, None)
    if partition is None and family is None:
        raise ScenarioError("partition", "missing required field (or give a family)")
    variant = data.get("variant", "car")
    if variant not in VARIANTS:
        raise ScenarioError("variant", f"expected one of {VARIANTS}, got {variant!r}")
    horizon = _number(data.get("horizon", 1), "horizon", 1, integer=True)
    prune = _number(data.get("prune", 0.0), "prune", 0)
    cap = _number(data.get("cap", DEFAULT_CAP), "cap", 1, integer=True)
    log_base = str(data.get("log_base", "e"))
    if log_base not in ("e", "2"):
        raise ScenarioError("log_base", f"expected 'e' or '2', got {log_base!r}")
    s = Scenario(rho, partition, th, variant, horizon, float(prune), cap, algebra)
    return ScenarioSpec(s, family, points, log_base)


def load_scenario(path) -> ScenarioSpec:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data)


def matrix_to_json(m) -> list:
    """Inverse of :func:`parse_matrix` using ``[re, im]`` pairs."""
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]
