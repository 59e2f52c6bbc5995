"""JSON file formats and CSV exports

Shapes, currents and registration results are stored as version-1 JSON
documents. Floats are written with repr precision so that a write/read
round trip is exact.
"""

import csv
import json
from typing import Iterable, List, Sequence

import numpy as np
from pydantic import ValidationError

from fshapes.errors import FileFormatError, ShapeValidationError
from fshapes.models import FCurrent, FunctionalShape, validate_shape
from fshapes.pursuit import MPStep
from fshapes.registration import RegistrationResult
from fshapes.transport import DeformationPath

FORMAT_VERSION = 1


def _load(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise FileFormatError(f"cannot read {path}: {e.strerror or e}") from None
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}") from None
    if not isinstance(data, dict):
        raise FileFormatError(f"{path}: expected a JSON object")
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported format version {version!r}")
    return data


def _dump(data: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, allow_nan=False)
        f.write("\n")


def _require(data: dict, keys: Sequence[str], source: str) -> None:
    missing = [k for k in keys if k not in data]
    if missing:
        raise FileFormatError(f"{source}: missing field(s) {', '.join(missing)}")


def _num(value) -> str:
    return repr(float(value))


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(p) for p in first.get("loc", ())) or "document"
    return f"{where}: {first.get('msg', 'invalid value')}"


def shape_to_dict(shape: FunctionalShape) -> dict:
    return {
        "version": FORMAT_VERSION,
        "ambient_dim": shape.ambient_dim,
        "manifold_dim": shape.manifold_dim,
        "signal_dim": shape.signal_dim,
        "vertices": shape.vertices.tolist(),
        "cells": shape.cells.tolist(),
        "signal": shape.signal.tolist(),
    }


def shape_from_dict(data: dict, source: str = "shape") -> FunctionalShape:
    """Parse a shape document; invariant violations raise ShapeValidationError"""
    _require(data, ("ambient_dim", "manifold_dim", "signal_dim", "vertices", "cells", "signal"), source)
    try:
        shape = FunctionalShape(**{k: data[k] for k in (
            "ambient_dim", "manifold_dim", "signal_dim", "vertices", "cells", "signal"
        )})
    except (ValidationError, ValueError, TypeError) as e:
        detail = _describe(e) if isinstance(e, ValidationError) else str(e)
        raise FileFormatError(f"{source}: {detail}") from None
    violations = validate_shape(shape)
    if violations:
        raise ShapeValidationError([f"{source}: {v}" for v in violations])
    return shape


def read_shape(path: str) -> FunctionalShape:
    return shape_from_dict(_load(path), path)


def write_shape(shape: FunctionalShape, path: str) -> None:
    _dump(shape_to_dict(shape), path)


def current_to_dict(current: FCurrent) -> dict:
    return {
        "version": FORMAT_VERSION,
        "ambient_dim": current.ambient_dim,
        "manifold_dim": current.manifold_dim,
        "signal_dim": current.signal_dim,
        "atoms": [
            {"x": x.tolist(), "m": m.tolist(), "xi": xi.tolist()}
            for x, m, xi in zip(current.positions, current.signals, current.xi)
        ],
    }


def current_from_dict(data: dict, source: str = "current") -> FCurrent:
    _require(data, ("ambient_dim", "manifold_dim", "signal_dim", "atoms"), source)
    atoms = data["atoms"]
    if not isinstance(atoms, list) or any(not isinstance(a, dict) for a in atoms):
        raise FileFormatError(f"{source}: atoms must be a list of objects")
    for i, atom in enumerate(atoms):
        _require(atom, ("x", "m", "xi"), f"{source}: atom {i}")
    try:
        n, d, k = int(data["ambient_dim"]), int(data["manifold_dim"]), int(data["signal_dim"])
        current = FCurrent(
            ambient_dim=n,
            manifold_dim=d,
            signal_dim=k,
            positions=[a["x"] for a in atoms],
            signals=[a["m"] for a in atoms],
            xi=[a["xi"] for a in atoms],
        )
    except (ValidationError, ValueError, TypeError) as e:
        detail = _describe(e) if isinstance(e, ValidationError) else str(e)
        raise FileFormatError(f"{source}: {detail}") from None
    if len(current) and not (
        np.all(np.isfinite(current.positions)) and np.all(np.isfinite(current.signals)) and np.all(np.isfinite(current.xi))
    ):
        raise FileFormatError(f"{source}: non-finite atom components")
    return current


def read_current(path: str) -> FCurrent:
    return current_from_dict(_load(path), path)


def write_current(current: FCurrent, path: str) -> None:
    _dump(current_to_dict(current), path)


def path_to_dict(path: DeformationPath) -> dict:
    """Arrays are row-major by time step: control_points[j][p], momenta[j][p]"""
    return {
        "timesteps": path.timesteps,
        "sigma_v": path.sigma_v,
        "integrator": path.integrator,
        "control_points": path.control_points.tolist(),
        "momenta": path.momenta.tolist(),
    }


def path_from_dict(data: dict, source: str = "path") -> DeformationPath:
    if not isinstance(data, dict):
        raise FileFormatError(f"{source}: path must be an object")
    _require(data, ("timesteps", "sigma_v", "integrator", "control_points", "momenta"), source)
    try:
        return DeformationPath(**data)
    except (ValidationError, ValueError, TypeError) as e:
        detail = _describe(e) if isinstance(e, ValidationError) else str(e)
        raise FileFormatError(f"{source}: {detail}") from None


def result_to_dict(result: RegistrationResult) -> dict:
    return {
        "version": FORMAT_VERSION,
        "path": path_to_dict(result.path),
        "energy_trace": [list(values) for values in result.energy_trace],
        "final_gradient_norm": result.final_gradient_norm,
        "iterations": result.iterations,
        "stop_reason": result.stop_reason,
    }


def write_result(result: RegistrationResult, path: str) -> None:
    _dump(result_to_dict(result), path)


def read_path(path: str) -> DeformationPath:
    """Deformation path stored in a registration result file"""
    data = _load(path)
    _require(data, ("path",), path)
    return path_from_dict(data["path"], f"{path}: path")


def write_mp_steps_csv(steps: Iterable[MPStep], ambient_dim: int, signal_dim: int, path: str) -> None:
    """Columns: step,candidate,x_1..x_n,m_1..m_k,gamma_norm,residual_ratio"""
    header = (
        ["step", "candidate"]
        + [f"x_{i + 1}" for i in range(ambient_dim)]
        + [f"m_{i + 1}" for i in range(signal_dim)]
        + ["gamma_norm", "residual_ratio"]
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for s in steps:
            writer.writerow([s.step, s.candidate, *map(_num, s.x), *map(_num, s.m), _num(s.gamma_norm), _num(s.residual_ratio)])


def write_trace_csv(result: RegistrationResult, path: str) -> None:
    """Columns: iteration,kinetic,attachment,total,step"""
    steps = result.steps or [0.0] * len(result.energy_trace)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "kinetic", "attachment", "total", "step"])
        for i, ((kinetic, attachment, total), step) in enumerate(zip(result.energy_trace, steps)):
            writer.writerow([i, _num(kinetic), _num(attachment), _num(total), _num(step)])


def write_grid_csv(original: FunctionalShape, moved: FunctionalShape, path: str) -> None:
    """Columns: vertex,x_1..x_n,phi_1..phi_n for a deformed grid"""
    if original.vertices.shape != moved.vertices.shape:
        raise ValueError("original and moved grids must have the same vertices")
    n = original.ambient_dim
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["vertex", *[f"x_{i + 1}" for i in range(n)], *[f"phi_{i + 1}" for i in range(n)]])
        for i, (x, y) in enumerate(zip(original.vertices, moved.vertices)):
            writer.writerow([i, *map(repr, x.tolist()), *map(repr, y.tolist())])


def write_rows_csv(header: List[str], rows: Iterable[Sequence[float]], path: str) -> None:
    """Plain numeric table, e.g. the crenellation experiment (dtheta,wprime,l1)"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])


def read_shape_or_current(path: str) -> FunctionalShape | FCurrent:
    """Read either document type, told apart by its `atoms` or `vertices` field"""
    data = _load(path)
    if "atoms" in data:
        return current_from_dict(data, path)
    if "vertices" in data:
        return shape_from_dict(data, path)
    raise FileFormatError(f"{path}: neither a shape nor a current document")
