"""Tests for JSON documents and CSV exports"""

import csv
import json

import numpy as np
import pytest

from fshapes.config import KernelConfig, RegistrationConfig
from fshapes.discretization import discretize
from fshapes.errors import FileFormatError, ShapeValidationError
from fshapes.io import (
    read_current,
    read_path,
    read_shape,
    read_shape_or_current,
    write_current,
    write_grid_csv,
    write_mp_steps_csv,
    write_result,
    write_rows_csv,
    write_shape,
    write_trace_csv,
)
from fshapes.models import FCurrent
from fshapes.pursuit import mp_compress
from fshapes.registration import register
from fshapes.synth import crenellated_circle, deformation_grid, sphere_with_caps, straight_segment


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_shape_round_trip_is_exact(tmp_path):
    """Test write/read reproduces every array bit for bit"""
    shape = sphere_with_caps(rings=4, sectors=5)
    target = tmp_path / "sphere.json"
    write_shape(shape, str(target))
    loaded = read_shape(str(target))
    assert (loaded.ambient_dim, loaded.manifold_dim, loaded.signal_dim) == (3, 2, 1)
    np.testing.assert_array_equal(loaded.vertices, shape.vertices)
    np.testing.assert_array_equal(loaded.cells, shape.cells)
    np.testing.assert_array_equal(loaded.signal, shape.signal)


def test_current_round_trip_and_dispatch(tmp_path):
    """Test current documents and read_shape_or_current"""
    current = discretize(crenellated_circle(segments=16, crenels=2))
    target = tmp_path / "circle.fcur.json"
    write_current(current, str(target))
    loaded = read_current(str(target))
    np.testing.assert_array_equal(loaded.xi, current.xi)
    np.testing.assert_array_equal(loaded.signals, current.signals)
    assert isinstance(read_shape_or_current(str(target)), FCurrent)

    shape_file = tmp_path / "circle.json"
    write_shape(crenellated_circle(segments=16, crenels=2), str(shape_file))
    assert not isinstance(read_shape_or_current(str(shape_file)), FCurrent)


def test_empty_current_document(tmp_path):
    """Test a current without atoms"""
    target = tmp_path / "empty.json"
    write_current(FCurrent.empty(3, 2, 1), str(target))
    assert len(read_current(str(target))) == 0


@pytest.mark.parametrize(
    "document,message",
    [
        ({"version": 2, "ambient_dim": 2}, "unsupported format version"),
        ({"ambient_dim": 2}, "unsupported format version"),
        ({"version": 1, "ambient_dim": 2, "manifold_dim": 1, "signal_dim": 1}, "missing field"),
        ([1, 2, 3], "expected a JSON object"),
    ],
)
def test_bad_documents(tmp_path, document, message):
    """Test malformed documents raise FileFormatError"""
    target = tmp_path / "bad.json"
    target.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(FileFormatError) as excinfo:
        read_shape(str(target))
    assert message in str(excinfo.value)


def test_invalid_json_and_missing_file(tmp_path):
    """Test unreadable input"""
    target = tmp_path / "broken.json"
    target.write_text("{not json", encoding="utf-8")
    with pytest.raises(FileFormatError):
        read_shape(str(target))
    with pytest.raises(FileFormatError):
        read_shape(str(tmp_path / "missing.json"))


def test_shape_invariants_checked_on_read(tmp_path):
    """Test out-of-range cell indices"""
    target = tmp_path / "shape.json"
    document = {
        "version": 1,
        "ambient_dim": 2,
        "manifold_dim": 1,
        "signal_dim": 1,
        "vertices": [[0, 0], [1, 0]],
        "cells": [[0, 5]],
        "signal": [[0], [1]],
    }
    target.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(ShapeValidationError):
        read_shape(str(target))


def test_mp_steps_csv(tmp_path):
    """Test the per-step log header and row count"""
    current = discretize(straight_segment(edges=20))
    result = mp_compress(KernelConfig.parse("gaussian:0.25", "gaussian:0.5"), current)
    target = tmp_path / "steps.csv"
    write_mp_steps_csv(result.steps, 2, 1, str(target))
    rows = read_rows(target)
    assert rows[0] == ["step", "candidate", "x_1", "x_2", "m_1", "gamma_norm", "residual_ratio"]
    assert len(rows) == len(result.steps) + 1
    assert float(rows[-1][-1]) == result.steps[-1].residual_ratio


def test_registration_outputs(tmp_path):
    """Test result JSON, trace CSV and reading the path back"""
    source = straight_segment(edges=6)
    target = source.replace(vertices=source.vertices + [0.0, 0.1])
    cfg = RegistrationConfig(kernels=KernelConfig.parse("gaussian:0.5", "constant"), sigma_v=0.5, timesteps=2, max_iters=3)
    result = register(cfg, source, target)

    result_file = tmp_path / "result.json"
    write_result(result, str(result_file))
    data = json.loads(result_file.read_text(encoding="utf-8"))
    assert data["version"] == 1
    assert data["iterations"] == result.iterations
    path = read_path(str(result_file))
    np.testing.assert_array_equal(path.momenta, result.path.momenta)
    np.testing.assert_array_equal(path.control_points, result.path.control_points)

    trace_file = tmp_path / "trace.csv"
    write_trace_csv(result, str(trace_file))
    rows = read_rows(trace_file)
    assert rows[0] == ["iteration", "kinetic", "attachment", "total", "step"]
    assert len(rows) == len(result.energy_trace) + 1
    assert float(rows[1][4]) == 0.0


def test_read_path_needs_result_document(tmp_path):
    """Test a shape file is not a registration result"""
    target = tmp_path / "shape.json"
    write_shape(straight_segment(edges=2), str(target))
    with pytest.raises(FileFormatError):
        read_path(str(target))


def test_grid_and_table_csv(tmp_path):
    """Test grid and numeric table exports"""
    grid = deformation_grid(lines=3, samples=4)
    moved = grid.replace(vertices=grid.vertices * 2.0)
    target = tmp_path / "grid.csv"
    write_grid_csv(grid, moved, str(target))
    rows = read_rows(target)
    assert rows[0] == ["vertex", "x_1", "x_2", "phi_1", "phi_2"]
    assert len(rows) == grid.n_vertices + 1
    assert float(rows[1][3]) == 2.0 * float(rows[1][1])

    table = tmp_path / "table.csv"
    write_rows_csv(["dtheta", "wprime", "l1"], [(0.01, 0.5, 0.32)], str(table))
    assert read_rows(table) == [["dtheta", "wprime", "l1"], ["0.01", "0.5", "0.32"]]
