"""I/O round trips and deterministic formatting."""

import json

import numpy as np
import pytest

from opflow.fileio import (
    format_complex,
    format_float,
    read_csv,
    read_operator,
    write_csv,
    write_json_record,
    write_operator,
)
from conftest import random_hermitian


def test_format_float_is_repr():
    assert format_float(0.1) == "0.1"
    assert format_float(1.0 / 3.0) == repr(1.0 / 3.0)
    assert format_float(np.float64(2.5)) == "2.5"


def test_format_complex_round_trips():
    z = 1.25 - 0.5j
    assert complex(format_complex(z)) == z
    assert complex(format_complex(3.0 + 0.0j)) == 3.0


def test_operator_text_round_trip(tmp_path, rng):
    a = random_hermitian(rng, 3)
    path = tmp_path / "op.txt"
    write_operator(path, a)
    back = read_operator(path)
    assert np.array_equal(back, a)


def test_operator_npy_round_trip(tmp_path, rng):
    a = random_hermitian(rng, 4)
    path = tmp_path / "op.npy"
    write_operator(path, a)
    assert np.array_equal(read_operator(path), a)


def test_read_operator_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_operator(tmp_path / "nope.txt")


def test_csv_round_trip(tmp_path):
    path = tmp_path / "data.csv"
    cols = {"x": np.array([0.0, 0.5, 1.0]), "y": np.array([1.0, 1.0 / 3.0, -2.0])}
    meta = {"seed": 7, "label": "demo"}
    write_csv(path, cols, meta=meta)
    meta_back, cols_back = read_csv(path)
    assert meta_back["seed"] == "7"
    assert meta_back["label"] == "demo"
    assert np.array_equal(cols_back["x"], cols["x"])
    assert np.array_equal(cols_back["y"], cols["y"])  # repr survives exactly


def test_csv_layout(tmp_path):
    path = tmp_path / "data.csv"
    write_csv(path, {"a": [1.0]}, meta={"k": "v"})
    lines = path.read_text().splitlines()
    assert lines[0] == "# k = v"
    assert lines[1] == "a"
    assert lines[2] == "1.0"


def test_json_record_sorted_and_numpy_safe(tmp_path):
    path = tmp_path / "rec.json"
    write_json_record(
        path,
        {"b": np.float64(1.5), "a": np.int64(2), "flag": np.bool_(True)},
    )
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    data = json.loads(text)
    assert data == {"a": 2, "b": 1.5, "flag": True}


def test_json_record_deterministic_bytes(tmp_path):
    rec = {"x": 0.1, "y": [1, 2, 3], "name": "r"}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_json_record(p1, rec)
    write_json_record(p2, rec)
    assert p1.read_bytes() == p2.read_bytes()
