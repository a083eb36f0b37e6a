"""Binary matrix/vector file formats and the JSON trace schema.

DMAT: 8-byte magic ``SSDMAT01``, two little-endian uint64 (rows, cols),
then rows*cols float64 little-endian in column-major order.

DVEC: 8-byte magic ``SSDVEC01``, one little-endian uint64 (length), then
float64 little-endian payload.
"""

from __future__ import annotations

import json
import os
import struct

import jsonschema
import numpy as np

from .errors import FormatError

DMAT_MAGIC = b"SSDMAT01"
DVEC_MAGIC = b"SSDVEC01"

_HEADER_MAT = struct.Struct("<8sQQ")
_HEADER_VEC = struct.Struct("<8sQ")


def write_dmat(path, array):
    """Write a 2-D float array as a DMAT file."""
    arr = np.asarray(array, dtype="<f8")
    if arr.ndim != 2:
        raise FormatError(f"DMAT payload must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("DMAT payload must be finite")
    with open(path, "wb") as fh:
        fh.write(_HEADER_MAT.pack(DMAT_MAGIC, arr.shape[0], arr.shape[1]))
        arr.flatten(order="F").tofile(fh)


def read_dmat_header(path):
    """Return (rows, cols) of a DMAT file, validating magic and size."""
    try:
        size = os.path.getsize(path)
        with open(path, "rb") as fh:
            raw = fh.read(_HEADER_MAT.size)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) != _HEADER_MAT.size:
        raise FormatError(f"{path}: truncated DMAT header")
    magic, rows, cols = _HEADER_MAT.unpack(raw)
    if magic != DMAT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER_MAT.size + 8 * rows * cols
    if size != expected:
        raise FormatError(f"{path}: size {size} != expected {expected}")
    return int(rows), int(cols)


def read_dmat_columns(path, rows, start, stop):
    """Read columns [start, stop) of a DMAT file as a (rows, stop-start)
    Fortran-ordered array."""
    count = rows * (stop - start)
    offset = _HEADER_MAT.size + 8 * rows * start
    try:
        with open(path, "rb") as fh:
            fh.seek(offset)
            flat = np.fromfile(fh, dtype="<f8", count=count)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if flat.size != count:
        raise FormatError(f"{path}: truncated payload")
    block = flat.reshape((rows, stop - start), order="F")
    if not np.all(np.isfinite(block)):
        raise FormatError(f"{path}: non-finite payload values")
    return block


def read_dmat(path):
    rows, cols = read_dmat_header(path)
    return read_dmat_columns(path, rows, 0, cols)


def write_dvec(path, vector):
    vec = np.asarray(vector, dtype="<f8")
    if vec.ndim != 1:
        raise FormatError(f"DVEC payload must be 1-D, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise FormatError("DVEC payload must be finite")
    with open(path, "wb") as fh:
        fh.write(_HEADER_VEC.pack(DVEC_MAGIC, vec.size))
        vec.tofile(fh)


def read_dvec(path):
    try:
        size = os.path.getsize(path)
        with open(path, "rb") as fh:
            raw = fh.read(_HEADER_VEC.size)
            if len(raw) != _HEADER_VEC.size:
                raise FormatError(f"{path}: truncated DVEC header")
            magic, length = _HEADER_VEC.unpack(raw)
            if magic != DVEC_MAGIC:
                raise FormatError(f"{path}: bad magic {magic!r}")
            if size != _HEADER_VEC.size + 8 * length:
                raise FormatError(f"{path}: inconsistent DVEC size")
            vec = np.fromfile(fh, dtype="<f8", count=length)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not np.all(np.isfinite(vec)):
        raise FormatError(f"{path}: non-finite payload values")
    return vec


def load_matrix(path, fmt="dmat"):
    """Load a full matrix from DMAT or header-free row-major CSV."""
    if fmt == "dmat":
        return read_dmat(path)
    if fmt == "csv":
        try:
            arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except (OSError, ValueError) as exc:
            raise FormatError(f"cannot parse {path} as CSV: {exc}") from exc
        return np.asfortranarray(arr)
    raise FormatError(f"unknown matrix format {fmt!r}")


def load_vector(path, fmt="dvec"):
    if fmt in ("dvec", "dmat"):
        return read_dvec(path)
    if fmt == "csv":
        try:
            return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=1)
        except (OSError, ValueError) as exc:
            raise FormatError(f"cannot parse {path} as CSV: {exc}") from exc
    raise FormatError(f"unknown vector format {fmt!r}")


_STEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "lambda", "kept_count", "region_diameter", "gap",
        "screen_seconds", "solve_seconds", "theta_norm",
        "degenerate", "converged", "false_rejections",
    ],
    "properties": {
        "lambda": {"type": "number", "exclusiveMinimum": 0},
        "kept_count": {"type": "integer", "minimum": 0},
        "region_diameter": {"type": ["number", "null"], "minimum": 0},
        "gap": {"type": "number"},
        "screen_seconds": {"type": "number", "minimum": 0},
        "solve_seconds": {"type": "number", "minimum": 0},
        "theta_norm": {"type": "number", "minimum": 0},
        "degenerate": {"type": "boolean"},
        "converged": {"type": "boolean"},
        "false_rejections": {"type": ["integer", "null"], "minimum": 0},
    },
}

TRACE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": [
        "trace_version", "kind", "rule", "d", "p", "lambda_max",
        "lambda_t", "lambdas", "steps", "w_final", "N", "degenerate_steps",
    ],
    "properties": {
        "trace_version": {"const": 1},
        "kind": {"enum": ["dass", "geometric", "dpp_feedback"]},
        "rule": {"enum": ["dome", "dpp", "strong"]},
        "R": {"type": ["number", "null"]},
        "N_requested": {"type": ["integer", "null"]},
        "lambda1_factor": {"type": "number"},
        "d": {"type": "integer", "minimum": 1},
        "p": {"type": "integer", "minimum": 1},
        "lambda_max": {"type": "number", "exclusiveMinimum": 0},
        "lambda_t": {"type": "number", "exclusiveMinimum": 0},
        "lambdas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "steps": {"type": "array", "items": _STEP_SCHEMA, "minItems": 1},
        "w_final": {"type": "array", "items": {"type": "number"}},
        "N": {"type": "integer", "minimum": 1},
        "degenerate_steps": {
            "type": "array", "items": {"type": "integer", "minimum": 1},
        },
    },
}


def validate_trace(doc):
    """Strictly validate a trace document against the versioned schema."""
    try:
        jsonschema.validate(doc, TRACE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise FormatError(f"invalid trace document: {exc.message}") from exc


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON {path}: {exc}") from exc
