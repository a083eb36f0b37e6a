"""Dictionary storage with chunked column access.

Columns are stored (or read) column-major so screening and correlation
passes touch one contiguous column at a time. A dictionary is either
in-memory or backed by a DMAT file, in which case whole-matrix operations
stream over column blocks instead of materializing the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import DimensionError, FormatError, UsageError

# Column-block width used by streaming passes when the caller does not
# specify one.
DEFAULT_CHUNK = 1024

_NORM_TOL = 1e-9


def check_target(x, d):
    """Validate a target vector against data dimension ``d``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != d:
        raise DimensionError(f"target has shape {x.shape}, expected ({d},)")
    if not np.all(np.isfinite(x)):
        raise FormatError("target vector has non-finite entries")
    return x


@dataclass(frozen=True)
class LambdaMaxResult:
    """Largest absolute feature/target correlation and where it occurs."""

    lambda_max: float
    index: int  # 0-based feature index
    sign: int   # sign of a_i^T x at the argmax


class Dictionary:
    """A d-by-p feature matrix, immutable after construction."""

    def __init__(self, array, path, d, p, normalized):
        if d < 1 or p < 1:
            raise DimensionError(f"dictionary shape ({d}, {p}) is empty")
        self._array = array
        self._path = path
        self.d = int(d)
        self.p = int(p)
        self.normalized = bool(normalized)
        self._norms = None

    @classmethod
    def from_array(cls, array, normalized=False):
        arr = np.asfortranarray(np.asarray(array, dtype=np.float64))
        if arr.ndim != 2:
            raise DimensionError(f"dictionary must be 2-D, got {arr.ndim}-D")
        if not np.all(np.isfinite(arr)):
            raise FormatError("dictionary has non-finite entries")
        return cls(arr, None, arr.shape[0], arr.shape[1], normalized)

    @classmethod
    def from_file(cls, path, normalized=False):
        d, p = formats.read_dmat_header(path)
        return cls(None, str(path), d, p, normalized)

    @property
    def file_backed(self):
        return self._array is None

    def columns(self, start, stop):
        """Columns [start, stop) as a (d, stop-start) array."""
        if not (0 <= start < stop <= self.p):
            raise UsageError(f"column range [{start}, {stop}) out of [0, {self.p})")
        if self._array is not None:
            return self._array[:, start:stop]
        return formats.read_dmat_columns(self._path, self.d, start, stop)

    def column(self, i):
        return self.columns(i, i + 1)[:, 0]

    def to_array(self):
        """The full matrix, Fortran-ordered (materialized if file-backed)."""
        if self._array is not None:
            return self._array
        return self.columns(0, self.p)

    def chunk_bounds(self, chunk_size=None):
        if chunk_size is None:
            chunk_size = min(DEFAULT_CHUNK, self.p)
        chunk_size = int(chunk_size)
        if chunk_size < 1:
            raise UsageError(f"chunk_size must be >= 1, got {chunk_size}")
        if chunk_size > self.p:
            raise UsageError(
                f"chunk_size {chunk_size} exceeds column count {self.p}")
        return [(s, min(s + chunk_size, self.p))
                for s in range(0, self.p, chunk_size)]

    def column_chunks(self, chunk_size=None):
        """Yield (start, block) covering all columns once, in order.

        At most one block is materialized at a time for file-backed storage.
        """
        for start, stop in self.chunk_bounds(chunk_size):
            yield start, self.columns(start, stop)

    def column_norms(self, chunk_size=None):
        """Per-column l2 norms, cached after the first pass."""
        if self._norms is None:
            out = np.empty(self.p)
            for start, block in self.column_chunks(chunk_size):
                out[start:start + block.shape[1]] = np.sqrt(
                    np.einsum("ij,ij->j", block, block))
            self._norms = out
        return self._norms

    def matvec(self, w, chunk_size=None):
        """D @ w as a length-d vector, streamed for file-backed storage."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.p,):
            raise DimensionError(f"weights have shape {w.shape}, expected ({self.p},)")
        if self._array is not None:
            return self._array @ w
        out = np.zeros(self.d)
        for start, block in self.column_chunks(chunk_size):
            ws = w[start:start + block.shape[1]]
            if np.any(ws):
                out += block @ ws
        return out

    def correlations(self, v, chunk_size=None):
        """D^T v as a length-p vector."""
        v = check_target(v, self.d)
        if self._array is not None:
            return self._array.T @ v
        out = np.empty(self.p)
        for start, block in self.column_chunks(chunk_size):
            out[start:start + block.shape[1]] = block.T @ v
        return out

    def max_abs_correlation(self, v, chunk_size=None):
        """(max_i |a_i^T v|, argmax index, sign), ties broken by lowest index."""
        v = check_target(v, self.d)
        best = -1.0
        best_idx = 0
        best_sign = 1
        for start, block in self.column_chunks(chunk_size):
            corr = block.T @ v
            acorr = np.abs(corr)
            j = int(np.argmax(acorr))
            if acorr[j] > best:
                best = float(acorr[j])
                best_idx = start + j
                best_sign = 1 if corr[j] >= 0 else -1
        return best, best_idx, best_sign

    def take(self, indices):
        """In-memory sub-dictionary of the given columns (ascending order)."""
        indices = np.asarray(indices, dtype=np.intp)
        if indices.size == 0:
            return _EmptyDictionary(self.d)
        if self._array is not None:
            return Dictionary.from_array(self._array[:, indices],
                                         normalized=self.normalized)
        out = np.empty((self.d, indices.size), order="F")
        pos = 0
        for start, block in self.column_chunks():
            stop = start + block.shape[1]
            sel = indices[(indices >= start) & (indices < stop)]
            if sel.size:
                out[:, pos:pos + sel.size] = block[:, sel - start]
                pos += sel.size
        dct = Dictionary.from_array(out, normalized=self.normalized)
        return dct


class _EmptyDictionary:
    """Zero-column stand-in produced when screening rejects everything."""

    def __init__(self, d):
        self.d = d
        self.p = 0
        self.normalized = True
        self.file_backed = False

    def to_array(self):
        return np.empty((self.d, 0), order="F")

    def matvec(self, w, chunk_size=None):
        return np.zeros(self.d)

    def column_norms(self, chunk_size=None):
        return np.empty(0)


def lambda_max(dictionary, x):
    """Largest absolute correlation between a feature and the target.

    This is the smallest regularization at which the lasso solution is
    identically zero.
    """
    x = check_target(x, dictionary.d)
    nx = float(np.linalg.norm(x))
    if nx <= 0.0:
        raise UsageError("target vector is zero")
    val, idx, sign = dictionary.max_abs_correlation(x)
    return LambdaMaxResult(lambda_max=val, index=idx, sign=sign)


def normalize_columns(dictionary):
    """Return an in-memory copy with unit-norm columns.

    Raises on a zero column, naming its index. File-backed dictionaries are
    materialized.
    """
    arr = np.array(dictionary.to_array(), order="F", copy=True)
    norms = np.sqrt(np.einsum("ij,ij->j", arr, arr))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise FormatError(f"cannot normalize zero column at index {int(zero[0])}")
    arr /= norms
    return Dictionary.from_array(arr, normalized=True)


def gen_synthetic(d, p, seed, target_mode="random"):
    """Deterministic synthetic test instance.

    Columns are i.i.d. standard normal, unit-normalized. ``target_mode``
    "random" draws a unit-normalized Gaussian target; "in_range" builds the
    target from a sparse random combination of the columns (10% support,
    capped at min(d, p)), so the target lies in the dictionary's range.
    """
    if d < 1 or p < 1:
        raise UsageError(f"invalid instance shape ({d}, {p})")
    if target_mode not in ("random", "in_range"):
        raise UsageError(f"unknown target_mode {target_mode!r}")
    rng = np.random.default_rng(seed)
    arr = np.asfortranarray(rng.standard_normal((d, p)))
    norms = np.sqrt(np.einsum("ij,ij->j", arr, arr))
    norms[norms == 0.0] = 1.0
    arr /= norms
    if target_mode == "random":
        x = rng.standard_normal(d)
    else:
        support = max(1, min(int(round(0.1 * p)), min(d, p)))
        idx = rng.choice(p, size=support, replace=False)
        w0 = np.zeros(p)
        w0[idx] = rng.standard_normal(support)
        x = arr @ w0
    nx = np.linalg.norm(x)
    if nx == 0.0:
        x = np.zeros(d)
        x[0] = 1.0
        nx = 1.0
    x = x / nx
    return Dictionary.from_array(arr, normalized=True), x
