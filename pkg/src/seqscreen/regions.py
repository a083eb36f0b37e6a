"""Dual bounding regions and one-shot screening tests.

A region is a sphere S(q, r) optionally intersected with one closed half
space {theta : n^T theta <= c}. The screening value mu(a) is the exact
maximum of a^T theta over the region; a feature is rejected when both
mu(a) < 1 and mu(-a) < 1, which certifies a zero weight in the lasso
solution. The comparison against 1 carries only a rounding-error
allowance, biasing toward keeping features so that rejection stays safe.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dictionary import Dictionary, check_target
from .errors import (DimensionError, IntegrityError, RegionError, UsageError)

_TOL = 1e-12
_UNIT_TOL = 1e-9


def thread_count():
    """Internal parallelism cap: SEQSCREEN_THREADS, else hardware default."""
    raw = os.environ.get("SEQSCREEN_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SEQSCREEN_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"SEQSCREEN_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class Region:
    """Sphere (center q, radius r), optionally cut by one half space."""

    q: np.ndarray
    r: float
    n: Optional[np.ndarray] = None
    c: Optional[float] = None
    degenerate: bool = False

    def __post_init__(self):
        if not self.r > 0:
            raise RegionError(f"sphere radius must be positive, got {self.r}")
        if (self.n is None) != (self.c is None):
            raise RegionError("half space requires both normal and offset")
        if self.n is not None:
            nn = float(np.linalg.norm(self.n))
            if abs(nn - 1.0) > _UNIT_TOL:
                raise RegionError(f"half-space normal norm {nn} is not 1")
            if not self.c > float(self.n @ self.q) - self.r:
                raise RegionError("region has empty interior")

    @property
    def has_halfspace(self):
        return self.n is not None


@dataclass(frozen=True)
class KeepMask:
    """Boolean survival vector over features after a screening pass."""

    keep: np.ndarray

    @property
    def kept_count(self):
        return int(np.count_nonzero(self.keep))

    def indices(self):
        return np.flatnonzero(self.keep)


def build_initial_region(x, lambda_1, lmr, a_star):
    """First-step region: the sphere around x/lambda_1 reaching x/lambda_max,
    cut by the half space of the most correlated feature."""
    lam_max = lmr.lambda_max
    if not 0 < lambda_1 < lam_max:
        raise RegionError(
            f"lambda_1 must lie in (0, {lam_max}), got {lambda_1}")
    x = np.asarray(x, dtype=np.float64)
    q = x / lambda_1
    r = float(np.linalg.norm(q - x / lam_max))
    if r < _TOL:
        raise RegionError("initial sphere radius is numerically zero")
    a = np.asarray(a_star, dtype=np.float64)
    na = float(np.linalg.norm(a))
    if na <= 0.0:
        raise RegionError("most-correlated feature has zero norm")
    # sign * a^T theta <= 1, renormalized to a unit normal
    n = (lmr.sign / na) * a
    c = 1.0 / na
    return Region(q=q, r=r, n=n, c=c)


def build_step_region(x, lambda_k, lambda_prev, theta_prev):
    """Step-k region from the previous dual point.

    Sphere: center x/lambda_k, radius to theta_prev. Half space: the
    separating hyperplane of x/lambda_prev from the dual feasible set,
    anchored at theta_prev. If x/lambda_prev and theta_prev coincide the
    half space is dropped and the region flagged degenerate.
    """
    if not 0 < lambda_k < lambda_prev:
        raise RegionError(
            f"need 0 < lambda_k < lambda_prev, got {lambda_k}, {lambda_prev}")
    x = np.asarray(x, dtype=np.float64)
    theta_prev = np.asarray(theta_prev, dtype=np.float64)
    q = x / lambda_k
    r = float(np.linalg.norm(q - theta_prev))
    if r < _TOL:
        raise RegionError("step sphere radius is numerically zero")
    v = x / lambda_prev - theta_prev
    nv = float(np.linalg.norm(v))
    if nv <= _TOL:
        return Region(q=q, r=r, degenerate=True)
    n = v / nv
    c = float(n @ theta_prev)
    # When theta_prev is proportional to x the cut is exactly tangent to the
    # sphere (n^T q - c = r); rounding can push it either side, so treat
    # near-tangency as the aligned case and keep the sphere alone.
    if float(n @ q) - c >= r * (1.0 - 1e-12):
        return Region(q=q, r=r, degenerate=True)
    # The sphere center must fall strictly outside the half space; this is
    # guaranteed for a correctly constructed region and checked at runtime.
    if not float(n @ q) > c:
        raise IntegrityError("sphere center unexpectedly inside the half space")
    return Region(q=q, r=r, n=n, c=c)


def dpp_region(theta_prev, lambda_k, lambda_prev):
    """Sphere bound ||theta_k - theta_prev|| <= 1/lambda_k - 1/lambda_prev."""
    if not 0 < lambda_k < lambda_prev:
        raise RegionError(
            f"need 0 < lambda_k < lambda_prev, got {lambda_k}, {lambda_prev}")
    r = 1.0 / lambda_k - 1.0 / lambda_prev
    if r < _TOL:
        raise RegionError("sphere radius is numerically zero")
    theta_prev = np.asarray(theta_prev, dtype=np.float64)
    return Region(q=theta_prev.copy(), r=r)


def region_diameter(region):
    """Exact diameter: 2 sqrt(r^2 - (n^T q - c)^2) when the center is cut
    off by the half space, else 2r."""
    if not region.has_halfspace:
        return 2.0 * region.r
    h = float(region.n @ region.q) - region.c
    if h >= region.r:
        raise RegionError("region has empty interior")
    if h > 0.0:
        return 2.0 * float(np.sqrt(max(region.r ** 2 - h ** 2, 0.0)))
    return 2.0 * region.r


def prop1_diameter(x, n_prev, lambda_k, lambda_prev):
    """Closed-form diameter of the step-k region:
    2 (1/lambda_k - 1/lambda_prev) sqrt(x^T (I - n n^T) x)."""
    x = np.asarray(x, dtype=np.float64)
    n_prev = np.asarray(n_prev, dtype=np.float64)
    quad = float(x @ x) - float(n_prev @ x) ** 2
    quad = max(quad, 0.0)
    return 2.0 * (1.0 / lambda_k - 1.0 / lambda_prev) * float(np.sqrt(quad))


def _mu_pair(region, block):
    """mu(a) and mu(-a) for every column of ``block``, vectorized.

    Also returns a per-column magnitude scale of the computation, used by
    callers that need a rounding-error allowance for comparisons.
    """
    q = region.q
    r = region.r
    aq = block.T @ q
    norms = np.sqrt(np.einsum("ij,ij->j", block, block))
    scale = np.abs(aq) + r * norms
    free = aq + r * norms          # cap-inactive value for +a
    free_neg = -aq + r * norms
    if not region.has_halfspace:
        return free, free_neg, scale
    delta = (region.c - float(region.n @ q)) / r
    if delta >= 1.0:
        # Half space does not cut the sphere.
        return free, free_neg, scale
    t = block.T @ region.n
    perp = np.sqrt(np.maximum(norms ** 2 - t ** 2, 0.0))
    root = np.sqrt(max(1.0 - delta * delta, 0.0))
    capped = aq + r * (delta * t + root * perp)
    # mu(-a): same expression with (aq, t) -> (-aq, -t)
    capped_neg = -aq + r * (-delta * t + root * perp)
    mu_pos = np.where(t > delta * norms, capped, free)
    mu_neg = np.where(-t > delta * norms, capped_neg, free_neg)
    return mu_pos, mu_neg, scale


def region_max(region, a):
    """Exact maximum of a^T theta over the region (closed form)."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != region.q.shape:
        raise DimensionError(
            f"feature has shape {a.shape}, expected {region.q.shape}")
    mu_pos, _, _ = _mu_pair(region, np.asfortranarray(a[:, None]))
    return float(mu_pos[0])


def screen(dictionary, region, chunk_size=None):
    """One-shot screening pass over all features.

    keep[i] iff mu(a_i) >= 1 or mu(-a_i) >= 1, where the comparison carries
    a rounding-error allowance proportional to the magnitudes summed in mu.
    Without it a feature whose exact mu equals 1 — e.g. the feature whose
    own constraint supplies the half space — could be dropped or kept
    depending on the last bit of a dot product, breaking safety. Streams
    over column chunks, never materializing more than one chunk per worker
    thread.
    """
    if region.q.shape != (dictionary.d,):
        raise DimensionError(
            f"region dimension {region.q.shape} != dictionary rows {dictionary.d}")
    bounds = dictionary.chunk_bounds(chunk_size)

    def work(b):
        block = dictionary.columns(b[0], b[1])
        mu_pos, mu_neg, scale = _mu_pair(region, block)
        guard = 1.0 - 1e-12 * np.maximum(scale, 1.0)
        return (mu_pos >= guard) | (mu_neg >= guard)

    threads = min(thread_count(), len(bounds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return KeepMask(keep=np.concatenate(parts))


def strong_rule_screen(dictionary, x, lambda_k, lambda_prev, w_prev,
                       chunk_size=None):
    """Sequential strong rule: discard i iff
    |a_i^T (x - D w_prev)| < 2 lambda_k - lambda_prev.

    Heuristic, not safe: may falsely discard features. When the threshold
    is nonpositive every feature is kept.
    """
    if not lambda_k < lambda_prev:
        raise UsageError("strong rule requires lambda_k < lambda_prev")
    x = check_target(x, dictionary.d)
    w_prev = np.asarray(w_prev, dtype=np.float64)
    if w_prev.shape != (dictionary.p,):
        raise DimensionError(
            f"weights have shape {w_prev.shape}, expected ({dictionary.p},)")
    threshold = 2.0 * lambda_k - lambda_prev
    if threshold <= 0.0:
        return KeepMask(keep=np.ones(dictionary.p, dtype=bool))
    residual = x - dictionary.matvec(w_prev, chunk_size)
    corr = dictionary.correlations(residual, chunk_size)
    return KeepMask(keep=np.abs(corr) >= threshold)
