"""Pure-Python coordinate-descent sweep, numerically equivalent to the
compiled kernel (up to floating-point summation order)."""

import numpy as np


def cd_epoch(A, w, r, lam, col_sq):
    """One full coordinate sweep; updates ``w`` and ``r`` in place and
    returns the largest absolute coordinate change."""
    maxd = 0.0
    for j in range(A.shape[1]):
        cs = col_sq[j]
        if cs <= 0.0:
            continue
        aj = A[:, j]
        corr = float(aj @ r) + w[j] * cs
        if corr > lam:
            winew = (corr - lam) / cs
        elif corr < -lam:
            winew = (corr + lam) / cs
        else:
            winew = 0.0
        delta = winew - w[j]
        if delta != 0.0:
            r -= delta * aj
            w[j] = winew
            maxd = max(maxd, abs(delta))
    return maxd
