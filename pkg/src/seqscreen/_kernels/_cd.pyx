# Compiled coordinate-descent sweep. Arrays must be float64; the design
# matrix must be Fortran-ordered so each column is contiguous.

from libc.math cimport fabs


def cd_epoch(double[::1, :] A, double[:] w, double[:] r, double lam,
             double[:] col_sq):
    """One full coordinate sweep; updates ``w`` and the residual ``r`` in
    place and returns the largest absolute coordinate change."""
    cdef Py_ssize_t d = A.shape[0]
    cdef Py_ssize_t p = A.shape[1]
    cdef Py_ssize_t i, j
    cdef double corr, wi, winew, delta, ad, cs
    cdef double maxd = 0.0

    for j in range(p):
        cs = col_sq[j]
        if cs <= 0.0:
            continue
        wi = w[j]
        corr = wi * cs
        for i in range(d):
            corr += A[i, j] * r[i]
        if corr > lam:
            winew = (corr - lam) / cs
        elif corr < -lam:
            winew = (corr + lam) / cs
        else:
            winew = 0.0
        delta = winew - wi
        if delta != 0.0:
            for i in range(d):
                r[i] -= delta * A[i, j]
            w[j] = winew
            ad = fabs(delta)
            if ad > maxd:
                maxd = ad
    return maxd
