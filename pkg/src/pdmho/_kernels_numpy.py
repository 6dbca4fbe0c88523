"""Pure-numpy twins of the kernels in ``_kernels_numba``.

Loops that carry a recurrence along the matrix stay sequential; everything
else is vectorized (banded products over diagonals, Sturm counts over many
shifts at once).
"""

import numpy as np
from scipy.linalg import solve_banded

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny


def banded_matvec(data, band, v):
    n = data.shape[1]
    out = data[band] * v
    for k in range(1, band + 1):
        out[:-k] += data[band + k, :-k] * v[k:]
        out[k:] += data[band - k, k:] * v[:-k]
    return out


def banded_matmul(a, ba, b, bb):
    n = a.shape[1]
    bc = ba + bb
    c = np.zeros((2 * bc + 1, n))
    for ka in range(-ba, ba + 1):
        lo_i, hi_i = max(0, -ka), min(n, n - ka)
        if lo_i >= hi_i:
            continue
        arow = a[ba + ka, lo_i:hi_i]
        for kb in range(-bb, bb + 1):
            # rows i with j = i + ka and column j + kb both in range
            lo = max(lo_i, -ka - kb)
            hi = min(hi_i, n - ka - kb)
            if lo >= hi:
                continue
            c[bc + ka + kb, lo:hi] += (
                arow[lo - lo_i : hi - lo_i] * b[bb + kb, lo + ka : hi + ka]
            )
    return c


def sturm_count(d, e2, shift):
    """Eigenvalue counts below each entry of ``shift`` (scalar or array)."""
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    guard = _EPS * (np.abs(shift) + 1.0)
    piv = d[0] - shift
    count = (piv < 0.0).astype(np.int64)
    for i in range(1, d.shape[0]):
        piv = np.where(piv == 0.0, guard, piv)
        piv = d[i] - shift - e2[i - 1] / piv
        count += piv < 0.0
    return count


def bisect_lowest(d, e, k, lo, hi, max_iter):
    # all k brackets are bisected together; the bracket for level j is
    # [lo, hi] with count(lo) <= j < count(hi)
    e2 = e * e
    a = np.full(k, float(lo))
    b = np.full(k, float(hi))
    levels = np.arange(k)
    for _ in range(max_iter):
        width = b - a
        active = width > 2.0 * _EPS * np.maximum(np.abs(a), np.abs(b)) + _TINY
        if not active.any():
            break
        mid = 0.5 * (a + b)
        above = sturm_count(d, e2, mid) > levels
        b = np.where(active & above, mid, b)
        a = np.where(active & ~above, mid, a)
    return 0.5 * (a + b)


def tridiag_solve(sub, diag, sup, rhs):
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[: n - 1]
    ab[1] = diag
    ab[2, :-1] = sub[: n - 1]
    scale = max(np.abs(ab).max(), 1.0)
    # exact singularity is expected at a converged shift; nudge the diagonal
    try:
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        ab[1] = ab[1] + _EPS * scale
        return solve_banded((1, 1), ab, rhs, check_finite=False)


def inverse_iteration(d, e, lam, start, n_iter):
    diag = d - lam
    v = start.copy()
    for _ in range(n_iter):
        v = tridiag_solve(e, diag, e, v)
        v /= np.linalg.norm(v)
    return v


def ql_implicit(d, e, z, want_vectors, max_iter):
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= _EPS * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                return l
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * col
                    z[:, i] = c * z[:, i] - s * col
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1
