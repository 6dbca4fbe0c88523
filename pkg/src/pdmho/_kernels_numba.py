"""numba kernels: banded products, Sturm bisection, inverse iteration, implicit QL.

Each function here has a drop-in twin in ``_kernels_numpy`` with the same
signature and results; ``kernels`` picks one of the two at import time.
"""

import math

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny


@njit(cache=True)
def banded_matvec(data, band, v):
    n = data.shape[1]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k in range(-band, band + 1):
            j = i + k
            if 0 <= j < n:
                acc += data[band + k, i] * v[j]
        out[i] = acc
    return out


@njit(cache=True)
def banded_matmul(a, ba, b, bb):
    n = a.shape[1]
    bc = ba + bb
    c = np.zeros((2 * bc + 1, n))
    for i in range(n):
        for ka in range(-ba, ba + 1):
            j = i + ka
            if j < 0 or j >= n:
                continue
            aij = a[ba + ka, i]
            if aij == 0.0:
                continue
            for kb in range(-bb, bb + 1):
                col = j + kb
                if col < 0 or col >= n:
                    continue
                c[bc + ka + kb, i] += aij * b[bb + kb, j]
    return c


@njit(cache=True)
def sturm_count(d, e2, shift):
    """Number of eigenvalues strictly below ``shift``."""
    n = d.shape[0]
    count = 0
    piv = d[0] - shift
    if piv < 0.0:
        count += 1
    for i in range(1, n):
        if piv == 0.0:
            piv = _EPS * (abs(shift) + 1.0)
        piv = d[i] - shift - e2[i - 1] / piv
        if piv < 0.0:
            count += 1
    return count


@njit(cache=True)
def bisect_lowest(d, e, k, lo, hi, max_iter):
    e2 = e * e
    out = np.empty(k)
    for j in range(k):
        a = lo if j == 0 else out[j - 1]
        b = hi
        for _ in range(max_iter):
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if sturm_count(d, e2, mid) > j:
                b = mid
            else:
                a = mid
            if b - a <= 2.0 * _EPS * max(abs(a), abs(b)) + _TINY:
                break
        out[j] = 0.5 * (a + b)
    return out


@njit(cache=True)
def tridiag_solve(sub, diag, sup, rhs):
    """Gaussian elimination with partial pivoting on a tridiagonal system.

    Zero pivots are replaced by a tiny multiple of the matrix scale, which is
    the behaviour wanted for inverse iteration.
    """
    n = diag.shape[0]
    d = diag.copy()
    du = np.zeros(n)
    du2 = np.zeros(n)
    dl = np.zeros(n)
    x = rhs.copy()
    for i in range(n - 1):
        du[i] = sup[i]
        dl[i] = sub[i]
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(d[i]))
    for i in range(n - 1):
        scale = max(scale, abs(dl[i]), abs(du[i]))
    tiny = _EPS * max(scale, 1.0)
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            piv = d[i]
            if piv == 0.0:
                piv = tiny
                d[i] = piv
            f = dl[i] / piv
            dl[i] = f
            d[i + 1] -= f * du[i]
            x[i + 1] -= f * x[i]
            du2[i] = 0.0
        else:
            f = d[i] / dl[i]
            d[i] = dl[i]
            dl[i] = f
            tmp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = tmp - f * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -f * du[i + 1]
            tmp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = tmp - f * x[i + 1]
    if d[n - 1] == 0.0:
        d[n - 1] = tiny
    x[n - 1] /= d[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
    return x


@njit(cache=True)
def inverse_iteration(d, e, lam, start, n_iter):
    n = d.shape[0]
    diag = d - lam
    v = start.copy()
    for _ in range(n_iter):
        v = tridiag_solve(e, diag, e, v)
        nrm = 0.0
        for i in range(n):
            nrm += v[i] * v[i]
        nrm = math.sqrt(nrm)
        for i in range(n):
            v[i] /= nrm
    return v


@njit(cache=True)
def ql_implicit(d, e, z, want_vectors, max_iter):
    """Implicit-shift QL on a symmetric tridiagonal matrix, in place.

    ``d`` holds the diagonal, ``e[0:n-1]`` the off-diagonal (``e`` has length
    n), ``z`` is rotated in place when ``want_vectors``. Returns -1 on
    success or the index of the eigenvalue that failed to converge.
    """
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                return l
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
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
                    for row in range(z.shape[0]):
                        f = z[row, i + 1]
                        z[row, i + 1] = s * z[row, i] + c * f
                        z[row, i] = c * z[row, i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1
