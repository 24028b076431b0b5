# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pure.py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, pow, isinf, fmax, sqrt

cnp.import_array()

from . import _pure

# above this many atoms numpy's vectorised exp/log1p beats the scalar libm loop
VECTOR_CUTOFF = 512


def merge_sorted(values, probs, double tol):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] pr = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], k, out = 0
    ov = np.empty(n, dtype=np.float64)
    op = np.empty(n, dtype=np.float64)
    cdef double[::1] mv = ov
    cdef double[::1] mp = op
    if n == 0:
        return ov, op
    mv[0] = v[0]
    mp[0] = pr[0]
    for k in range(1, n):
        if v[k] - v[k - 1] > tol:
            out += 1
            mv[out] = v[k]
            mp[out] = pr[k]
        else:
            mp[out] += pr[k]
    return ov[:out + 1].copy(), op[:out + 1].copy()


def convolve(va, pa, vb, pb, double tol):
    cdef const double[::1] a = np.ascontiguousarray(va, dtype=np.float64)
    cdef const double[::1] ap = np.ascontiguousarray(pa, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(vb, dtype=np.float64)
    cdef const double[::1] bp = np.ascontiguousarray(pb, dtype=np.float64)
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], i, j, k = 0
    sums = np.empty(na * nb, dtype=np.float64)
    prods = np.empty(na * nb, dtype=np.float64)
    cdef double[::1] s = sums
    cdef double[::1] q = prods
    for i in range(na):
        for j in range(nb):
            s[k] = a[i] + b[j]
            q[k] = ap[i] * bp[j]
            k += 1
    order = np.argsort(sums, kind="stable")
    return merge_sorted(sums[order], prods[order], tol)


cdef double _lse(const double[::1] e, const double[::1] pr):
    cdef Py_ssize_t n = e.shape[0], k
    cdef double top = e[0], acc = 0.0
    for k in range(1, n):
        if e[k] > top:
            top = e[k]
    if isinf(top):
        return top
    for k in range(n):
        acc += pr[k] * exp(e[k] - top)
    return top + log(acc)


def log_mean_exp(exponents, probs):
    return _lse(np.ascontiguousarray(exponents, dtype=np.float64),
                np.ascontiguousarray(probs, dtype=np.float64))


def l_function(values, probs, double eps, double p):
    if len(values) > VECTOR_CUTOFF:
        return _pure.l_function(values, probs, eps, p)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], k
    ex = np.empty(n, dtype=np.float64)
    cdef double[::1] e = ex
    for k in range(n):
        e[k] = p * log1p(v[k] / eps)
    return _lse(e, np.ascontiguousarray(probs, dtype=np.float64)) / p


def log_mgf(values, probs, double s):
    if len(values) > VECTOR_CUTOFF:
        return _pure.log_mgf(values, probs, s)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], k
    ex = np.empty(n, dtype=np.float64)
    cdef double[::1] e = ex
    for k in range(n):
        e[k] = s * v[k]
    return _lse(e, np.ascontiguousarray(probs, dtype=np.float64))


def expected_norm(values_list, probs_list, double p):
    """Streams the joint outcome grid in O(m) memory.

    Prefix sums and prefix weights are kept per coordinate, so advancing the
    mixed-radix counter only recomputes the suffix that changed.
    """
    cdef Py_ssize_t m = len(values_list), i, k, last
    cdef bint infinite = isinf(p)
    if m == 0:
        return 0.0
    sizes = np.array([len(v) for v in values_list], dtype=np.intp)
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.intp)
    flat_v = np.concatenate([np.asarray(v, dtype=np.float64) for v in values_list])
    flat_p = np.concatenate([np.asarray(q, dtype=np.float64) for q in probs_list])
    if not infinite:
        flat_v = np.power(flat_v, p)
    cdef double[::1] fv = flat_v
    cdef double[::1] fp = flat_p
    cdef Py_ssize_t[::1] sz = sizes
    cdef Py_ssize_t[::1] off = offsets
    cdef Py_ssize_t[::1] idx = np.zeros(m, dtype=np.intp)
    # pre_acc[i], pre_w[i]: combined value and weight of coordinates < i
    cdef double[::1] pre_acc = np.zeros(m + 1)
    cdef double[::1] pre_w = np.ones(m + 1)
    cdef double inv_p = 0.0 if infinite else 1.0 / p
    cdef bint square = p == 2.0
    cdef double a, result = 0.0, part
    last = m - 1
    i = 0
    while True:
        # rebuild prefixes for coordinates i..m-2 from the current counter
        while i < last:
            k = off[i] + idx[i]
            pre_acc[i + 1] = fmax(pre_acc[i], fv[k]) if infinite else pre_acc[i] + fv[k]
            pre_w[i + 1] = pre_w[i] * fp[k]
            i += 1
        part = 0.0
        for k in range(off[last], off[last] + sz[last]):
            if infinite:
                a = fmax(pre_acc[last], fv[k])
            elif square:
                a = sqrt(pre_acc[last] + fv[k])
            else:
                a = pow(pre_acc[last] + fv[k], inv_p)
            part += fp[k] * a
        result += pre_w[last] * part
        i = last - 1
        while i >= 0:
            idx[i] += 1
            if idx[i] < sz[i]:
                break
            idx[i] = 0
            i -= 1
        if i < 0:
            break
    return result
