"""Numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ext.pyx``.
"""
import math

import numpy as np


def merge_sorted(values, probs, tol):
    """Merge a sorted atom list; a new atom starts when the gap to the
    previous raw value exceeds ``tol``. The merged atom keeps the first value."""
    values = np.asarray(values, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if values.size == 0:
        return values.copy(), probs.copy()
    starts = np.empty(values.size, dtype=bool)
    starts[0] = True
    np.greater(np.diff(values), tol, out=starts[1:])
    idx = np.flatnonzero(starts)
    return values[idx].copy(), np.add.reduceat(probs, idx)


def convolve(va, pa, vb, pb, tol):
    sums = np.add.outer(va, vb).ravel()
    prods = np.multiply.outer(pa, pb).ravel()
    order = np.argsort(sums, kind="stable")
    return merge_sorted(sums[order], prods[order], tol)


def log_mean_exp(exponents, probs):
    """ln sum(probs * exp(exponents)), stabilised."""
    top = exponents.max()
    if not math.isfinite(top):
        return top
    return top + math.log(float(np.dot(probs, np.exp(exponents - top))))


def l_function(values, probs, eps, p):
    return log_mean_exp(p * np.log1p(values / eps), probs) / p


def log_mgf(values, probs, s):
    return log_mean_exp(s * values, probs)


def expected_norm(values_list, probs_list, p):
    """E ||(S_1..S_m)||_p for independent coordinates with the given marginals.

    ``p = inf`` gives E max_i S_i. Materialises the joint outcome grid.
    """
    infinite = math.isinf(p)
    acc = np.zeros(1)
    w = np.ones(1)
    for vals, prs in zip(values_list, probs_list):
        if infinite:
            acc = np.maximum.outer(acc, vals).ravel()
        else:
            acc = np.add.outer(acc, np.power(vals, p)).ravel()
        w = np.multiply.outer(w, prs).ravel()
    if infinite:
        return float(np.dot(w, acc))
    return float(np.dot(w, np.power(acc, 1.0 / p)))
