"""Pooled message-update kernels, the hot inner loops of MC density
evolution and finite-length decoding.

Two implementations are provided: numba @njit per-message loops and a
vectorized pure-numpy fallback.  Selection is by the NBPUNCT_NUMBA
environment variable ("0" forces numpy; anything else tries numba and
falls back when the import fails).  Both paths implement the identical
butterfly WHT; outputs agree to float roundoff.

All sampling happens outside the kernels: callers pass pre-drawn degree,
choice, and label arrays so results are reproducible for any worker
count or backend.
"""

import os

import numpy as np

CLAMP = 1e-300

_want_numba = os.environ.get("NBPUNCT_NUMBA", "1") != "0"
try:
    if _want_numba:
        from numba import njit, prange
        HAVE_NUMBA = True
    else:
        raise ImportError
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # pragma: no cover - trivial shim
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn
        return deco

    prange = range


def backend():
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path

def _wht_inplace_np(a):
    # butterfly WHT over the last axis, same op order as the numba kernel
    n = a.shape[-1]
    h = 1
    while h < n:
        for start in range(0, n, 2 * h):
            x = a[..., start:start + h].copy()
            y = a[..., start + h:start + 2 * h].copy()
            a[..., start:start + h] = x + y
            a[..., start + h:start + 2 * h] = x - y
        h *= 2


def _check_pool_np(prev, degrees, choices, labels, out_labels,
                   perm_gather, mul_table):
    n, q = choices.shape[0], prev.shape[1]
    out = np.empty((n, q))
    for d in np.unique(degrees):
        rows = np.nonzero(degrees == d)[0]
        k = d - 1
        msgs = prev[choices[rows, :k]]                        # (m, k, q)
        gat = perm_gather[labels[rows, :k]]                   # (m, k, q)
        msgs = np.take_along_axis(msgs, gat, axis=2)
        _wht_inplace_np(msgs)
        acc = msgs.prod(axis=1)                               # (m, q)
        _wht_inplace_np(acc)
        acc /= q
        acc = np.take_along_axis(acc, mul_table[out_labels[rows]], axis=1)
        np.maximum(acc, CLAMP, out=acc)
        acc /= acc.sum(axis=1, keepdims=True)
        out[rows] = acc
    return out


def _symbol_pool_np(priors, prev, degrees, choices):
    n, q = priors.shape
    out = priors.copy()
    for d in np.unique(degrees):
        rows = np.nonzero(degrees == d)[0]
        k = d - 1
        if k > 0:
            out[rows] *= prev[choices[rows, :k]].prod(axis=1)
    np.maximum(out, CLAMP, out=out)
    out /= out.sum(axis=1, keepdims=True)
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _wht_inplace(v):
        n = v.shape[0]
        h = 1
        while h < n:
            start = 0
            while start < n:
                for i in range(start, start + h):
                    x = v[i]
                    y = v[i + h]
                    v[i] = x + y
                    v[i + h] = x - y
                start += 2 * h
            h *= 2

    @njit(cache=True, parallel=True)
    def _check_pool_nb(prev, degrees, choices, labels, out_labels,
                       perm_gather, mul_table):
        n = degrees.shape[0]
        q = prev.shape[1]
        out = np.empty((n, q))
        for i in prange(n):
            acc = np.ones(q)
            buf = np.empty(q)
            for j in range(degrees[i] - 1):
                src = prev[choices[i, j]]
                gat = perm_gather[labels[i, j]]
                for x in range(q):
                    buf[x] = src[gat[x]]
                _wht_inplace(buf)
                for x in range(q):
                    acc[x] *= buf[x]
            _wht_inplace(acc)
            back = mul_table[out_labels[i]]
            s = 0.0
            for x in range(q):
                v = acc[back[x]] / q
                if v < CLAMP:
                    v = CLAMP
                buf[x] = v
                s += v
            for x in range(q):
                out[i, x] = buf[x] / s
        return out

    @njit(cache=True, parallel=True)
    def _symbol_pool_nb(priors, prev, degrees, choices):
        n = degrees.shape[0]
        q = priors.shape[1]
        out = np.empty((n, q))
        for i in prange(n):
            acc = np.empty(q)
            for x in range(q):
                acc[x] = priors[i, x]
            for j in range(degrees[i] - 1):
                src = prev[choices[i, j]]
                for x in range(q):
                    acc[x] *= src[x]
            s = 0.0
            for x in range(q):
                if acc[x] < CLAMP:
                    acc[x] = CLAMP
                s += acc[x]
            for x in range(q):
                out[i, x] = acc[x] / s
        return out


def check_pool_update(prev, degrees, choices, labels, out_labels, field):
    """One check-node half-iteration over a whole pool.

    prev: (pool, q) previous symbol-side pool; degrees (n,) sampled check
    degrees; choices (n, dmax-1) indices into prev; labels (n, dmax-1)
    and out_labels (n,) nonzero field elements.  Returns (n, q).
    """
    if HAVE_NUMBA:
        return _check_pool_nb(prev, degrees, choices, labels, out_labels,
                              field.perm_gather, field.mul_table)
    return _check_pool_np(prev, degrees, choices, labels, out_labels,
                          field.perm_gather, field.mul_table)


def symbol_pool_update(priors, prev, degrees, choices):
    """One symbol-node half-iteration over a whole pool: prior times the
    product of d-1 chosen check messages, clamped and renormalized."""
    if HAVE_NUMBA:
        return _symbol_pool_nb(priors, prev, degrees, choices)
    return _symbol_pool_np(priors, prev, degrees, choices)
