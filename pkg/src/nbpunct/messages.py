"""Probability-vector message algebra for sum-product decoding over GF(2^p).

A message is a length-q numpy array of nonnegative reals summing to 1.
Check-node updates run through the Walsh-Hadamard transform: the GF(2^p)
convolution of messages is a pointwise product in the WHT domain because
addition is bitwise XOR.

Convention: every message on an edge lives in the incident variable's own
domain.  Edge-label permutations are applied only inside
check_node_update (forward by each incoming label, backward by the
inverse of the outgoing label; characteristic 2 means no sign fix-up).
"""

import numpy as np

from .gf import Field, GFError

CLAMP = 1e-300


class DegenerateMessageError(ArithmeticError):
    """All entries underflowed to zero; no normalization possible."""


def normalize(m):
    m = np.asarray(m, dtype=np.float64)
    m = np.maximum(m, 0.0)
    s = m.sum()
    if s <= 0.0:
        raise DegenerateMessageError("message is identically zero")
    return m / s


def permute_by_label(m, h, f: Field):
    """Re-index m from variable x to t = h*x: out[h*x] = m[x]."""
    if h == 0:
        raise GFError("edge label must be nonzero")
    return np.asarray(m)[f.perm_gather[h]]


def wht(m):
    """In-order fast Walsh-Hadamard transform (unnormalized)."""
    out = np.array(m, dtype=np.float64, copy=True)
    n = out.shape[-1]
    h = 1
    while h < n:
        for start in range(0, n, 2 * h):
            a = out[..., start:start + h].copy()
            b = out[..., start + h:start + 2 * h].copy()
            out[..., start:start + h] = a + b
            out[..., start + h:start + 2 * h] = a - b
        h *= 2
    return out


def iwht(m):
    """Inverse WHT: forward transform scaled by 1/q."""
    out = wht(m)
    return out / out.shape[-1]


def check_node_update(incoming, out_label, f: Field):
    """Sum-product constraint-node rule.

    incoming: list of (message, label) pairs for the d-1 other edges.
    Returns the normalized outgoing message on the edge with label
    out_label, i.e. the distribution of x_d under
    sum_j h_j x_j + h_d x_d = 0.
    """
    if not incoming:
        raise ValueError("check node needs at least one incoming message")
    if out_label == 0:
        raise GFError("edge label must be nonzero")
    acc = np.ones(f.q)
    for m, h in incoming:
        acc *= wht(permute_by_label(m, h, f))
    conv = iwht(acc)
    # out = permute conv by inv(h_d): out[x] = conv[h_d * x]
    out = conv[f.mul_table[out_label]]
    out = np.maximum(out, CLAMP)
    return normalize(out)


def symbol_node_update(prior, incoming):
    """Sum-product symbol-node rule: pointwise product of prior and all
    incoming constraint messages, normalized.  Empty incoming returns the
    prior (first half-iteration)."""
    out = np.array(prior, dtype=np.float64, copy=True)
    for m in incoming:
        out *= m
    out = np.maximum(out, CLAMP if out.max() > 0 else 0.0)
    return normalize(out)
