"""BIAWGN channel model under the all-zero-codeword assumption.

Bit 0 maps to BPSK +1; every transmitted bit is observed as +1 plus
N(0, sigma^2) noise.  Symbol priors are products of per-bit likelihoods
over the unpunctured bits; punctured bits contribute nothing, so a fully
punctured symbol gets the uniform prior.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .gf import Field


@dataclass(frozen=True)
class ChannelParams:
    sigma: float
    p: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def priors_from_observations(y, punct_mask, sigma, field: Field):
    """Symbol priors from bit observations.

    y: (n, p) channel outputs; punct_mask: (n, p) boolean, True where the
    bit was punctured (its observation is ignored).  Returns (n, q)
    normalized priors.  log gamma(X) = -(2/sigma^2) * sum_i y_i x_i up to
    a constant, with (x_0..x_{p-1}) the binary image of X.
    """
    y = np.where(punct_mask, 0.0, y)
    logp = (-2.0 / sigma ** 2) * (y @ field.bit_matrix.T)  # (n, q)
    logp -= logp.max(axis=1, keepdims=True)
    pr = np.exp(logp)
    pr /= pr.sum(axis=1, keepdims=True)
    return pr


def sample_priors(ch: ChannelParams, punct_counts, field: Field, rng):
    """Draw fresh channel priors for a batch of symbols.

    punct_counts: (n,) number of punctured bits per symbol; the punctured
    positions are a uniformly random k-subset of the p bit slots per
    symbol.  Returns (n, q).
    """
    n = len(punct_counts)
    p = ch.p
    y = 1.0 + ch.sigma * rng.standard_normal((n, p))
    # rank trick: bit i is punctured iff its uniform draw ranks below k
    ranks = np.argsort(rng.random((n, p)), axis=1).argsort(axis=1)
    mask = ranks < np.asarray(punct_counts)[:, None]
    return priors_from_observations(y, mask, ch.sigma, field)


def sample_prior(ch: ChannelParams, mask_bits, field: Field, rng):
    """Single-symbol prior with an explicit set of punctured bit positions."""
    y = 1.0 + ch.sigma * rng.standard_normal((1, ch.p))
    mask = np.zeros((1, ch.p), dtype=bool)
    for b in mask_bits:
        mask[0, b] = True
    return priors_from_observations(y, mask, ch.sigma, field)[0]


# ------------------------------------------------------------- conversions

def ebn0_db_from_sigma(sigma, rate):
    if sigma <= 0 or not 0 < rate < 1:
        raise ValueError("need sigma > 0 and rate in (0,1)")
    return -10.0 * math.log10(2.0 * rate * sigma ** 2)


def sigma_from_ebn0_db(ebn0_db, rate):
    if not 0 < rate < 1:
        raise ValueError("rate must be in (0,1)")
    return math.sqrt(10.0 ** (-ebn0_db / 10.0) / (2.0 * rate))


def biawgn_capacity(sigma):
    """BIAWGN capacity in bits/channel use at noise deviation sigma.

    C = 1 - E[log2(1 + exp(-2y/sigma^2))], y ~ N(1, sigma^2), computed by
    adaptive quadrature.
    """
    s2 = sigma ** 2

    def integrand(y):
        # log1p(exp(t)) evaluated stably for large |t|
        t = -2.0 * y / s2
        val = np.where(t > 30, t, np.log1p(np.exp(np.minimum(t, 30.0))))
        return (math.exp(-(y - 1.0) ** 2 / (2 * s2))
                / math.sqrt(2 * math.pi * s2)) * val / math.log(2.0)

    lo = 1.0 - 10.0 * sigma
    hi = 1.0 + 10.0 * sigma
    loss, _ = integrate.quad(integrand, lo, hi, limit=200)
    return 1.0 - loss


def shannon_sigma(rate):
    """Noise deviation at which BIAWGN capacity equals rate (bisection to
    1e-6)."""
    if not 0 < rate < 1:
        raise ValueError("rate must be in (0,1)")
    lo, hi = 1e-3, 20.0
    while biawgn_capacity(hi) > rate:
        hi *= 2
    return optimize.brentq(lambda s: biawgn_capacity(s) - rate, lo, hi,
                           xtol=1e-6)


def shannon_ebn0_db(rate):
    return ebn0_db_from_sigma(shannon_sigma(rate), rate)
