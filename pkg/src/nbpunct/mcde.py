"""Monte-Carlo density evolution: pooled message evolution with degree,
label, and channel resampling, convergence detection, and threshold
bisection with repeat-trial statistics.

Each half-iteration draws a fresh pool of outgoing messages.  For a
symbol-side message we sample a degree d from lambda, a punctured-bit
count from the puncturing distribution, a fresh channel prior, and d-1
messages (with replacement) from the previous check-side pool.  For a
check-side message we sample d from rho, d-1 pool messages, and d labels
uniformly from the nonzero field elements.

Randomness is counter-based: every half-iteration owns a Philox stream
keyed by (seed, eval context, iteration, half), so trajectories are
bit-identical for any worker count.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .channel import ChannelParams, ebn0_db_from_sigma, sample_priors
from .ensemble import (Ensemble, PunctDistribution, design_rate,
                       no_puncturing, overall_fraction, punctured_rate)
from .kernels import check_pool_update, symbol_pool_update


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class McdeConfig:
    pool_size: int = 10000
    max_iters: int = 500
    consec_zero: int = 5
    seed: int = 0
    trials: int = 5
    bisect_tol: float = 1e-3
    sigma_lo: float = 0.3
    sigma_hi: float = 1.3
    max_widenings: int = 3
    workers: int = 1

    def __post_init__(self):
        if self.pool_size < 100:
            raise ValueError("pool_size must be >= 100")
        if self.bisect_tol <= 0:
            raise ValueError("bisect_tol must be positive")
        if self.sigma_lo >= self.sigma_hi:
            raise ValueError("need sigma_lo < sigma_hi")


@dataclass
class Trajectory:
    pe_per_iter: list
    converged: bool
    iters_used: int

    def to_dict(self):
        return {"pe_per_iter": self.pe_per_iter, "converged": self.converged,
                "iters_used": self.iters_used}


@dataclass
class ThresholdEstimate:
    sigma_star_mean: float
    sigma_star_std: float
    ebn0_star_db: float
    per_trial: list
    rate_used: float

    def to_dict(self):
        return {"sigma_star_mean": self.sigma_star_mean,
                "sigma_star_std": self.sigma_star_std,
                "ebn0_star_db": self.ebn0_star_db,
                "per_trial": self.per_trial,
                "rate_used": self.rate_used}

    def summary(self):
        return (f"sigma* = {self.sigma_star_mean:.4f} ± "
                f"{self.sigma_star_std:.4f} "
                f"(Eb/N0 = {self.ebn0_star_db:.3f} dB)")


def _stream(seed, *key):
    return Generator(Philox(SeedSequence(entropy=seed, spawn_key=key)))


def _sample_degrees(dist, n, rng):
    degs = np.array(dist.degrees, dtype=np.int64)
    probs = np.array([dist.coeffs[d] for d in degs])
    return degs[rng.choice(len(degs), size=n, p=probs)]


def _sample_punct_counts(pd: PunctDistribution, degrees, p, rng):
    counts = np.zeros(len(degrees), dtype=np.int64)
    u = rng.random(len(degrees))
    for d in np.unique(degrees):
        rows = degrees == d
        ks = np.array(sorted(pd.row(d)), dtype=np.int64)
        cum = np.cumsum([pd.row(d)[k] for k in ks])
        counts[rows] = ks[np.searchsorted(cum, u[rows], side="right").clip(0, len(ks) - 1)]
    return counts


def symbol_half_iteration(e: Ensemble, pd: PunctDistribution,
                          ch: ChannelParams, prev_pool, cfg: McdeConfig, rng):
    """Build one symbol-side pool.  With prev_pool=None (iteration 0) the
    pool is channel priors only."""
    n = cfg.pool_size
    degrees = _sample_degrees(e.lam, n, rng)
    counts = _sample_punct_counts(pd, degrees, e.p, rng)
    priors = sample_priors(ch, counts, e.field, rng)
    if prev_pool is None:
        return priors
    dmax = e.lam.max_degree
    choices = rng.integers(0, len(prev_pool), size=(n, max(dmax - 1, 1)))
    return symbol_pool_update(priors, prev_pool, degrees, choices)


def check_half_iteration(e: Ensemble, prev_pool, cfg: McdeConfig, rng):
    """Build one check-side pool from the previous symbol-side pool."""
    n = cfg.pool_size
    q = e.field.q
    degrees = _sample_degrees(e.rho, n, rng)
    dmax = e.rho.max_degree
    choices = rng.integers(0, len(prev_pool), size=(n, dmax - 1))
    labels = rng.integers(1, q, size=(n, dmax - 1))
    out_labels = rng.integers(1, q, size=n)
    return check_pool_update(prev_pool, degrees, choices, labels,
                             out_labels, e.field)


def error_probability(pool):
    """Fraction of messages not strictly maximized at symbol 0 (ties count
    as errors)."""
    if len(pool) == 0:
        raise ValueError("empty pool")
    correct = pool[:, 0] > pool[:, 1:].max(axis=1)
    return float(1.0 - correct.mean())


def evolve(e: Ensemble, pd: PunctDistribution, ch: ChannelParams,
           cfg: McdeConfig, seed_key=()) -> Trajectory:
    """Run MC-DE at one channel parameter.  Converged means the symbol-side
    pool is error-free for consec_zero consecutive iterations."""
    pe_hist = []
    zeros = 0
    sym_rng = _stream(cfg.seed, *seed_key, 0)
    pool = symbol_half_iteration(e, pd, ch, None, cfg, sym_rng)
    for it in range(1, cfg.max_iters + 1):
        chk_rng = _stream(cfg.seed, *seed_key, 2 * it - 1)
        sym_rng = _stream(cfg.seed, *seed_key, 2 * it)
        chk_pool = check_half_iteration(e, pool, cfg, chk_rng)
        pool = symbol_half_iteration(e, pd, ch, chk_pool, cfg, sym_rng)
        pe = error_probability(pool)
        pe_hist.append(pe)
        zeros = zeros + 1 if pe == 0.0 else 0
        if zeros >= cfg.consec_zero:
            return Trajectory(pe_hist, True, it)
    return Trajectory(pe_hist, False, cfg.max_iters)


def _converges(e, pd, sigma, cfg, seed_key):
    ch = ChannelParams(sigma=sigma, p=e.p)
    return evolve(e, pd, ch, cfg, seed_key=seed_key).converged


def _validate_bracket(e, pd, cfg):
    lo, hi = cfg.sigma_lo, cfg.sigma_hi
    for attempt in range(cfg.max_widenings + 1):
        width = hi - lo
        lo_ok = _converges(e, pd, lo, cfg, (0, attempt, 0))
        hi_ok = _converges(e, pd, hi, cfg, (0, attempt, 1))
        if lo_ok and not hi_ok:
            return lo, hi
        if not lo_ok:
            lo = max(lo - width, 1e-3)
        if hi_ok:
            hi = hi + width
    side = "lower (no convergence)" if not lo_ok else "upper (still converges)"
    raise BracketError(f"invalid sigma bracket after widening: {side} "
                       f"end failed at [{lo:.4f}, {hi:.4f}]")


def threshold_search(e: Ensemble, pd: PunctDistribution = None,
                     cfg: McdeConfig = McdeConfig()) -> ThresholdEstimate:
    """Bisect sigma per trial between a validated bracket; report mean/std
    over trials and the Eb/N0 conversion at the punctured rate."""
    if pd is None:
        pd = no_puncturing(e)
    lo0, hi0 = _validate_bracket(e, pd, cfg)
    per_trial = []
    for t in range(cfg.trials):
        lo, hi = lo0, hi0
        step = 0
        while hi - lo > cfg.bisect_tol:
            mid = 0.5 * (lo + hi)
            if _converges(e, pd, mid, cfg, (1, t, step)):
                lo = mid
            else:
                hi = mid
            step += 1
        per_trial.append(0.5 * (lo + hi))
    mean = float(np.mean(per_trial))
    std = float(np.std(per_trial, ddof=1)) if len(per_trial) > 1 else 0.0
    f = overall_fraction(e, pd)
    rate = punctured_rate(e, pd) if f > 0 else design_rate(e)
    return ThresholdEstimate(mean, std, ebn0_db_from_sigma(mean, rate),
                             per_trial, rate)


def cheap_config(cfg: McdeConfig, pool_size=1000, max_iters=120,
                 bisect_tol=None, trials=1):
    """Scaled-down settings for optimizer screening evaluations."""
    return replace(cfg, pool_size=max(pool_size, 100), max_iters=max_iters,
                   bisect_tol=bisect_tol or max(cfg.bisect_tol, 5e-3),
                   trials=trials)
