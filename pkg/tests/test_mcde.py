"""Monte-Carlo density evolution tests: sampling statistics,
convergence behaviour on known-easy and known-impossible cases, and
bit-level determinism."""

import numpy as np
import pytest

from nbpunct.channel import ChannelParams
from nbpunct.ensemble import (DegreeDistribution, Ensemble,
                              clustering_distribution, no_puncturing)
from nbpunct.gf import field_new
from nbpunct.mcde import (BracketError, McdeConfig, ThresholdEstimate,
                          _sample_degrees, _sample_punct_counts, _stream,
                          error_probability, evolve, symbol_half_iteration,
                          threshold_search)

F2 = field_new(1)
F8 = field_new(3)


def regular(f, dv, dc):
    return Ensemble(f, DegreeDistribution({dv: 1.0}),
                    DegreeDistribution({dc: 1.0}))


def test_error_probability_cases():
    q = 8
    delta = np.zeros((10, q))
    delta[:, 0] = 1.0
    assert error_probability(delta) == 0.0
    uniform = np.full((10, q), 1.0 / q)
    assert error_probability(uniform) == 1.0
    mixed = np.vstack([delta[:5], uniform[:5]])
    assert error_probability(mixed) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        error_probability(np.empty((0, q)))


def test_degree_sampling_matches_distribution():
    lam = DegreeDistribution({2: 0.5376, 3: 0.1678, 5: 0.1360, 10: 0.1586})
    rng = _stream(3, 0)
    n = 200000
    degs = _sample_degrees(lam, n, rng)
    for d, c in lam.coeffs.items():
        emp = np.mean(degs == d)
        # 5 sigma binomial band
        assert abs(emp - c) < 5 * np.sqrt(c * (1 - c) / n)


def test_punct_count_sampling():
    e = regular(F8, 3, 6)
    pd = clustering_distribution(e, 0.5)
    rng = _stream(4, 0)
    degrees = np.full(50000, 3)
    counts = _sample_punct_counts(pd, degrees, e.p, rng)
    assert set(np.unique(counts)) <= {0, 3}
    assert np.mean(counts == 3) == pytest.approx(0.5, abs=0.02)


def test_iteration_zero_pool_is_priors():
    e = regular(F8, 3, 6)
    cfg = McdeConfig(pool_size=500, seed=1)
    ch = ChannelParams(sigma=0.8, p=3)
    pool = symbol_half_iteration(e, no_puncturing(e), ch, None, cfg,
                                 _stream(1, 0))
    assert pool.shape == (500, 8)
    assert np.allclose(pool.sum(axis=1), 1.0)
    # at sigma=0.8 the all-zero prior should usually dominate
    assert error_probability(pool) < 0.5


def test_easy_sigma_converges_hard_sigma_does_not():
    e = regular(F2, 3, 6)
    cfg = McdeConfig(pool_size=600, max_iters=120, seed=5)
    good = evolve(e, no_puncturing(e), ChannelParams(sigma=0.70, p=1), cfg)
    assert good.converged and good.iters_used < 120
    bad = evolve(e, no_puncturing(e), ChannelParams(sigma=1.10, p=1), cfg)
    assert not bad.converged
    # error probability cannot rebound from exactly zero
    pe = np.array(good.pe_per_iter)
    first_zero = np.nonzero(pe == 0.0)[0][0]
    assert np.all(pe[first_zero:] == 0.0)


def test_fully_punctured_never_converges():
    e = regular(F8, 3, 6)
    pd = clustering_distribution(e, 1.0)
    cfg = McdeConfig(pool_size=400, max_iters=40, seed=2)
    traj = evolve(e, pd, ChannelParams(sigma=0.5, p=3), cfg)
    assert not traj.converged
    assert min(traj.pe_per_iter) > 0.5


def test_evolve_deterministic():
    e = regular(F8, 3, 6)
    cfg = McdeConfig(pool_size=400, max_iters=30, seed=11)
    ch = ChannelParams(sigma=0.85, p=3)
    a = evolve(e, no_puncturing(e), ch, cfg, seed_key=(9,))
    b = evolve(e, no_puncturing(e), ch, cfg, seed_key=(9,))
    assert a.pe_per_iter == b.pe_per_iter


def test_threshold_search_binary_36_small_pool():
    e = regular(F2, 3, 6)
    cfg = McdeConfig(pool_size=1500, max_iters=200, trials=2,
                     bisect_tol=4e-3, sigma_lo=0.6, sigma_hi=1.1, seed=0)
    est = threshold_search(e, cfg=cfg)
    assert isinstance(est, ThresholdEstimate)
    # coarse check at this pool size; acceptance runs the full-scale one
    assert est.sigma_star_mean == pytest.approx(0.88, abs=0.03)
    assert est.rate_used == pytest.approx(0.5)
    again = threshold_search(e, cfg=cfg)
    assert again.per_trial == est.per_trial
    d = est.to_dict()
    assert d["per_trial"] == est.per_trial
    assert "sigma* = " in est.summary()


def test_invalid_bracket_raises():
    e = regular(F2, 3, 6)
    cfg = McdeConfig(pool_size=400, max_iters=40, trials=1,
                     sigma_lo=1.2, sigma_hi=1.3, max_widenings=0, seed=0)
    with pytest.raises(BracketError):
        threshold_search(e, cfg=cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        McdeConfig(pool_size=10)
    with pytest.raises(ValueError):
        McdeConfig(sigma_lo=1.0, sigma_hi=0.5)
    with pytest.raises(ValueError):
        McdeConfig(bisect_tol=0.0)
