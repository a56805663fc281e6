"""Repair operator, concentrated constraint distributions, population
seeding, checkpoints, and a miniature end-to-end puncturing search."""

import math

import numpy as np
import pytest

from nbpunct.ensemble import (DegreeDistribution, Ensemble,
                              clustering_distribution, design_rate,
                              overall_fraction, spreading_distribution)
from nbpunct.gf import field_new
from nbpunct.mcde import McdeConfig
from nbpunct.optimizer import (BENCHMARK_LAMBDA, BENCHMARK_RHO, DeParams,
                               InfeasibilityError, _rng, _seed_population,
                               concentrated_rho, genome_from_distribution,
                               load_checkpoint, optimize_puncturing, repair,
                               save_checkpoint)

F2 = field_new(1)
F16 = field_new(4)

BENCH = Ensemble(F16, DegreeDistribution(BENCHMARK_LAMBDA),
                 DegreeDistribution(BENCHMARK_RHO))


def test_repair_hits_target_fraction():
    rng = np.random.default_rng(0)
    for target in (0.1, 1 / 6, 0.3, 0.44):
        raw = rng.random(len(BENCH.lam.degrees) * 5)
        pd = repair(raw, BENCH, target)
        assert overall_fraction(BENCH, pd) == pytest.approx(target, abs=1e-9)


def test_repair_idempotent():
    rng = np.random.default_rng(1)
    raw = rng.random(len(BENCH.lam.degrees) * 5)
    pd = repair(raw, BENCH, 0.25)
    again = repair(genome_from_distribution(pd, BENCH.lam.degrees, 4),
                   BENCH, 0.25)
    for d in BENCH.lam.degrees:
        for k in range(5):
            assert again.row(d).get(k, 0.0) == \
                pytest.approx(pd.row(d).get(k, 0.0), abs=1e-9)


def test_repair_zero_target_and_negatives():
    raw = -np.ones(len(BENCH.lam.degrees) * 5)
    pd = repair(raw, BENCH, 0.0)
    for d in BENCH.lam.degrees:
        assert pd.row(d) == {0: 1.0}


def test_repair_infeasible_raises():
    # only degree-10 symbols carry any puncture mass; their node fraction
    # is far too small to reach f = 0.9
    raw = np.zeros(len(BENCH.lam.degrees) * 5)
    raw[0] = 1.0          # degree 2 fully unpunctured
    raw[5] = 1.0
    raw[10] = 1.0
    raw[-1] = 1.0         # degree 10, k = 4
    with pytest.raises(InfeasibilityError):
        repair(raw, BENCH, 0.9)
    with pytest.raises(InfeasibilityError):
        repair(raw, BENCH, 1.5)


def test_concentrated_rho_benchmark_pair():
    rho = concentrated_rho(DegreeDistribution(BENCHMARK_LAMBDA), 0.5)
    assert rho.coeffs[5] == pytest.approx(0.5169, abs=1e-4)
    assert rho.coeffs[6] == pytest.approx(0.4831, abs=1e-4)
    e = Ensemble(F16, DegreeDistribution(BENCHMARK_LAMBDA), rho)
    assert design_rate(e) == pytest.approx(0.5, abs=1e-12)
    # a lambda whose matching average check degree is an integer
    rho36 = concentrated_rho(DegreeDistribution({3: 1.0}), 0.5)
    assert rho36.coeffs == {6: 1.0}


def test_seed_population_contains_published_rows():
    pop = _seed_population(BENCH, 1 / 6, 20, 12, _rng(0, 3))
    assert pop.shape == (12, 20)
    cluster = genome_from_distribution(
        clustering_distribution(BENCH, 1 / 6), BENCH.lam.degrees, 4)
    spread = genome_from_distribution(
        spreading_distribution(BENCH, 1 / 6), BENCH.lam.degrees, 4)
    assert any(np.allclose(row, cluster) for row in pop)
    assert any(np.allclose(row, spread) for row in pop)
    # the published optimized rows for r_p = 0.60 qualify at f = 1/6
    assert any(abs(row[0] - 0.7132) < 1e-9 for row in pop)


def test_checkpoint_roundtrip(tmp_path):
    pop = np.arange(12.0).reshape(4, 3)
    fit = [1.0, -math.inf, 0.5, 2.5]
    de = DeParams(pop_size=8, generations=3, seed=9)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, pop, fit, de)
    pop2, fit2, meta = load_checkpoint(path)
    assert np.array_equal(pop, pop2)
    assert fit2 == fit
    assert meta["seed"] == 9 and meta["pop_size"] == 8


def test_de_params_validation():
    with pytest.raises(ValueError):
        DeParams(pop_size=4)
    with pytest.raises(ValueError):
        DeParams(weight=0.0)
    with pytest.raises(ValueError):
        DeParams(crossover=1.5)


def test_optimize_rejects_bad_rate_target():
    de = DeParams(pop_size=8, generations=1)
    cfg = McdeConfig(pool_size=200, max_iters=20, trials=1)
    with pytest.raises(InfeasibilityError):
        optimize_puncturing(BENCH, 0.4, de, cfg)
    with pytest.raises(InfeasibilityError):
        optimize_puncturing(BENCH, 1.0, de, cfg)


def test_optimize_puncturing_miniature(tmp_path):
    e = Ensemble(F2, DegreeDistribution({3: 1.0}), DegreeDistribution({6: 1.0}))
    de = DeParams(pop_size=8, generations=1, seed=4)
    screen = McdeConfig(pool_size=300, max_iters=60, trials=1,
                        bisect_tol=1e-2, sigma_lo=0.4, sigma_hi=1.1,
                        consec_zero=3)
    full = McdeConfig(pool_size=500, max_iters=80, trials=1,
                      bisect_tol=5e-3, sigma_lo=0.4, sigma_hi=1.1,
                      consec_zero=3)
    path = tmp_path / "ck.json"
    pd, est = optimize_puncturing(e, 0.6, de, full, screen_cfg=screen,
                                  checkpoint_path=path)
    assert overall_fraction(e, pd) == pytest.approx(1 / 6, abs=1e-9)
    # a feasible rate-0.6 punctured code cannot beat the unpunctured
    # rate-0.5 threshold and must land above the rate-0.6 Shannon limit
    assert 0.6 < est.sigma_star_mean < 0.92
    assert est.rate_used == pytest.approx(0.6)
    pop, fit, meta = load_checkpoint(path)
    assert pop.shape == (8, 2)
    assert meta["seed"] == 4
