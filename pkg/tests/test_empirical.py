import itertools
import math

import numpy as np
import pytest

from selab import (ExplicitSource, LocalTimeLedger, RandomWalkSource,
                   bridge_sup, bridge_values, ledger_covariance, lil_margins,
                   mc_fclt, sampled_ecdf, simple_walk, sup_deviation)
from selab.empirical import WeightedEcdf
from selab.fields import DiscreteField, UniformField


def make_ledger(sites):
    led = LocalTimeLedger(len(sites[0]))
    led.record_many(sites)
    return led


def test_weighted_ecdf_evaluation():
    e = WeightedEcdf(np.array([0.2, 0.5]), np.array([0.25, 0.75]))
    assert list(e([0.0, 0.2, 0.3, 0.5, 1.0])) == [0.0, 0.25, 0.25, 1.0, 1.0]
    with pytest.raises(ValueError):
        WeightedEcdf(np.array([0.5, 0.2]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        WeightedEcdf(np.array([0.2, 0.5]), np.array([0.5, 0.4]))


def test_sampled_ecdf_weights_are_local_time_fractions():
    led = make_ledger([(0,), (1,), (0,), (2,)])
    field = DiscreteField([(0.0, 0.5), (1.0, 0.5)])
    e = sampled_ecdf(field, 99, led)
    assert e.weights.sum() == pytest.approx(1.0)
    x = field.site_values(99, np.array([[0], [1], [2]]))
    # site 0 carries weight 1/2, the others 1/4
    for v, w in zip(e.values, e.weights):
        expect = sum({0: 0.5, 1: 0.25, 2: 0.25}[s] for s in range(3)
                     if x[s] == v)
        assert w == pytest.approx(expect)


def test_sup_deviation_matches_dense_scan():
    led = make_ledger([(k % 17,) for k in range(60)])
    field = UniformField()
    e = sampled_ecdf(field, 3, led)
    dense = np.linspace(0, 1, 200001)
    scan = float(np.max(np.abs(e(dense) - field.cdf(dense))))
    exact = sup_deviation(e, field)
    assert exact >= scan - 1e-12
    assert exact <= scan + 1e-4  # grid misses the jump by at most 1/200000


def test_bridge_covariance_identity_by_enumeration():
    # two sites with local times 2 and 1, a two-atom field: enumerate the
    # whole field distribution and compare with F(min) - F(s)F(t)
    led = make_ledger([(0,), (1,), (0,)])
    field = DiscreteField([(0.0, 0.5), (1.0, 0.5)])
    v = led.self_intersections  # 5
    grid = [0.0, 0.5, 1.0]
    f = field.cdf(grid)
    counts = {(0,): 2, (1,): 1}
    cov = np.zeros((3, 3))
    for vals in itertools.product([0.0, 1.0], repeat=2):
        p = 0.25
        y = np.array([sum(c * ((x <= s) - fs)
                          for (x, c) in zip(vals, counts.values()))
                      for s, fs in zip(grid, f)]) / math.sqrt(v)
        cov += p * np.outer(y, y)
    assert np.allclose(cov, ledger_covariance(field, led, grid), atol=1e-12)


def test_bridge_values_zero_mean_over_replicates():
    led = make_ledger([(k % 11, (3 * k) % 7) for k in range(80)])
    field = UniformField()
    ys = np.array([bridge_values(field, seed, led, [0.3, 0.7])
                   for seed in range(4000)])
    assert np.allclose(ys.mean(axis=0), 0.0, atol=0.02)
    target = ledger_covariance(field, led, [0.3, 0.7])
    emp = ys.T @ ys / len(ys)
    assert np.allclose(emp, target, atol=0.02)


def test_bridge_sup_consistent_with_grid():
    led = make_ledger([(k % 13,) for k in range(50)])
    field = UniformField()
    sup = bridge_sup(field, 8, led)
    grid = np.linspace(0, 1, 20001)
    approx = np.abs(bridge_values(field, 8, led, grid)).max()
    assert sup >= approx - 1e-9
    assert sup <= approx + 0.05


def test_mc_fclt_replicate_floor():
    with pytest.raises(ValueError, match="100"):
        mc_fclt(UniformField(), RandomWalkSource(simple_walk(1), 1), 100,
                [0.5], replicates=10, seed_base=0)


def test_mc_fclt_quenched_small_run():
    res = mc_fclt(UniformField(), RandomWalkSource(simple_walk(2), 3), 400,
                  [0.25, 0.5, 0.75], replicates=400, seed_base=17)
    assert res.quenched
    assert np.all(np.abs(res.cov - res.cov_target) <= 4 * res.cov_stderr)
    assert np.all(res.sup_sample >= 0)
    assert res.v >= res.n


def test_mc_fclt_annealed_differs_from_quenched():
    args = (UniformField(), RandomWalkSource(simple_walk(1), 3), 200,
            [0.5])
    q = mc_fclt(*args, replicates=120, seed_base=5, quenched=True)
    a = mc_fclt(*args, replicates=120, seed_base=5, quenched=False)
    assert not np.allclose(q.cov, a.cov)


def test_lil_margins_bounded_walk():
    check = lil_margins(UniformField(), 7, RandomWalkSource(simple_walk(1), 2),
                        s=0.5, checkpoints=[100, 1000, 10000])
    assert len(check.margins) == 3
    assert check.bound == 1.5
    assert check.ok
    with pytest.raises(ValueError):
        lil_margins(UniformField(), 7, RandomWalkSource(simple_walk(1), 2),
                    s=0.5, checkpoints=[8, 100])
