import math

import numpy as np
import pytest

from profilelab.fixedpoint import (
    dirichlet_fractions,
    fixpoint_iterate,
    ks_distance,
    pool_diagnostics,
)
from profilelab.spectral import RangeError, range_d1
from profilelab.weight_model import preset


def rng(s=0):
    return np.random.default_rng(s)


def test_dirichlet_sums_to_one():
    u = dirichlet_fractions(3, rng(1), size=100)
    assert u.shape == (100, 3)
    assert np.allclose(u.sum(axis=1), 1.0)
    single = dirichlet_fractions(2, rng(2))
    assert single.shape == (2,)
    with pytest.raises(ValueError):
        dirichlet_fractions(1, rng())


def test_b2_dirichlet_is_uniform():
    u = dirichlet_fractions(2, rng(3), size=4000)[:, 0]
    grid = np.sort(u)
    emp = np.arange(1, 4001) / 4000
    assert np.max(np.abs(emp - grid)) < 1.63 / math.sqrt(4000) * 1.5


def test_ks_distance_edges():
    a = np.arange(10.0)
    assert ks_distance(a, a) == 0.0
    assert ks_distance(a, a + 100.0) == 1.0
    with pytest.raises(ValueError):
        ks_distance(np.array([1.0]), a)


def test_theta_zero_pool_stays_one():
    pool = fixpoint_iterate(preset("bst"), 0.0, pool_size=500, iterations=5, rng=rng(4))
    assert np.allclose(pool.samples, 1.0, atol=1e-13)
    assert pool.mean == pytest.approx(1.0, abs=1e-13)
    assert not pool.divergent


def test_interior_pool_mean_one():
    m = preset("rrt")
    pool = fixpoint_iterate(m, 0.5, pool_size=20000, iterations=15, rng=rng(5))
    # the pool mean is a martingale across sweeps: deviation ~ sqrt(K/M) * std
    drift = math.sqrt(15 * pool.variance / 20000)
    assert abs(pool.mean - 1.0) < max(6 * drift, 0.01)
    assert pool.ks_to_previous < 0.05
    assert not pool.divergent


def test_outside_region_raises():
    m = preset("bst")
    dom = range_d1(m)
    with pytest.raises(RangeError):
        fixpoint_iterate(m, dom.theta_low - 0.2, pool_size=100, iterations=2, rng=rng())


def test_argument_validation():
    with pytest.raises(ValueError):
        fixpoint_iterate(preset("bst"), 0.0, pool_size=1, iterations=2, rng=rng())
    with pytest.raises(ValueError):
        fixpoint_iterate(preset("bst"), 0.0, pool_size=10, iterations=0, rng=rng())


def test_pool_diagnostics():
    p1, prev = fixpoint_iterate(
        preset("bst"), 0.3, pool_size=2000, iterations=8, rng=rng(6), keep_previous=True
    )
    p0 = fixpoint_iterate(preset("bst"), 0.3, pool_size=2000, iterations=7, rng=rng(6))
    d = pool_diagnostics(p1, p0)
    assert set(d) == {"mean", "variance", "ks"}
    assert 0.0 <= d["ks"] <= 1.0
