import math
from fractions import Fraction

import numpy as np
import pytest

from profilelab.martingale import LambdaPoint
from profilelab.normalize import poisson_profile_coeffs
from profilelab.oracle import (
    conditional_martingale_check,
    enumerate_histories,
    exact_mean_profile,
    numeric_fourier_profile,
)
from profilelab.oracle import _exact_mean_profile_sparse
from profilelab.tree_sim import ResourceLimitError
from profilelab.weight_model import marginal, preset


def test_bst_histories_deterministic_profile():
    hist = enumerate_histories(preset("bst"), 2)
    assert len(hist.entries) == 1
    p, prof = hist.entries[0]
    assert p == Fraction(1)
    assert prof.counts == {(1,): 1, (2,): 2}


def test_rrt_histories_n2():
    hist = enumerate_histories(preset("rrt"), 2)
    assert abs(hist.total_probability() - 1) == 0
    profs = {tuple(sorted(prof.counts.items())): p for p, prof in hist.entries}
    assert profs == {
        (((0,), 1), ((1,), 2)): Fraction(1, 2),
        (((0,), 1), ((1,), 1), ((2,), 1)): Fraction(1, 2),
    }


def test_history_cap():
    with pytest.raises(ResourceLimitError):
        enumerate_histories(preset("rrt"), 8, cap=10)


def test_exact_mean_profile_small_values():
    means = exact_mean_profile(preset("rrt"), 2)
    assert means[(0,)] == pytest.approx(1.0, abs=1e-15)
    assert means[(1,)] == pytest.approx(1.5, abs=1e-15)
    assert means[(2,)] == pytest.approx(0.5, abs=1e-15)
    bst = exact_mean_profile(preset("bst"), 3)
    assert bst[(1,)] == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert bst[(3,)] == pytest.approx(4.0 / 3.0, abs=1e-15)


def test_mean_profile_total_mass():
    for name in ("bst", "rrt", "lmr"):
        m = preset(name)
        means = exact_mean_profile(m, 30)
        assert sum(means.values()) == pytest.approx((m.b - 1) * 30 + 1, rel=1e-12)


def test_dense_matches_sparse():
    m = preset("rrt")
    dense = exact_mean_profile(m, 210)  # dispatches to the dense path
    sparse = _exact_mean_profile_sparse(m, 210)
    for l, v in sparse.items():
        if v > 1e-300:
            assert dense[l] == pytest.approx(v, rel=1e-10)


def test_mean_profile_matches_history_enumeration():
    m = preset("port", beta=1)
    n = 3
    hist = enumerate_histories(m, n)
    from collections import defaultdict

    agg = defaultdict(Fraction)
    for p, prof in hist.entries:
        for l, u in prof.counts.items():
            agg[l] += p * u
    means = exact_mean_profile(m, n)
    for l, v in agg.items():
        assert means[l] == pytest.approx(float(v), abs=1e-13)


def test_conditional_martingale_exact():
    grid = [LambdaPoint.real(t) for t in (-math.log(2), 0.0, math.log(2))]
    for name in ("bst", "rrt"):
        assert conditional_martingale_check(preset(name), 3, grid) < 1e-13


def test_fourier_matches_poisson_coeffs():
    t = 1.5
    for name in ("bst", "rrt"):
        m = preset(name)
        coeffs = poisson_profile_coeffs(m, t, 6)
        vals, probs = marginal(m).values_probs()
        for theta in (0.0, 0.4):
            m_theta = float(np.sum(probs * np.exp(-theta * vals[:, 0])))
            for l in range(7):
                integral = numeric_fourier_profile(m, t, theta, l)
                recon = (
                    integral
                    * math.exp(m.b * t * m_theta + theta * l)
                    * math.factorial(l)
                )
                assert recon == pytest.approx(coeffs[l], rel=1e-9)


def test_fourier_argument_validation():
    with pytest.raises(ValueError):
        numeric_fourier_profile(preset("bst"), -1.0, 0.0, 1)
