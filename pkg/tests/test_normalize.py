import math

import numpy as np
import pytest

from profilelab.normalize import (
    BoundaryWarning,
    a_bar,
    a_hat_d1,
    l_n,
    log_a_bar,
    log_a_c,
    log_gamma,
    poisson_profile_coeffs,
)
from profilelab.spectral import range_d1, spectral_point
from profilelab.weight_model import preset


def test_l_n_floor():
    # floor(c log n / (b-1)) componentwise
    assert l_n(2.0, 1000, 2)[0] == math.floor(2 * math.log(1000))
    assert l_n(-0.5, 100, 2)[0] == math.floor(-0.5 * math.log(100))
    assert list(l_n([1.0, 2.0], 100, 3)) == [
        math.floor(math.log(100) / 2),
        math.floor(math.log(100)),
    ]
    with pytest.raises(ValueError):
        l_n(1.0, 1, 2)


def test_a_hat_matches_a_bar():
    # two independent formula paths must agree to working precision
    for name in ("bst", "rrt"):
        m = preset(name)
        for n, l in ((1000, 8), (10**6, 15), (10**6, 20)):
            hat = a_hat_d1(m, n, l)
            bar = a_bar(m, n, l)
            assert abs(hat / bar - 1.0) < 1e-12, (name, n, l)


def test_log_a_c_uses_floored_level():
    m = preset("bst")
    n = 10**4
    c = 1.7
    lev = float(l_n(c, n, m.b)[0])
    # recompute from the exact-l variant at the floored level, adjusting for
    # the different theta (a_bar resolves theta from l, log_a_c from c)
    assert math.isfinite(log_a_c(m, n, c))
    # theta = 0 slope: A_c(n) = n / sqrt(2 pi log n det)
    c0 = spectral_point(m, 0.0).gradA[0]
    expect = math.log(n) - 0.5 * math.log(2 * math.pi * math.log(n) * 2.0)
    assert abs(log_a_c(m, n, c0) - expect) < 1e-12


def test_boundary_warning():
    m = preset("bst")
    dom = range_d1(m)
    theta_near = dom.theta_low + 5e-7
    c_near = spectral_point(m, theta_near).gradA[0]
    n = 10**4
    l_near = c_near * math.log(n) / (m.b - 1)
    with pytest.warns(BoundaryWarning):
        log_a_bar(m, n, l_near)


def test_poisson_coeffs_closed_forms():
    t = 2.0
    ls = np.arange(11)
    bst = poisson_profile_coeffs(preset("bst"), t, 10)
    assert np.allclose(bst, (2 * t) ** ls, rtol=1e-12)
    rrt = poisson_profile_coeffs(preset("rrt"), t, 10)
    assert np.allclose(rrt, math.exp(t) * t**ls, rtol=1e-12)


def test_poisson_coeffs_rejects_negative_support():
    with pytest.raises(ValueError):
        poisson_profile_coeffs(preset("lmr"), 1.0, 5)
    with pytest.raises(ValueError):
        poisson_profile_coeffs(preset("bst"), -1.0, 5)


def test_log_gamma():
    assert abs(log_gamma(0.5) - 0.5 * math.log(math.pi)) < 1e-13
    assert abs(log_gamma(5.0) - math.log(24.0)) < 1e-13
    with pytest.raises(ValueError):
        log_gamma(0.0)
