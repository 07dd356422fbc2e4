import math

import numpy as np
import pytest

from profilelab.spectral import (
    RangeError,
    in_lambda_tilde,
    is_nondegenerate,
    range_d1,
    range_function_d1,
    spectral_point,
    theta_of_c,
)
from profilelab.weight_model import WeightModel, preset


def test_bst_point_at_zero():
    sp = spectral_point(preset("bst"), 0.0)
    assert abs(sp.A - 1.0) < 1e-14
    assert abs(sp.gradA[0] - 2.0) < 1e-14
    assert abs(sp.hessA[0, 0] - 2.0) < 1e-14
    assert abs(sp.det_hess - 2.0) < 1e-14


def test_lmr_gradient_is_z_minus_inv_z():
    m = preset("lmr")
    for z in (0.5, 1.0, 1.7):
        sp = spectral_point(m, -math.log(z))
        assert abs(sp.gradA[0] - (z - 1.0 / z)) < 1e-12


def test_finite_difference_gradient_and_hessian():
    m = preset("combo2d")
    theta = np.array([0.2, -0.1])
    sp = spectral_point(m, theta)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        dA = (spectral_point(m, theta + e).A - spectral_point(m, theta - e).A) / (2 * h)
        assert abs(dA - (-sp.gradA[i])) < 1e-6  # dA/dtheta = -gradA
        dg = (
            spectral_point(m, theta + e).gradA - spectral_point(m, theta - e).gradA
        ) / (2 * h)
        assert np.allclose(dg, -sp.hessA[:, i], atol=1e-5)


def test_nondegeneracy():
    assert is_nondegenerate(preset("bst"))
    assert is_nondegenerate(preset("combo2d"))
    flat = WeightModel(b=2, d=1, atoms=((1.0, ((0,), (0,))),))
    assert not is_nondegenerate(flat)
    with pytest.raises(RangeError):
        range_d1(flat)


def test_lambda_tilde_membership():
    assert in_lambda_tilde(preset("bst"), 0.0)
    dom = range_d1(preset("bst"))
    inside = 0.5 * (dom.theta_low + min(dom.theta_high, dom.theta_low + 2.0))
    assert in_lambda_tilde(preset("bst"), inside)
    assert not in_lambda_tilde(preset("bst"), dom.theta_low - 0.1)


def test_range_function_shape():
    m = preset("rrt")
    assert abs(range_function_d1(m, 1.0) - (1 - m.b)) < 1e-14
    assert range_function_d1(m, 20.0) > 0


def test_rrt_range_is_zero_e():
    dom = range_d1(preset("rrt"))
    assert dom.z0 == 0.0
    assert abs(dom.z1 - math.e) < 1e-9
    assert math.isinf(dom.theta_high)
    assert abs(dom.c_hi - math.e) < 1e-8  # gradA at z=e: bEZz^Z = z


def test_theta_of_c_inverts_gradient_d1():
    for name in ("bst", "rrt", "lmr"):
        m = preset(name)
        dom = range_d1(m)
        lo = dom.c_lo if math.isfinite(dom.c_lo) else dom.c_hi - 4.0
        for frac in (0.2, 0.5, 0.8):
            c = lo + frac * (dom.c_hi - lo)
            theta = theta_of_c(m, c)
            assert abs(spectral_point(m, theta).gradA[0] - c) < 1e-9


def test_theta_of_c_out_of_range():
    m = preset("bst")
    dom = range_d1(m)
    with pytest.raises(RangeError):
        theta_of_c(m, dom.c_hi + 0.5)


def test_theta_of_c_newton_d2():
    m = preset("combo2d")
    target_theta = np.array([0.3, -0.4])
    c = spectral_point(m, target_theta).gradA
    theta = theta_of_c(m, c)
    assert np.allclose(theta, target_theta, atol=1e-9)
