"""Normalization constants for the profile limit law, the level index, and
the Poisson-mixture level coefficients of the continuous-time profile."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import gammaln

from profilelab.martingale import LambdaPoint, m_exponent
from profilelab.spectral import range_d1, spectral_point, theta_of_c
from profilelab.weight_model import WeightModel, marginal

__all__ = [
    "l_n",
    "log_a_c",
    "a_c",
    "log_a_bar",
    "a_bar",
    "a_hat_d1",
    "poisson_profile_coeffs",
    "log_gamma",
    "BoundaryWarning",
]

BOUNDARY_MARGIN = 1e-6


class BoundaryWarning(UserWarning):
    """theta sits within the margin of the admissible-region boundary."""


def l_n(c, n: int, b: int) -> np.ndarray:
    """Componentwise floor of c log(n) / (b-1), the level tracked for slope c.

    The bracket is read as floor also for negative coordinates; the
    exp(-theta . l) factor of the normalization absorbs the rounding.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return np.floor(c * math.log(n) / (b - 1)).astype(np.int64)


def _log_norm(model: WeightModel, n: int, theta: np.ndarray, level: np.ndarray) -> float:
    # common shape of the normalizations: only the exp(-theta . level) factor
    # differs between the floored and the exact-level variant
    b = model.b
    sp = spectral_point(model, theta)
    me = sp.A + 1.0  # bEe^{-theta.Z}
    d = model.d
    return float(
        (me - 1.0) / (b - 1) * math.log(n)
        + float(theta @ level)
        - 0.5 * (d * math.log(2.0 * math.pi * math.log(n) / (b - 1)) + math.log(sp.det_hess))
        + gammaln(1.0 / (b - 1))
        - gammaln(me / (b - 1))
    )


def log_a_c(model: WeightModel, n: int, c) -> float:
    """log of the main normalization A_c(n), with the floored level l_n(c)."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    theta = theta_of_c(model, c)
    lev = l_n(c, n, model.b).astype(float)
    return _log_norm(model, n, theta, lev)


def a_c(model: WeightModel, n: int, c) -> float:
    return math.exp(log_a_c(model, n, c))


def _check_boundary(model: WeightModel, theta: np.ndarray) -> None:
    if model.d != 1:
        return
    dom = range_d1(model)
    t = float(theta[0])
    if min(abs(t - dom.theta_low), abs(t - dom.theta_high)) < BOUNDARY_MARGIN:
        warnings.warn(
            f"theta={t} within {BOUNDARY_MARGIN} of the admissible boundary "
            f"({dom.theta_low}, {dom.theta_high}); limit theorems degrade here",
            BoundaryWarning,
            stacklevel=3,
        )


def log_a_bar(model: WeightModel, n: int, l) -> float:
    """log of the level-indexed normalization: theta solves
    bEZe^{-theta.Z} = (b-1) l / log(n) and the exact l enters the
    exp(-theta . l) factor (no floor)."""
    l = np.atleast_1d(np.asarray(l, dtype=float))
    c = (model.b - 1) * l / math.log(n)
    theta = theta_of_c(model, c)
    _check_boundary(model, theta)
    return _log_norm(model, n, theta, l)


def a_bar(model: WeightModel, n: int, l) -> float:
    return math.exp(log_a_bar(model, n, l))


def a_hat_d1(model: WeightModel, n: int, l: int) -> float:
    """d=1 specialization in the z = e^{-theta} parametrization; must agree
    with a_bar to working precision (independent formula path)."""
    if model.d != 1:
        raise ValueError("a_hat_d1 requires d = 1")
    b = model.b
    c = (b - 1) * l / math.log(n)
    theta = float(theta_of_c(model, np.array([c]))[0])
    z = math.exp(-theta)
    vals, probs = marginal(model).values_probs()
    zz = vals[:, 0]
    mz = b * float(np.sum(probs * z**zz))  # bEz^Z
    m2 = b * float(np.sum(probs * zz**2 * z**zz))  # bEZ^2 z^Z
    log_val = (
        (mz - 1.0) / (b - 1) * math.log(n)
        - l * math.log(z)
        - 0.5 * math.log(2.0 * math.pi * math.log(n) * m2 / (b - 1))
        + gammaln(1.0 / (b - 1))
        - gammaln(mz / (b - 1))
    )
    return math.exp(log_val)


def poisson_profile_coeffs(model: WeightModel, t: float, l_max: int) -> np.ndarray:
    """Level coefficients A_0..A_{l_max} of the continuous-time local limit:
    A_l = exp(b t p_0) l! [x^l] exp(b t sum_{j>=1} p_j x^j), via the standard
    recurrence for the exponential of a polynomial."""
    if model.d != 1:
        raise ValueError("poisson_profile_coeffs requires d = 1")
    if t <= 0:
        raise ValueError("t must be > 0")
    law = marginal(model).as_dict()
    support = sorted(v[0] for v in law)
    if support[0] < 0:
        raise ValueError("negative support not allowed here")
    b = model.b
    p0 = law.get((0,), 0.0)
    # c_j = b t p_j for j >= 1; f = exp(sum c_j x^j) satisfies
    # l f_l = sum_j j c_j f_{l-j}
    cj = {v[0]: b * t * float(p) for v, p in sorted(law.items()) if v[0] >= 1}
    f = np.zeros(l_max + 1)
    f[0] = 1.0
    for l in range(1, l_max + 1):
        acc = 0.0
        for j, coeff in cj.items():
            if j <= l:
                acc += j * coeff * f[l - j]
        f[l] = acc / l
    lfact = np.exp(gammaln(np.arange(l_max + 1) + 1.0))
    return math.exp(b * t * p0) * lfact * f


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0; accuracy 1e-13 relative is the contract."""
    if x <= 0:
        raise ValueError("log_gamma requires x > 0")
    return float(gammaln(x))
