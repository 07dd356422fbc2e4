"""The branching exponent A(-theta) = bEe^{-theta.Z} - 1 and its geometry:
gradient/Hessian moments, membership in the admissible real region, the d=1
range endpoints, and inversion of c = DA(-theta)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from profilelab.weight_model import MarginalLaw, WeightModel, marginal

__all__ = [
    "SpectralPoint",
    "ThetaDomain",
    "RangeError",
    "spectral_point",
    "is_nondegenerate",
    "in_lambda_tilde",
    "range_d1",
    "range_function_d1",
    "theta_of_c",
]

ROOT_TOL = 1e-12
NEWTON_MAX_ITER = 200


class RangeError(ValueError):
    """Requested point lies outside the admissible range, or no range found."""


@dataclass(frozen=True)
class SpectralPoint:
    theta: np.ndarray
    A: float
    gradA: np.ndarray  # = bEZe^{-theta.Z}, the achievable level slope c
    hessA: np.ndarray  # = bE ZZ^T e^{-theta.Z}
    det_hess: float


@dataclass(frozen=True)
class ThetaDomain:
    """Admissible real region for d=1: theta in (theta_low, theta_high),
    equivalently z = e^{-theta} in (z0, z1).  c bounds are the gradient image."""

    dim: int
    z0: float
    z1: float
    theta_low: float
    theta_high: float  # +inf encoded when z0 == 0
    c_lo: float
    c_hi: float

    def contains_theta(self, theta: float) -> bool:
        return self.theta_low < theta < self.theta_high

    def contains_z(self, z: float) -> bool:
        return self.z0 < z < self.z1

    def contains_c(self, c: float) -> bool:
        return self.c_lo < c < self.c_hi


def _moments(law: MarginalLaw, b: int, theta: np.ndarray):
    vals, probs = law.values_probs()
    w = b * probs * np.exp(-(vals @ theta))
    A = float(w.sum()) - 1.0
    grad = vals.T @ w
    hess = (vals * w[:, None]).T @ vals
    return A, grad, hess


def spectral_point(model: WeightModel, theta) -> SpectralPoint:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    law = marginal(model)
    A, grad, hess = _moments(law, model.b, theta)
    return SpectralPoint(theta=theta, A=A, gradA=grad, hessA=hess, det_hess=float(np.linalg.det(hess)))


def is_nondegenerate(model: WeightModel) -> bool:
    """True iff the support vectors of Z span R^d linearly, which makes the
    Hessian of A positive definite everywhere."""
    support = np.array(marginal(model).support, dtype=float)
    return np.linalg.matrix_rank(support) == model.d


def in_lambda_tilde(model: WeightModel, theta) -> bool:
    """Strict inequality 1 - bEe^{-theta.Z} < b theta . EZe^{-theta.Z}
    defining the admissible real region (finite support makes the moment
    finiteness condition automatic)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    sp = spectral_point(model, theta)
    return -sp.A < float(theta @ sp.gradA)


def range_function_d1(model: WeightModel, z: float) -> float:
    """f(z) = 1 - bEz^Z + log(z) bEZz^Z; the admissible z interval is where
    f < 0, and f has a single local minimum at z=1 with f(1) = 1 - b."""
    if z <= 0:
        raise ValueError("z must be positive")
    theta = np.array([-math.log(z)])
    A, grad, _ = _moments(marginal(model), model.b, theta)
    return 1.0 - (A + 1.0) + math.log(z) * float(grad[0])


def _grad_at_z(model: WeightModel, z: float) -> float:
    _, grad, _ = _moments(marginal(model), model.b, np.array([-math.log(z)]))
    return float(grad[0])


def range_d1(model: WeightModel) -> ThetaDomain:
    """Find the d=1 admissible interval (z0, z1) by bracketing the two roots
    of the range function around its minimum at z=1."""
    if model.d != 1:
        raise ValueError("range_d1 requires d = 1")
    if not is_nondegenerate(model):
        raise RangeError("degenerate model: weight support does not span R")
    law = marginal(model)
    support = [v[0] for v in law.support]
    f = lambda z: range_function_d1(model, z)

    # upper root: expand until the sign flips
    z_hi = 2.0
    while f(z_hi) <= 0:
        z_hi *= 2.0
        if z_hi > 2.0**60:
            raise RangeError("no sign change found above z=1")
    z1 = brentq(f, 1.0, z_hi, xtol=ROOT_TOL)

    # lower root: scan downward; nonnegative support may never flip, in
    # which case the interval is open at zero
    p0 = law.as_dict().get((0,), 0.0)
    z0 = None
    if min(support) >= 0 and 1.0 - model.b * p0 <= 0:
        z0 = 0.0
    else:
        z_lo = 0.5
        while f(z_lo) <= 0:
            z_lo *= 0.5
            if z_lo < 2.0**-60:
                if min(support) >= 0:
                    z0 = 0.0
                    break
                raise RangeError("no sign change found below z=1")
        if z0 is None:
            z0 = brentq(f, z_lo, 1.0, xtol=ROOT_TOL)

    c_lo = _grad_at_z(model, z0) if z0 > 0 else (0.0 if min(support) >= 0 else -math.inf)
    c_hi = _grad_at_z(model, z1)
    return ThetaDomain(
        dim=1,
        z0=z0,
        z1=z1,
        theta_low=-math.log(z1),
        theta_high=(-math.log(z0) if z0 > 0 else math.inf),
        c_lo=c_lo,
        c_hi=c_hi,
    )


def theta_of_c(model: WeightModel, c) -> np.ndarray:
    """Invert bEZe^{-theta.Z} = c for theta.  d=1 uses bisection on the
    strictly monotone z-parametrization; d>1 uses damped Newton with the
    positive definite Hessian, started at theta = 0."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if not is_nondegenerate(model):
        raise RangeError("degenerate model")
    if model.d == 1:
        dom = range_d1(model)
        if not dom.contains_c(float(c[0])):
            raise RangeError(f"c={c[0]} outside the achievable range ({dom.c_lo}, {dom.c_hi})")
        target = float(c[0])
        g = lambda z: _grad_at_z(model, z) - target
        z_lo = max(dom.z0, 1e-300)
        z_hi = dom.z1
        # shrink the bracket from below if the lower endpoint overshoots
        while g(z_lo) >= 0:
            z_lo *= 0.5
            if z_lo < 1e-308:
                raise RangeError("bracket search failed at the lower endpoint")
        z = brentq(g, z_lo, z_hi, xtol=1e-14, rtol=8.9e-16)
        return np.array([-math.log(z)])

    theta = np.zeros(model.d)
    sp = spectral_point(model, theta)
    resid = sp.gradA - c
    for _ in range(NEWTON_MAX_ITER):
        if np.max(np.abs(resid)) < 1e-11:
            return theta
        step = np.linalg.solve(sp.hessA, resid)
        t = 1.0
        while t > 2.0**-50:
            cand = theta + t * step
            sp_cand = spectral_point(model, cand)
            resid_cand = sp_cand.gradA - c
            if np.linalg.norm(resid_cand) < np.linalg.norm(resid):
                theta, sp, resid = cand, sp_cand, resid_cand
                break
            t *= 0.5
        else:
            raise RangeError("Newton step failed to reduce the residual")
    raise RangeError(f"Newton did not converge in {NEWTON_MAX_ITER} iterations")
