"""Profile-polynomial martingales and their normalizing constants.

Everything is evaluated in log-magnitude + phase so that sizes up to n = 10^6
and levels far from the bulk cannot overflow.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from profilelab.tree_sim import Profile
from profilelab.weight_model import WeightModel, marginal

__all__ = [
    "LambdaPoint",
    "MartingaleValue",
    "NCDomainError",
    "m_exponent",
    "c_n",
    "w_n",
    "w_continuous",
    "h_n",
    "c_n_asymptotic",
    "expected_tau_transform",
]


class NCDomainError(ValueError):
    """lambda hits the zero set of the normalizer; factor j vanishes."""

    def __init__(self, j: int):
        super().__init__(f"C_n factor at j={j} vanishes; lambda lies in the zero set")
        self.j = j


@dataclass(frozen=True)
class LambdaPoint:
    """Evaluation point lambda = theta + i eta in C^d."""

    theta: tuple[float, ...]
    eta: tuple[float, ...]

    @classmethod
    def real(cls, theta) -> "LambdaPoint":
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return cls(theta=tuple(theta), eta=(0.0,) * theta.size)

    @classmethod
    def from_z(cls, z: float) -> "LambdaPoint":
        """d=1 shorthand: lambda = -log z for z > 0."""
        return cls.real(-math.log(z))

    def as_complex(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float) + 1j * np.asarray(self.eta, dtype=float)

    def conj(self) -> "LambdaPoint":
        return LambdaPoint(theta=self.theta, eta=tuple(-e for e in self.eta))


def _as_lambda(lam, d: int) -> np.ndarray:
    if isinstance(lam, LambdaPoint):
        vec = lam.as_complex()
    else:
        vec = np.atleast_1d(np.asarray(lam, dtype=complex))
    if vec.size != d:
        raise ValueError(f"lambda has dimension {vec.size}, model has d={d}")
    return vec


@dataclass(frozen=True)
class MartingaleValue:
    """A complex number carried as value * exp(log_scale), |value| in [1/2, 2)."""

    value: complex
    log_scale: float

    @classmethod
    def pack(cls, value: complex, log_scale: float = 0.0) -> "MartingaleValue":
        if value == 0:
            return cls(0.0 + 0.0j, -math.inf)
        m = abs(value)
        e = math.floor(math.log2(m))
        return cls(value / 2.0**e, log_scale + e * math.log(2.0))

    def to_complex(self) -> complex:
        return self.value * cmath.exp(self.log_scale)

    @property
    def log_abs(self) -> float:
        return math.log(abs(self.value)) + self.log_scale


def m_exponent(model: WeightModel, lam) -> complex:
    """b E exp(-lambda . Z), the branching-rate exponent; m(lambda)^t is
    exp(t (b E exp(-lambda . Z) - 1))."""
    vec = _as_lambda(lam, model.d)
    law = marginal(model)
    total = 0.0 + 0.0j
    for value, p in law.atoms:
        total += float(p) * cmath.exp(-complex(np.dot(vec, value)))
    return model.b * total


def c_n(model: WeightModel, lam, n: int) -> MartingaleValue:
    """The deterministic martingale normalizer: product over j < n of
    ((b-1)j + bEe^{-lambda.Z}) / ((b-1)j + 1), in log scale."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return MartingaleValue(1.0 + 0.0j, 0.0)
    b = model.b
    me = m_exponent(model, lam)
    js = np.arange(n, dtype=float)
    num = (b - 1) * js + me
    den = (b - 1) * js + 1.0
    scale = (b - 1) * js + abs(me) + 1.0
    bad = np.abs(num) <= 1e-14 * scale
    if bad.any():
        raise NCDomainError(int(np.argmax(bad)))
    log_mag = float(np.sum(np.log(np.abs(num)) - np.log(den)))
    phase = float(np.sum(np.angle(num)))
    return MartingaleValue.pack(cmath.exp(1j * phase), log_mag)


def profile_transform(profile: Profile, lam, d: int) -> MartingaleValue:
    """sum_l U_l(n) exp(-lambda . l), in log scale."""
    vec = _as_lambda(lam, d)
    levels = np.array(list(profile.counts.keys()), dtype=float)
    counts = np.array(list(profile.counts.values()), dtype=float)
    log_terms = np.log(counts) - levels @ vec.real
    phases = -levels @ vec.imag
    m = float(np.max(log_terms))
    s = complex(np.sum(np.exp(log_terms - m) * np.exp(1j * phases)))
    return MartingaleValue.pack(s, m)


def w_n(profile: Profile, model: WeightModel, lam) -> complex:
    """The discrete-time profile martingale: the profile polynomial at
    exp(-lambda), divided by the normalizer at the profile's size."""
    num = profile_transform(profile, lam, model.d)
    den = c_n(model, lam, profile.n)
    return (num.value / den.value) * cmath.exp(num.log_scale - den.log_scale)


def w_continuous(profile: Profile, t: float, model: WeightModel, lam) -> complex:
    """The continuous-time additive martingale of the stopped tree:
    sum_u exp(-lambda . D_u) / m(lambda)^t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    num = profile_transform(profile, lam, model.d)
    me = m_exponent(model, lam)
    return num.value * cmath.exp(num.log_scale - t * (me - 1.0))


def h_n(model: WeightModel, lam, tau_n: float, n: int) -> complex:
    """The bridge martingale C_n(lambda) exp(tau_n (1 - bEe^{-lambda.Z}));
    expectation one for every n."""
    c = c_n(model, lam, n)
    me = m_exponent(model, lam)
    return c.value * cmath.exp(c.log_scale + tau_n * (1.0 - me))


def c_n_asymptotic(model: WeightModel, theta, n: int) -> float:
    """Stirling-type asymptotic of the normalizer at real theta:
    n^((bEe^{-theta.Z}-1)/(b-1)) Gamma(1/(b-1)) / Gamma(bEe^{-theta.Z}/(b-1))."""
    b = model.b
    me = m_exponent(model, LambdaPoint.real(theta)).real
    if me <= 0:
        raise ValueError("bEe^{-theta.Z} must be positive")
    log_val = (
        (me - 1.0) / (b - 1) * math.log(n)
        + gammaln(1.0 / (b - 1))
        - gammaln(me / (b - 1))
    )
    return math.exp(log_val)


def expected_tau_transform(b: int, s: float, n: int) -> tuple[float, float]:
    """E exp(s tau_n) for b-ary death times: the exact product
    prod_j a_{j-1} / (a_{j-1} - s) with a_{j-1} = (b-1)(j-1)+1, together with
    its Gamma-form asymptotic Gamma((1-s)/(b-1))/Gamma(1/(b-1)) n^{s/(b-1)}.
    Requires s < 1 (otherwise the transform diverges)."""
    if s >= 1:
        raise ValueError(f"transform diverges for s={s} >= 1")
    a = (b - 1) * np.arange(n, dtype=float) + 1.0
    exact = float(np.exp(np.sum(np.log(a) - np.log(a - s))))
    log_asym = gammaln((1.0 - s) / (b - 1)) - gammaln(1.0 / (b - 1)) + s / (b - 1) * math.log(max(n, 1))
    return exact, float(np.exp(log_asym))
