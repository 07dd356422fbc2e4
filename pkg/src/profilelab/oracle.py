"""Exact small-size ground truth: full history enumeration, the exact
mean-profile recursion, one-step conditional martingale verification, and a
numerical Fourier integral for the local-limit level factor."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from profilelab.martingale import _as_lambda, c_n, w_n
from profilelab.tree_sim import Profile, ResourceLimitError
from profilelab.weight_model import WeightModel, marginal, validate

__all__ = [
    "HistoryDistribution",
    "enumerate_histories",
    "exact_mean_profile",
    "conditional_martingale_check",
    "numeric_fourier_profile",
]

DEFAULT_HISTORY_CAP = 10**7


@dataclass(frozen=True)
class HistoryDistribution:
    """Exact joint law of the profile after n growth steps; histories with
    equal profiles are merged."""

    entries: tuple[tuple[object, Profile], ...]  # (probability, profile)
    n: int

    def total_probability(self) -> float:
        return float(sum(p for p, _ in self.entries))


def _history_count(model: WeightModel, n: int) -> int:
    total = 1
    for k in range(1, n + 1):
        total *= ((model.b - 1) * (k - 1) + 1) * len(model.atoms)
    return total


def enumerate_histories(
    model: WeightModel, n: int, cap: int = DEFAULT_HISTORY_CAP
) -> HistoryDistribution:
    """Exhaustive law of the profile of the size-n tree.  Probabilities stay
    exact rationals when the atom masses are rational."""
    rep = validate(model)
    if not rep.ok:
        raise ValueError("invalid model: " + "; ".join(rep.problems))
    if _history_count(model, n) > cap:
        raise ResourceLimitError(f"{_history_count(model, n)} histories exceed cap {cap}")
    exact = all(isinstance(p, (Fraction, int)) for p, _ in model.atoms)
    one = Fraction(1) if exact else 1.0
    root = (tuple(model.root_shift),)
    states: dict[tuple, object] = {((root[0], 1),): one}
    for k in range(n):
        a_k = (model.b - 1) * k + 1
        leaf_p = Fraction(1, a_k) if exact else 1.0 / a_k
        nxt: dict[tuple, object] = {}
        for prof, p in states.items():
            counts = dict(prof)
            for level, u in prof:
                p_pick = p * u * leaf_p
                for p_atom, weights in model.atoms:
                    new = dict(counts)
                    new[level] = new[level] - 1
                    if new[level] == 0:
                        del new[level]
                    for z in weights:
                        child = tuple(c + w for c, w in zip(level, z))
                        new[child] = new.get(child, 0) + 1
                    key = tuple(sorted(new.items()))
                    nxt[key] = nxt.get(key, 0) + p_pick * p_atom
        states = nxt
    entries = tuple(
        (p, Profile(counts=dict(prof), n=n)) for prof, p in sorted(states.items())
    )
    return HistoryDistribution(entries=entries, n=n)


def _exact_mean_profile_sparse(model: WeightModel, n: int) -> dict:
    law = marginal(model).as_dict()
    b = model.b
    means: dict[tuple, float] = {tuple(model.root_shift): 1.0}
    for k in range(n):
        a_k = (b - 1) * k + 1
        nxt: dict[tuple, float] = {}
        for level, m in means.items():
            nxt[level] = nxt.get(level, 0.0) + m * (1.0 - 1.0 / a_k)
            for z, p in law.items():
                child = tuple(c + w for c, w in zip(level, z))
                nxt[child] = nxt.get(child, 0.0) + m * b * float(p) / a_k
        means = nxt
    return means


def _exact_mean_profile_dense_1d(model: WeightModel, n: int) -> dict:
    law = {v[0]: float(p) for v, p in marginal(model).as_dict().items()}
    b = model.b
    zmin = min(min(law), 0)
    zmax = max(max(law), 0)
    shift = model.root_shift[0]
    base = shift + n * zmin  # level of array index 0
    width = n * (zmax - zmin) + 1
    arr = np.zeros(width)
    root_idx = shift - base
    arr[root_idx] = 1.0
    lo = hi = root_idx
    tiny = 1e-310
    for k in range(n):
        a_k = (b - 1) * k + 1
        new_lo = max(lo + min(zmin, 0), 0)
        new_hi = min(hi + max(zmax, 0), width - 1)
        seg = arr[lo : hi + 1]
        buf = np.zeros(new_hi - new_lo + 1)
        buf[lo - new_lo : lo - new_lo + seg.size] = seg * (1.0 - 1.0 / a_k)
        for z, p in law.items():
            w = b * p / a_k
            start = lo + z - new_lo
            buf[start : start + seg.size] += w * seg
        arr[new_lo : new_hi + 1] = buf
        lo, hi = new_lo, new_hi
        if k % 64 == 63:
            nz = np.nonzero(arr[lo : hi + 1] > tiny)[0]
            if nz.size:
                lo, hi = lo + int(nz[0]), lo + int(nz[-1])
    return {
        (int(i + base),): float(arr[i]) for i in range(lo, hi + 1) if arr[i] > 0.0
    }


def exact_mean_profile(model: WeightModel, n: int) -> dict:
    """E U_l(n) for all reachable l, by the one-step mean recursion
    E U_l(n+1) = E U_l(n)(1 - 1/a_n) + (b/a_n) sum_z P(Z=z) E U_{l-z}(n)
    with a_n = (b-1)n + 1.  Levels whose mean underflows are dropped."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if model.d == 1 and n > 200:
        return _exact_mean_profile_dense_1d(model, n)
    return _exact_mean_profile_sparse(model, n)


def conditional_martingale_check(model: WeightModel, n: int, lam_grid) -> float:
    """Max over exact histories at size n and grid lambdas of
    |E[W_{n+1} | history] - W_n(history)|, with the one-step expectation
    expanded explicitly over leaf choices and atoms."""
    hist = enumerate_histories(model, n)
    b = model.b
    a_n = (b - 1) * n + 1
    worst = 0.0
    for lam in lam_grid:
        vec = _as_lambda(lam, model.d)
        cn = c_n(model, vec, n).to_complex()
        cn1 = c_n(model, vec, n + 1).to_complex()
        for _, prof in hist.entries:
            wt = sum(u * cmath.exp(-complex(np.dot(vec, l))) for l, u in prof.counts.items())
            exp_next = wt
            for level, u in prof.counts.items():
                e_l = cmath.exp(-complex(np.dot(vec, level)))
                pick = u / a_n
                for p_atom, weights in model.atoms:
                    kids = sum(
                        cmath.exp(-complex(np.dot(vec, tuple(c + w for c, w in zip(level, z)))))
                        for z in weights
                    )
                    exp_next += pick * float(p_atom) * (kids - e_l)
            dev = abs(exp_next / cn1 - wt / cn)
            worst = max(worst, dev)
    return worst


def numeric_fourier_profile(model: WeightModel, t: float, theta, l) -> float:
    """Direct quadrature of the local-limit integral
    (2 pi)^{-d} int_{|eta|<=pi} exp(-b t E[e^{-theta.Z}(1 - e^{i eta.Z})]) e^{-i eta.l} d eta.
    The imaginary part must vanish; the real part is returned."""
    if t <= 0:
        raise ValueError("t must be > 0")
    if model.d not in (1, 2):
        raise ValueError("quadrature implemented for d in {1, 2}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lvec = np.atleast_1d(np.asarray(l, dtype=float))
    vals, probs = marginal(model).values_probs()
    w = probs * np.exp(-(vals @ theta))

    if model.d == 1:
        zz = vals[:, 0]

        def integrand(eta, part):
            e = model.b * t * np.sum(w * (1.0 - np.exp(1j * eta * zz)))
            val = cmath.exp(-e - 1j * eta * lvec[0])
            return val.real if part == 0 else val.imag

        re, _ = quad(integrand, -math.pi, math.pi, args=(0,), limit=400, epsabs=1e-12, epsrel=1e-12)
        im, _ = quad(integrand, -math.pi, math.pi, args=(1,), limit=400, epsabs=1e-12, epsrel=1e-12)
        re /= 2.0 * math.pi
        im /= 2.0 * math.pi
    else:
        from scipy.integrate import dblquad

        def integrand2(e2, e1, part):
            eta = np.array([e1, e2])
            e = model.b * t * np.sum(w * (1.0 - np.exp(1j * (vals @ eta))))
            val = cmath.exp(-e - 1j * float(eta @ lvec))
            return val.real if part == 0 else val.imag

        re, _ = dblquad(integrand2, -math.pi, math.pi, -math.pi, math.pi, args=(0,), epsabs=1e-10)
        im, _ = dblquad(integrand2, -math.pi, math.pi, -math.pi, math.pi, args=(1,), epsabs=1e-10)
        re /= (2.0 * math.pi) ** 2
        im /= (2.0 * math.pi) ** 2
    if abs(im) > 1e-10:
        raise ArithmeticError(f"imaginary part {im} did not cancel")
    return float(re)
