"""Population-dynamics sampling of the martingale limit via its splitting
fixed-point equation, plus Dirichlet subtree-fraction draws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from profilelab.martingale import LambdaPoint, m_exponent
from profilelab.spectral import RangeError, in_lambda_tilde
from profilelab.weight_model import WeightModel

__all__ = [
    "SamplePool",
    "dirichlet_fractions",
    "fixpoint_iterate",
    "pool_diagnostics",
    "ks_distance",
]


@dataclass
class SamplePool:
    """A population of limit samples at a fixed real theta, with diagnostics."""

    theta: tuple[float, ...]
    samples: np.ndarray
    iteration: int
    mean: float
    variance: float
    ks_to_previous: float
    divergent: bool = False
    scale_drift: float = 1.0


def dirichlet_fractions(b: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Normalized vector of b i.i.d. Gamma(1/(b-1), rate 1/(b-1)) draws: the
    limiting leaf fractions of the root's child subtrees."""
    if b < 2:
        raise ValueError("b must be >= 2")
    shape = (b,) if size is None else (size, b)
    y = rng.gamma(1.0 / (b - 1), size=shape)  # scale cancels in the ratio
    return y / y.sum(axis=-1, keepdims=True)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Classical two-sample Kolmogorov-Smirnov sup distance."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least 2 samples on each side")
    allv = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, allv, side="right") / a.size
    cdf_b = np.searchsorted(b, allv, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def _apply_map(
    pool: np.ndarray,
    model: WeightModel,
    theta: np.ndarray,
    exponent: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One sweep of the splitting map over every slot:
    W <- sum_j e^{-theta.Z_j} (U^(j))^exponent W_j with (Z_1..Z_b) drawn as a
    full joint atom, (U^(j)) Dirichlet, and W_j resampled from the pool."""
    m = pool.size
    b = model.b
    atom_idx = np.searchsorted(model.cum_probs, rng.random(m), side="right")
    atom_idx = np.minimum(atom_idx, len(model.atoms) - 1)
    weights = model.weight_array  # (natoms, b, d)
    phase = np.exp(-(weights[atom_idx] @ theta))  # (m, b)
    u = dirichlet_fractions(b, rng, size=m)  # (m, b)
    picks = pool[rng.integers(0, m, size=(m, b))]
    return (phase * u**exponent * picks).sum(axis=1)


def fixpoint_iterate(
    model: WeightModel,
    theta,
    pool_size: int = 10**5,
    iterations: int = 30,
    rng: np.random.Generator | None = None,
    keep_previous: bool = False,
    renormalize: bool = True,
) -> SamplePool | tuple[SamplePool, np.ndarray]:
    """Iterate the splitting map on a pool initialized at the constant 1
    (the limit has expectation one).  Returns the final pool with
    stationarity diagnostics against the previous sweep.

    The fixed point is unique only up to a multiplicative constant and the
    empirical pool scale performs a random walk across sweeps; with
    ``renormalize`` the pool is rescaled to mean one after every sweep
    (pinning that free constant) and the accumulated raw scale factor is
    reported as ``scale_drift``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not in_lambda_tilde(model, theta):
        raise RangeError(f"theta={theta} outside the admissible region")
    if pool_size < 2:
        raise ValueError("pool_size must be >= 2")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    me = m_exponent(model, LambdaPoint.real(theta)).real
    exponent = (me - 1.0) / (model.b - 1)
    pool = np.ones(pool_size)
    prev = pool
    divergent = False
    drift = 1.0
    for _ in range(iterations):
        prev = pool
        pool = _apply_map(pool, model, theta, exponent, rng)
        mean = float(pool.mean())
        if not (0.5 <= mean <= 2.0) or not np.isfinite(mean):
            divergent = True
        if renormalize and np.isfinite(mean) and mean > 0:
            drift *= mean
            pool = pool / mean
    result = SamplePool(
        theta=tuple(theta),
        samples=pool,
        iteration=iterations,
        mean=float(pool.mean()),
        variance=float(pool.var()),
        ks_to_previous=ks_distance(pool, prev),
        divergent=divergent,
        scale_drift=drift,
    )
    if keep_previous:
        return result, prev
    return result


def pool_diagnostics(pool_k: SamplePool, pool_k_minus_1: SamplePool) -> dict:
    """Stationarity diagnostics between two successive pools."""
    if pool_k.samples.size != pool_k_minus_1.samples.size:
        raise ValueError("pools must have equal size")
    return {
        "mean": float(pool_k.samples.mean()),
        "variance": float(pool_k.samples.var()),
        "ks": ks_distance(pool_k.samples, pool_k_minus_1.samples),
    }
