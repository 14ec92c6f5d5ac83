"""Derived observables over photocount distributions.

All statistics accept either a PhotocountDistribution or a plain sequence
P_0..P_N of exclusive probabilities.  Distributions are truncated, so each
statistic reports a truncation-sensitivity flag when the omitted tail could
shift the value by more than 1%; the g2 denominator is quadratic in small
numbers near even-pi areas, which makes silent truncation the main hazard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counting import PhotocountDistribution

__all__ = [
    "EmissionStatistics",
    "expected_n",
    "g2_zero",
    "g2_zero_short_pulse",
    "variance_rel",
    "purities",
    "compute_statistics",
]


def _as_probs(d):
    if isinstance(d, PhotocountDistribution):
        return np.asarray(d.exclusive, dtype=float), d.truncation_bound
    return np.asarray(d, dtype=float), 0.0


@dataclass(frozen=True)
class EmissionStatistics:
    mean_n: float
    g2_zero: float
    var_rel: float
    purities: tuple
    truncation_sensitive: bool


def expected_n(d) -> float:
    """E[n] = sum_k k P_k over the available counts."""
    probs, _ = _as_probs(d)
    return float(np.arange(len(probs)) @ probs)


def g2_zero(d) -> float:
    """Pulse-wise degree of second-order coherence sum k(k-1)P_k / E[n]^2."""
    probs, _ = _as_probs(d)
    mean = expected_n(probs)
    if mean <= 0.0:
        raise ValueError("g2[0] undefined for E[n] = 0")
    k = np.arange(len(probs))
    return float((k * (k - 1)) @ probs) / mean ** 2


def g2_zero_short_pulse(p1: float, p2: float) -> float:
    """Short-pulse approximation 2 P_2 / (P_1 + 2 P_2)^2."""
    denom = p1 + 2.0 * p2
    if denom <= 0.0:
        raise ValueError("degenerate denominator: P1 + 2 P2 <= 0")
    return 2.0 * p2 / denom ** 2


def variance_rel(d) -> float:
    """Photon-number variance relative to a coherent state of equal mean.

    sum_k (k^2 - E[n]^2) P_k / E[n]; equals 1 for a Poisson distribution and
    0 for a number state.
    """
    probs, _ = _as_probs(d)
    mean = expected_n(probs)
    if mean <= 0.0:
        raise ValueError("relative variance undefined for E[n] = 0")
    k = np.arange(len(probs))
    return float((k * k - mean ** 2) @ probs) / mean


def purities(d) -> tuple:
    """P_n renormalized without the vacuum component, n >= 1."""
    probs, _ = _as_probs(d)
    emitted = probs[1:].sum()
    if emitted <= 0.0:
        raise ValueError("purities undefined for an all-vacuum distribution")
    return tuple(probs[1:] / emitted)


def compute_statistics(d) -> EmissionStatistics:
    """All derived statistics, with a shared truncation-sensitivity flag."""
    probs, bound = _as_probs(d)
    nmax = len(probs) - 1
    mean = expected_n(probs)
    g2 = g2_zero(probs)
    var = variance_rel(probs)
    pur = purities(probs)
    tail = nmax * bound
    sensitive = any(
        value != 0.0 and tail > 0.01 * abs(value)
        for value in (mean, g2, var)
    )
    return EmissionStatistics(mean, g2, var, pur, sensitive)
