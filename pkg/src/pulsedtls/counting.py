"""Short-pulse analytic photon-counting hierarchy.

Inclusive densities f_n for an emission sequence t_1 < ... < t_n are products
of sin^2 re-excitation factors of the interacted area between consecutive
emissions, times a survival/decay exponential.  Inclusive probabilities F_n
follow by ordered quadrature over the pulse window; exclusive probabilities
are differences P_n = F_n - F_{n+1}.  Square-pulse closed forms are provided
for cross-checking the quadrature path.

Validity: the hierarchy is a short-pulse approximation; it degrades once
gamma*T is O(1) (confirmed against the exact oracle in the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numerics import QuadratureConfig, integrate_1d, integrate_simplex
from .pulses import PulseShape, cumulative_area

__all__ = [
    "SystemParams",
    "PhotocountDistribution",
    "DensitySample",
    "ideal_excited_prob",
    "density_fn",
    "inclusive_Fn",
    "exclusive_Pn",
    "SquareClosedForms",
    "closed_form_square",
    "marginal_p1",
    "marginal_p1_short",
    "marginal_p2",
    "marginal_p2_leading",
    "density_p2_joint",
    "density_p3_ordered",
    "density_p3_sym",
    "marginal_p3_sym2",
    "marginal_p3_sym1",
    "marginal_p3_start",
    "emission_flux",
    "poisson_limit_Fn",
]


@dataclass(frozen=True)
class SystemParams:
    """Spontaneous decay rate gamma = 1 / excited-state lifetime."""

    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma >= 0.0:
            raise ValueError("gamma must be >= 0")


@dataclass(frozen=True)
class PhotocountDistribution:
    """Inclusive F_1..F_N and exclusive P_0..P_N photocount probabilities.

    ``truncation_bound`` upper-bounds the probability content beyond N.
    ``eps`` is the accepted numerical negativity of the P_n.
    """

    inclusive: tuple  # (F_1, ..., F_N)
    exclusive: tuple  # (P_0, ..., P_N)
    truncation_bound: float
    provenance: str
    eps: float = 1e-9

    def __post_init__(self):
        F = self.inclusive
        P = self.exclusive
        if len(P) != len(F) + 1:
            raise ValueError("exclusive list must be one longer than inclusive")
        for a, b in zip((1.0,) + tuple(F), F):
            if b > a + self.eps:
                raise ValueError(f"inclusive probabilities not nested: {F}")
        if any(p < -self.eps for p in P):
            raise ValueError(f"negative exclusive probability beyond eps: {P}")
        total = sum(P)
        if total > 1.0 + self.eps or total + self.truncation_bound < 1.0 - self.eps - 1e-12:
            raise ValueError(f"exclusive probabilities not normalized: sum={total}")

    @property
    def nmax(self) -> int:
        return len(self.inclusive)


@dataclass(frozen=True)
class DensitySample:
    """One sampled emission-density value on a time or area axis."""

    t1: float
    value: float
    axis: str = "time"  # "time" or "area"
    t2: float | None = None
    t3: float | None = None


def ideal_excited_prob(a: float) -> float:
    """Excited-state probability after interacting area ``a`` with no decay."""
    return math.sin(a / 2.0) ** 2


def _sin2(x):
    return np.sin(x / 2.0) ** 2


def density_fn(p: PulseShape, sys: SystemParams, times) -> float:
    """Inclusive density f_n at strictly increasing emission times.

    Piecewise in where the last emissions fall relative to the end of the
    pulse: all inside -> product of sin^2 factors with exp(-g*t_n/2); last one
    after -> final factor uses the total area with exp(-g*T/2 - g*(t_n - T));
    two or more after the pulse -> 0 (nothing left to re-excite).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if np.any(times < 0.0) or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be strictly increasing and >= 0")
    g = sys.gamma
    T = p.support_end
    n = len(times)
    n_after = int(np.sum(times > T))
    if n_after >= 2:
        return 0.0
    areas = cumulative_area(p, times)
    prev = np.concatenate(([0.0], areas[:-1]))
    if n_after == 0:
        factors = _sin2(areas - prev)
        tail = math.exp(-g * times[-1] / 2.0)
    else:
        gaps = areas - prev
        gaps[-1] = p.total_area - prev[-1]
        factors = _sin2(gaps)
        tail = math.exp(-g * T / 2.0) * math.exp(-g * (times[-1] - T))
    return g ** n * float(np.prod(factors)) * tail


def inclusive_Fn(p: PulseShape, sys: SystemParams, n: int,
                 cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Inclusive probability of n or more emissions, 1 <= n <= 4.

    n = 1 combines the in-pulse emission integral with the post-pulse decay
    term, both under the common exp(-g*T/2) survival prefactor.  n >= 2
    integrates the (n-1)-dimensional ordered product of sin^2 factors over the
    pulse window, the last emission time having been integrated out against
    pure exponential decay.
    """
    if not 1 <= n <= 4:
        raise ValueError("n must be in 1..4")
    g = sys.gamma
    T = p.support_end
    A_inf = p.total_area
    if A_inf == 0.0:
        return 0.0
    pref = math.exp(-g * T / 2.0)
    if n == 1:
        integral, _ = integrate_1d(lambda t: _sin2(cumulative_area(p, t)),
                                   0.0, T, cfg)
        return pref * (g * integral + ideal_excited_prob(A_inf))

    def integrand(*ts):
        areas = cumulative_area(p, np.asarray(ts))
        prev = np.concatenate(([0.0], areas[:-1]))
        gaps = np.append(areas - prev, A_inf - areas[-1])
        return float(np.prod(_sin2(gaps)))

    value, _ = integrate_simplex(integrand, n - 1, T, cfg)
    return g ** (n - 1) * pref * value


def exclusive_Pn(p: PulseShape, sys: SystemParams, nmax: int = 3,
                 cfg: QuadratureConfig = QuadratureConfig()) -> PhotocountDistribution:
    """Exclusive distribution P_0..P_nmax from differences of the F_n."""
    if not 1 <= nmax <= 3:
        raise ValueError("nmax must be in 1..3")
    F = [inclusive_Fn(p, sys, k, cfg) for k in range(1, nmax + 1)]
    # the truncation bound does not need full precision
    bound = inclusive_Fn(p, sys, nmax + 1, cfg.relaxed(1e4))
    P = [1.0 - F[0]] + [F[k] - (F[k + 1] if k + 1 < nmax else bound)
                        for k in range(nmax)]
    eps = 10.0 * max(cfg.abs_tol, cfg.rel_tol * max(F), 1e-15)
    return PhotocountDistribution(tuple(F), tuple(P), bound,
                                  "analytic-short-pulse", eps=eps)


class SquareClosedForms(NamedTuple):
    F1: float
    F2: float
    F3: float
    P1: float
    P2: float


def closed_form_square(total_area: float, gammaT: float) -> SquareClosedForms:
    """Closed-form F_1..F_3 (and P_1, P_2) for a square pulse of given area.

    The bracketed combinations in F_1..F_3 all cancel catastrophically as the
    area goes to 0 (removable 0/0 in F_3), so below |A| < 0.5 each bracket is
    evaluated by its Maclaurin series; the retained terms keep the relative
    error below 1e-12 at the switch point, where the direct expressions are
    still good to ~1e-9.
    """
    if total_area <= 0.0:
        raise ValueError("total_area must be > 0 (F3 divides by area^2)")
    if gammaT < 0.0:
        raise ValueError("gammaT must be >= 0")
    A = float(total_area)
    gt = float(gammaT)
    e = math.exp(-gt / 2.0)
    a2 = A * A
    if abs(A) < 0.5:
        one_minus_sinc = a2 * (1.0 / 6.0 + a2 * (-1.0 / 120.0 + a2 * (
            1.0 / 5040.0 + a2 * (-1.0 / 362880.0 + a2 / 39916800.0))))
        f2_bracket = a2 * a2 * (1.0 / 60.0 + a2 * (-1.0 / 1260.0 + a2 * (
            1.0 / 60480.0 + a2 * (-1.0 / 4989600.0 + a2 / 622702080.0))))
        bracket_over_A2 = a2 * a2 * a2 * (1.0 / 5040.0 + a2 * (
            -1.0 / 151200.0 + a2 * (1.0 / 9979200.0 + a2 * (
                -1.0 / 1089728640.0 + a2 / 174356582400.0))))
    else:
        sinc = math.sin(A) / A
        one_minus_sinc = 1.0 - sinc
        f2_bracket = 2.0 + math.cos(A) - 3.0 * sinc
        bracket_over_A2 = (4.0 * (a2 - 6.0)
                           - (a2 - 24.0) * math.cos(A)
                           + 9.0 * A * math.sin(A)) / a2
    F1 = e * (math.sin(A / 2.0) ** 2 + (gt / 2.0) * one_minus_sinc)
    F2 = e * (gt / 8.0) * f2_bracket
    F3 = e * gt ** 2 / 64.0 * bracket_over_A2
    return SquareClosedForms(F1, F2, F3, F1 - F2, F2 - F3)


# ---------------------------------------------------------------------------
# marginal (exclusive) densities


def _f2_tail_integral(p: PulseShape, sys: SystemParams, t1: float) -> float:
    """int_T^inf f_2(t1, t2) dt2 for t1 inside the pulse (analytic in t2)."""
    g = sys.gamma
    a1 = cumulative_area(p, t1)
    return (g * _sin2(p.total_area - a1) * _sin2(a1)
            * math.exp(-g * p.support_end / 2.0))


def marginal_p1(p: PulseShape, sys: SystemParams, t1: float,
                cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Exclusive density for exactly one emission, first at t1.

    p_1(t1) = f_1(t1) - int_{t1}^inf f_2(t1, t2) dt2, by quadrature over the
    remaining pulse window plus the analytic post-pulse tail.
    """
    g = sys.gamma
    T = p.support_end
    f1 = density_fn(p, sys, [t1])
    if t1 >= T:
        return f1  # no drive left, a second emission is impossible
    a1 = cumulative_area(p, t1)

    def f2_inpulse(t2):
        a2 = cumulative_area(p, t2)
        return g * g * _sin2(a2 - a1) * _sin2(a1) * math.exp(-g * t2 / 2.0)

    inpulse, _ = integrate_1d(f2_inpulse, t1, T, cfg)
    return f1 - inpulse - _f2_tail_integral(p, sys, t1)


def marginal_p1_short(p: PulseShape, sys: SystemParams, t1: float) -> float:
    """Leading short-pulse form of p_1(t1) inside the pulse."""
    a1 = cumulative_area(p, t1)
    return (sys.gamma * _sin2(a1)
            * math.cos((p.total_area - a1) / 2.0) ** 2)


def density_p2_joint(p: PulseShape, sys: SystemParams, t1: float, t2: float,
                     cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Exclusive two-emission joint density: f_2 minus the integrated f_3."""
    if not 0.0 <= t1 < t2:
        raise ValueError("require 0 <= t1 < t2")
    g = sys.gamma
    T = p.support_end
    f2 = density_fn(p, sys, [t1, t2])
    if t2 >= T:
        return f2  # any third emission would need drive after the pulse
    a1 = cumulative_area(p, t1)
    a2 = cumulative_area(p, t2)
    base = _sin2(a2 - a1) * _sin2(a1)

    def f3_inpulse(t3):
        a3 = cumulative_area(p, t3)
        return g ** 3 * _sin2(a3 - a2) * base * math.exp(-g * t3 / 2.0)

    inpulse, _ = integrate_1d(f3_inpulse, t2, T, cfg)
    tail = (g * g * _sin2(p.total_area - a2) * base
            * math.exp(-g * T / 2.0))
    return f2 - inpulse - tail


def marginal_p2(p: PulseShape, sys: SystemParams, t1: float,
                cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Exclusive density for a two-emission sequence starting at t1.

    Quadrature of the exclusive joint density over t2 in the pulse window,
    plus the analytic post-pulse tail of f_2.
    """
    T = p.support_end
    if t1 >= T:
        return 0.0
    inpulse, _ = integrate_1d(lambda t2: density_p2_joint(p, sys, t1, t2, cfg.relaxed(0.1)),
                              t1, T, cfg)
    return inpulse + _f2_tail_integral(p, sys, t1)


def marginal_p2_leading(p: PulseShape, sys: SystemParams, t1: float) -> float:
    """Leading short-pulse form of p_2(t1): gamma * sin^2 * sin^2.

    Obtained by integrating the post-pulse branch of f_2 over t2; carries a
    single factor of gamma (the re-excitation probability density), with the
    survival exponentials dropped.
    """
    a1 = cumulative_area(p, t1)
    return sys.gamma * _sin2(p.total_area - a1) * _sin2(a1)


# ---------------------------------------------------------------------------
# three-photon densities (short-pulse limit)


def density_p3_ordered(p: PulseShape, sys: SystemParams,
                       t1: float, t2: float, t3: float) -> float:
    """Ordered three-emission density, short-pulse limit.

    Two re-excitations inside the pulse, final emission decaying freely; the
    overall survival factor is dropped (it is 1 + O(gamma*T) here).
    """
    if not (0.0 <= t1 < t2 < t3):
        raise ValueError("require 0 <= t1 < t2 < t3")
    g = sys.gamma
    a1 = cumulative_area(p, t1)
    a2 = cumulative_area(p, t2)
    return (g ** 3 * _sin2(p.total_area - a2) * _sin2(a2 - a1) * _sin2(a1)
            * math.exp(-g * t3))


def density_p3_sym(p: PulseShape, sys: SystemParams,
                   t1: float, t2: float, t3: float) -> float:
    """Symmetrized three-emission density (1/3! times the sum over orderings)."""
    ts = sorted((t1, t2, t3))
    if not (ts[0] < ts[1] < ts[2]):
        raise ValueError("times must be pairwise distinct")
    return density_p3_ordered(p, sys, *ts) / 6.0


def marginal_p3_sym2(p: PulseShape, sys: SystemParams, t1: float, t2: float,
                     cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Symmetrized density marginalized over the third emission time."""
    T = p.support_end
    tail = T + 30.0 / sys.gamma

    def f(t3):
        if t3 in (t1, t2):
            return 0.0
        return density_p3_sym(p, sys, t1, t2, t3)

    val, _ = integrate_1d(f, 0.0, tail, cfg, points=[t1, t2, T])
    return val


def marginal_p3_sym1(p: PulseShape, sys: SystemParams, t1: float,
                     cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Symmetrized density marginalized down to a single time."""
    T = p.support_end
    tail = T + 30.0 / sys.gamma

    def f(t2):
        if t2 == t1:
            return 0.0
        return marginal_p3_sym2(p, sys, t1, t2, cfg.relaxed(0.1))

    val, _ = integrate_1d(f, 0.0, tail, cfg, points=[t1, T])
    return val


def marginal_p3_start(p: PulseShape, sys: SystemParams, t1: float,
                      cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Density for t1 to start a three-emission sequence (ordered marginal)."""
    T = p.support_end
    if t1 >= T:
        return 0.0
    g = sys.gamma
    a1 = cumulative_area(p, t1)

    def inner(t2):
        a2 = cumulative_area(p, t2)
        # t3 integral of exp(-g*t3) from t2 to infinity
        return (g ** 2 * _sin2(p.total_area - a2) * _sin2(a2 - a1) * _sin2(a1)
                * math.exp(-g * t2))

    val, _ = integrate_1d(inner, t1, T, cfg)
    return val


def emission_flux(p: PulseShape, sys: SystemParams, t: float,
                  cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Total photon flux at time t from the n <= 3 exclusive marginals.

    Sums the probability density of an emission at t over multiplicities,
    counting every photon of a multi-photon trajectory (not only the first).
    Comparable to gamma * rho_ee(t) of the exact master equation.
    """
    T = p.support_end
    g = sys.gamma
    flux = marginal_p1(p, sys, t, cfg)
    # two-photon trajectories: photon at t as the first or the second of the pair
    q2 = marginal_p2(p, sys, t, cfg)
    if t > 0.0:
        second, _ = integrate_1d(lambda s: density_p2_joint(p, sys, s, t, cfg.relaxed(0.1)),
                                 0.0, min(t, T), cfg)
        q2 += second
    # three-photon trajectories, all three positions
    q3 = 3.0 * marginal_p3_sym1(p, sys, t, cfg.relaxed(100.0))
    return flux + q2 + q3


def poisson_limit_Fn(gammaT: float, n: int) -> float:
    """Long-pulse limit of the model's F_n: (gT/2)^(n-1)/(n-1)! * exp(-gT/2)."""
    if gammaT < 0.0 or n < 1:
        raise ValueError("require gammaT >= 0 and n >= 1")
    return (gammaT / 2.0) ** (n - 1) / math.factorial(n - 1) * math.exp(-gammaT / 2.0)
