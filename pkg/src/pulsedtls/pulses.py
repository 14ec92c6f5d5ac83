"""Drive-pulse envelopes and cumulative interacted area.

Every quantity downstream is parameterized by the cumulative area
``A(t) = int_0^t Omega(t') dt'`` of the resonant drive, so this module is the
single place where pulse shapes are defined.  Envelopes are real and
non-negative; times are in units of the spontaneous lifetime (gamma = 1)
unless the caller rescales at the boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfinv

__all__ = [
    "PulseShape",
    "GAUSSIAN_WIDTH_PER_SIGMA",
    "make_pulse",
    "envelope",
    "cumulative_area",
    "inverse_area",
    "load_tabulated_csv",
]

# Width convention for Gaussian pulses: width = GAUSSIAN_WIDTH_PER_SIGMA * sigma,
# with sigma the temporal standard deviation of the field envelope.
# The constant is calibrated so that the short-pulse two-photon probability of a
# pi-area Gaussian pulse is P2 = 0.2188 * gamma * width:
#   (1/sigma) * int sin^2((pi - A(t))/2) sin^2(A(t)/2) dt = 0.364304...
#   0.364304 / 0.2188 = 1.66501 = 2*sqrt(ln 2)   (to 5e-5 relative)
# i.e. the width is the FWHM of the envelope-squared (intensity) profile.
# The calibration integral is re-derived in tests/test_pulses.py.
GAUSSIAN_WIDTH_PER_SIGMA = 2.0 * math.sqrt(math.log(2.0))

# Fraction of total area allowed outside the truncated Gaussian support.
_GAUSS_TRUNCATION = 1e-9


def _norm_cdf(x):
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


@dataclass(frozen=True)
class PulseShape:
    """Immutable drive pulse: envelope Omega(t) with total area ``total_area``.

    kind        one of "square", "gaussian", "tabulated"
    total_area  A(infinity), radians
    width       T: square support length / Gaussian intensity FWHM /
                tabulated sample span
    center      Gaussian peak position (support is [0, 2*center])
    samples     (times, rates) arrays, tabulated only
    """

    kind: str
    total_area: float
    width: float
    center: float = 0.0
    samples: tuple | None = None
    # precomputed tabulated prefix integrals, set in __post_init__
    _cum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("square", "gaussian", "tabulated"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if not self.total_area >= 0.0:
            raise ValueError("total_area must be >= 0")
        if not self.width > 0.0:
            raise ValueError("width must be > 0")
        if self.kind == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated pulse requires samples")
            t, w = self.samples
            if len(t) < 2:
                raise ValueError("tabulated pulse needs at least two samples")
            if np.any(np.diff(t) <= 0.0):
                raise ValueError("tabulated sample times must be strictly increasing")
            if np.any(~np.isfinite(w)) or np.any(w < 0.0):
                raise ValueError("tabulated envelope values must be finite and >= 0")
            cum = np.concatenate(([0.0], np.cumsum(np.diff(t) * (w[:-1] + w[1:]) / 2.0)))
            object.__setattr__(self, "_cum", cum)

    @property
    def sigma(self) -> float:
        """Temporal standard deviation (Gaussian only)."""
        if self.kind != "gaussian":
            raise AttributeError("sigma is defined for Gaussian pulses only")
        return self.width / GAUSSIAN_WIDTH_PER_SIGMA

    @property
    def support_end(self) -> float:
        """Time after which the envelope is identically zero."""
        if self.kind == "square":
            return self.width
        if self.kind == "gaussian":
            return 2.0 * self.center
        return float(self.samples[0][-1])

    # convenience wrappers
    def envelope(self, t):
        return envelope(self, t)

    def area(self, t):
        return cumulative_area(self, t)

    def inverse_area(self, a):
        return inverse_area(self, a)


def make_pulse(kind: str, total_area: float, width: float,
               samples=None) -> PulseShape:
    """Build a validated pulse.

    For Gaussian pulses the peak is placed so that the truncated support
    (all but 1e-9 of the area) starts exactly at t = 0.  Tabulated samples
    are rescaled so their integral equals ``total_area``; their time span
    defines the width.
    """
    kind = kind.lower()
    if kind == "square":
        return PulseShape("square", float(total_area), float(width))
    if kind == "gaussian":
        sigma = float(width) / GAUSSIAN_WIDTH_PER_SIGMA
        # place the peak so that the omitted leading tail is half the budget
        x0 = math.sqrt(2.0) * erfinv(1.0 - _GAUSS_TRUNCATION)
        center = x0 * sigma
        return PulseShape("gaussian", float(total_area), float(width), center=center)
    if kind == "tabulated":
        if samples is None:
            raise ValueError("tabulated pulse requires samples")
        t = np.asarray([s[0] for s in samples], dtype=float)
        w = np.asarray([s[1] for s in samples], dtype=float)
        raw = np.trapezoid(w, t)
        if total_area > 0.0:
            if raw <= 0.0:
                raise ValueError("tabulated samples have zero integral, cannot scale")
            w = w * (float(total_area) / raw)
        span = float(t[-1] - t[0])
        if t[0] != 0.0:
            t = t - t[0]
        return PulseShape("tabulated", float(total_area), span, samples=(t, w))
    raise ValueError(f"unknown pulse kind {kind!r}")


def envelope(p: PulseShape, t):
    """Instantaneous Rabi rate Omega(t), radians per unit time."""
    t = np.asarray(t, dtype=float)
    if p.kind == "square":
        rate = p.total_area / p.width
        out = np.where((t >= 0.0) & (t <= p.width), rate, 0.0)
    elif p.kind == "gaussian":
        sigma = p.sigma
        z = 1.0 - _GAUSS_TRUNCATION
        amp = p.total_area / (sigma * math.sqrt(2.0 * math.pi)) / z
        out = np.where(
            (t >= 0.0) & (t <= p.support_end),
            amp * np.exp(-0.5 * ((t - p.center) / sigma) ** 2),
            0.0,
        )
    else:
        tt, ww = p.samples
        out = np.interp(t, tt, ww, left=0.0, right=0.0)
    return out if out.ndim else float(out)


def cumulative_area(p: PulseShape, t):
    """A(t) = int_0^t Omega; non-decreasing, saturates at total_area."""
    t = np.asarray(t, dtype=float)
    if p.kind == "square":
        out = p.total_area * np.clip(t / p.width, 0.0, 1.0)
    elif p.kind == "gaussian":
        sigma = p.sigma
        z = 1.0 - _GAUSS_TRUNCATION
        lo = _norm_cdf(-p.center / sigma)
        x = np.clip(t, 0.0, p.support_end)
        out = p.total_area * (_norm_cdf((x - p.center) / sigma) - lo) / z
        out = np.clip(out, 0.0, p.total_area)
    else:
        tt, ww = p.samples
        x = np.clip(t, tt[0], tt[-1])
        idx = np.clip(np.searchsorted(tt, x, side="right") - 1, 0, len(tt) - 2)
        wloc = np.interp(x, tt, ww)
        out = p._cum[idx] + (x - tt[idx]) * (ww[idx] + wloc) / 2.0
    return out if out.ndim else float(out)


def inverse_area(p: PulseShape, a: float) -> float:
    """Smallest t with A(t) >= a, by bisection to 1e-10 * width."""
    if not 0.0 <= a <= p.total_area * (1.0 + 1e-12):
        raise ValueError(f"area {a} outside [0, {p.total_area}]")
    if a <= 0.0:
        return 0.0
    lo, hi = 0.0, p.support_end
    tol = 1e-10 * p.width
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cumulative_area(p, mid) >= a:
            hi = mid
        else:
            lo = mid
    return hi


def load_tabulated_csv(path, total_area: float = 0.0, time_scale: float = 1.0) -> PulseShape:
    """Load a tabulated pulse from a two-column CSV with header ``t,omega``.

    ``time_scale`` multiplies the time column (e.g. gamma in 1/s when the file
    is in seconds, to convert to units of 1/gamma).  ``total_area > 0``
    rescales the envelope to that area.
    """
    times, rates = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip().lower() for h in header[:2]] != ["t", "omega"]:
            raise ValueError(f"expected header 't,omega' in {path}, got {header}")
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]) * time_scale)
            rates.append(float(row[1]) / time_scale)
    return make_pulse("tabulated", total_area, 1.0,
                      samples=list(zip(times, rates)))
