"""Shared numerical kernels: quadrature, nested simplex quadrature, ODE
integration and seeded random streams.

The quadrature and ODE entry points are thin contracts over scipy; the nested
simplex integrator is recursive 1-D adaptive quadrature with the per-level
tolerance tightened 10x so that inner errors do not dominate the outer
estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

__all__ = [
    "QuadratureConfig",
    "OdeConfig",
    "RandomStream",
    "QuadratureError",
    "integrate_1d",
    "integrate_simplex",
    "integrate_ode",
]


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2 ** 15

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def relaxed(self, factor: float) -> "QuadratureConfig":
        return QuadratureConfig(self.rel_tol * factor, self.abs_tol * factor,
                                self.max_subdivisions)


@dataclass(frozen=True)
class OdeConfig:
    method: str = "adaptive45"  # "adaptive45" or "fixed4"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf

    def __post_init__(self):
        if self.method not in ("adaptive45", "fixed4"):
            raise ValueError(f"unknown ODE method {self.method!r}")
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0 and self.max_step > 0.0):
            raise ValueError("tolerances and max_step must be > 0")


@dataclass(frozen=True)
class RandomStream:
    """Seeded, platform-reproducible random source (PCG64)."""

    seed: int
    algorithm: str = "pcg64"

    def generator(self) -> np.random.Generator:
        if self.algorithm != "pcg64":
            raise ValueError(f"unsupported algorithm {self.algorithm!r}")
        return np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, index: int) -> "RandomStream":
        """Independent sub-stream keyed by (seed, index)."""
        child = np.random.SeedSequence([self.seed, index]).generate_state(1)[0]
        return RandomStream(int(child), self.algorithm)


def integrate_1d(f, a: float, b: float, cfg: QuadratureConfig = QuadratureConfig(),
                 points=None):
    """Adaptive quadrature of f over [a, b]; returns (value, error_estimate).

    ``points`` marks known breakpoints (kinks) inside (a, b).  A subdivision
    limit is reported as a warning and the partial value is returned.
    """
    if a > b:
        raise ValueError("require a <= b")
    if a == b:
        return 0.0, 0.0
    if points is not None:
        points = [x for x in points if a < x < b]
        if not points:
            points = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                   limit=cfg.max_subdivisions, points=points, full_output=1)
    value, err = out[0], out[1]
    if len(out) > 3:
        warnings.warn(f"quadrature on [{a}, {b}] did not converge: {out[3]}",
                      RuntimeWarning, stacklevel=2)
    return value, err


def integrate_simplex(f, ndim: int, upper: float,
                      cfg: QuadratureConfig = QuadratureConfig(),
                      points=None):
    """Integrate f(t_1, ..., t_ndim) over 0 <= t_1 <= ... <= t_ndim <= upper.

    ndim must be 1, 2 or 3.  Implemented as recursive adaptive 1-D passes,
    outer to inner, with the tolerance tightened 10x per level.  Returns
    (value, error_estimate) with inner error estimates propagated through the
    outer integration.
    """
    if ndim not in (1, 2, 3):
        raise ValueError("simplex quadrature supports 1 <= ndim <= 3")
    if upper <= 0.0:
        raise ValueError("upper must be > 0")

    inner_err = {"max": 0.0}

    def level(prefix, lo, depth, c):
        if depth == ndim:
            return f(*prefix)

        def g(t):
            return level(prefix + (t,), t, depth + 1, c.relaxed(0.1))

        val, err = integrate_1d(g, lo, upper, c, points=points)
        inner_err["max"] = max(inner_err["max"], err)
        return val

    if ndim == 1:
        return integrate_1d(f, 0.0, upper, cfg, points=points)
    value = level((), 0.0, 0, cfg)
    # outer pass error plus accumulated inner estimates scaled by the domain
    err = inner_err["max"] * (1.0 + upper ** (ndim - 1))
    return value, err


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray  # shape (nstate, nt)
    sol: object = field(default=None, repr=False)  # dense-output callable

    def __call__(self, t):
        return self.sol(t)


def integrate_ode(rhs, y0, t_span, cfg: OdeConfig = OdeConfig(),
                  t_eval=None) -> OdeResult:
    """Integrate y' = rhs(t, y) over t_span; dense output always available."""
    t0, t1 = float(t_span[0]), float(t_span[-1])
    if t1 < t0:
        raise ValueError("t_span must be ordered")
    y0 = np.atleast_1d(np.asarray(y0))
    if cfg.method == "adaptive45":
        res = solve_ivp(rhs, (t0, t1), y0, method="RK45", rtol=cfg.rel_tol,
                        atol=cfg.abs_tol, max_step=cfg.max_step,
                        dense_output=True, t_eval=t_eval)
        if not res.success:
            raise RuntimeError(f"ODE integration failed: {res.message}")
        return OdeResult(res.t, res.y, res.sol)
    # classical fixed-step RK4 on a uniform grid of step <= max_step
    if not np.isfinite(cfg.max_step):
        raise ValueError("fixed4 requires a finite max_step")
    n = max(1, int(np.ceil((t1 - t0) / cfg.max_step)))
    ts = np.linspace(t0, t1, n + 1)
    ys = np.empty((len(y0), n + 1), dtype=np.result_type(y0.dtype, float))
    ys[:, 0] = y0
    y = y0.astype(ys.dtype)
    h = (t1 - t0) / n
    for i in range(n):
        t = ts[i]
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + h / 2, y + h / 2 * k1))
        k3 = np.asarray(rhs(t + h / 2, y + h / 2 * k2))
        k4 = np.asarray(rhs(t + h, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[:, i + 1] = y

    def dense(tq):
        tq = np.asarray(tq, dtype=float)
        scalar = tq.ndim == 0
        tq = np.atleast_1d(tq)
        out = np.empty((ys.shape[0], len(tq)), dtype=ys.dtype)
        for k in range(ys.shape[0]):
            out[k] = np.interp(tq, ts, ys[k])
        return out[:, 0] if scalar else out

    res = OdeResult(ts, ys, dense)
    if t_eval is not None:
        res = OdeResult(np.asarray(t_eval), dense(t_eval), dense)
    return res
