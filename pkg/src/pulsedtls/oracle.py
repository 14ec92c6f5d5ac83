"""Exact (numerically converged, approximation-free) emission statistics.

The conditional no-jump evolution of the two-level amplitudes is linear, so a
single dense solve of the 2x2 propagator over [0, horizon] gives every
segment propagator by composition, and the squared-norm decrease gives the
no-emission survival directly.  Augmenting the propagator ODE with cumulative
integrals of its excited-row products lets the final emission-time integral
of each F_n be folded analytically, leaving an (n-1)-dimensional quadrature
over the pulse window.

A master-equation / regression path provides G2(t1, t2) independently of the
trajectory hierarchy, and a Monte Carlo jump sampler (numba-accelerated, see
_kernels) provides an unbiased cross-check of the distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .counting import PhotocountDistribution, SystemParams
from .numerics import QuadratureConfig, RandomStream, integrate_1d
from .pulses import PulseShape, envelope

__all__ = [
    "TwoLevelState",
    "DensityMatrix2",
    "TrajectoryRecord",
    "TwoTimeCorrelation",
    "ConditionalPropagator",
    "propagate_conditional",
    "exact_density_fn",
    "exact_distribution",
    "sample_trajectories",
    "trajectory_histogram",
    "master_equation_rho",
    "excited_population",
    "g2_two_time",
    "g2_pulsewise",
    "default_horizon",
]


@dataclass(frozen=True)
class TwoLevelState:
    """Possibly unnormalized two-level amplitudes (ground, excited)."""

    amp_g: complex
    amp_e: complex

    @property
    def norm_sq(self) -> float:
        return abs(self.amp_g) ** 2 + abs(self.amp_e) ** 2

    @property
    def excited_prob(self) -> float:
        """Conditional excited population (normalized)."""
        return abs(self.amp_e) ** 2 / self.norm_sq


GROUND = TwoLevelState(1.0, 0.0)


@dataclass(frozen=True)
class DensityMatrix2:
    rho_gg: complex
    rho_ge: complex
    rho_eg: complex
    rho_ee: complex

    def __post_init__(self):
        tr = (self.rho_gg + self.rho_ee).real
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"density matrix trace {tr} != 1")
        if abs(self.rho_ge - np.conj(self.rho_eg)) > 1e-8:
            raise ValueError("density matrix is not Hermitian")

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.rho_gg, self.rho_ge],
                         [self.rho_eg, self.rho_ee]])


@dataclass(frozen=True)
class TrajectoryRecord:
    emission_times: tuple
    count: int
    final_state: TwoLevelState
    seed: int

    def __post_init__(self):
        if self.count != len(self.emission_times):
            raise ValueError("count must equal number of emission times")
        if self.count > 1 and np.any(np.diff(self.emission_times) <= 0.0):
            raise ValueError("emission times must be strictly increasing")


@dataclass(frozen=True)
class TwoTimeCorrelation:
    t1_grid: np.ndarray
    t2_grid: np.ndarray
    values: np.ndarray  # shape (len(t1_grid), len(t2_grid))


def default_horizon(p: PulseShape, sys: SystemParams) -> float:
    """Pulse support plus 20 lifetimes: the omitted decay tail is < 1e-8."""
    return p.support_end + 20.0 / sys.gamma


class _StitchedSolution:
    """Dense output glued from consecutive solve_ivp segments."""

    def __init__(self, sols, breaks):
        self._sols = sols
        self._breaks = breaks  # right edge of each segment

    def __call__(self, t):
        for sol, edge in zip(self._sols, self._breaks):
            if t <= edge:
                return sol(t)
        return self._sols[-1](self._breaks[-1])


def _solve_two_phase(rhs, y0, t0, t_pulse, t_final, rtol, atol):
    """Integrate with a step cap inside [t0, t_pulse] and free steps after.

    The cap guarantees the solver cannot hop over a pulse that is narrow
    compared with the decay tail.
    """
    t_pulse = min(max(t_pulse, t0), t_final)
    sols, edges = [], []
    if t_pulse > t0:
        res = solve_ivp(rhs, (t0, t_pulse), y0, method="DOP853", rtol=rtol,
                        atol=atol, dense_output=True,
                        max_step=(t_pulse - t0) / 50.0)
        if not res.success:
            raise RuntimeError(f"ODE integration failed: {res.message}")
        sols.append(res.sol)
        edges.append(t_pulse)
        y0 = res.y[:, -1]
    if t_final > t_pulse:
        res = solve_ivp(rhs, (t_pulse, t_final), y0, method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True)
        if not res.success:
            raise RuntimeError(f"ODE integration failed: {res.message}")
        sols.append(res.sol)
        edges.append(t_final)
    if not sols:
        sols, edges = [lambda t, y=np.asarray(y0, dtype=float): y], [t0]
    return _StitchedSolution(sols, edges)


class ConditionalPropagator:
    """Dense no-jump propagator P(t) with folded emission integrals.

    P solves P' = G(t) P, P(0) = I, with
        G = [[0, Omega/2], [-Omega/2, -gamma/2]]
    acting on real (amp_g, amp_e).  The extra components J_ij(t) accumulate
    gamma * P_2i * P_2j so that the probability of at least one emission after
    t, starting from the ground state, is a closed quadratic form in P(t)^-1.
    """

    def __init__(self, p: PulseShape, sys: SystemParams, horizon: float | None = None,
                 rtol: float = 1e-11, atol: float = 1e-13):
        self.pulse = p
        self.sys = sys
        self.horizon = default_horizon(p, sys) if horizon is None else float(horizon)
        g = sys.gamma

        def rhs(t, y):
            om = envelope(p, t)
            p11, p12, p21, p22, *_ = y
            return [0.5 * om * p21, 0.5 * om * p22,
                    -0.5 * om * p11 - 0.5 * g * p21,
                    -0.5 * om * p12 - 0.5 * g * p22,
                    g * p21 * p21, g * p21 * p22, g * p22 * p22]

        y0 = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
        self._sol = _solve_two_phase(rhs, y0, 0.0, p.support_end, self.horizon,
                                     rtol, atol)
        self._J_end = np.asarray(self._sol(self.horizon))[4:7].copy()

    def state_at(self, t: float) -> np.ndarray:
        return self._sol(t)

    def matrix(self, t: float) -> np.ndarray:
        y = self._sol(t)
        return np.array([[y[0], y[1]], [y[2], y[3]]])

    def segment(self, t_a: float, t_b: float) -> np.ndarray:
        """Propagator from t_a to t_b (t_a <= t_b)."""
        if t_b < t_a:
            raise ValueError("require t_a <= t_b")
        pa = self.matrix(t_a)
        pb = self.matrix(t_b)
        det = pa[0, 0] * pa[1, 1] - pa[0, 1] * pa[1, 0]
        inv = np.array([[pa[1, 1], -pa[0, 1]], [-pa[1, 0], pa[0, 0]]]) / det
        return pb @ inv

    def _ground_column(self, t: float) -> tuple:
        """First column of P(t)^-1 (ground state mapped back to t = 0)."""
        y = self._sol(t)
        det = y[0] * y[3] - y[1] * y[2]
        return y[3] / det, -y[2] / det

    def emit_prob_from_ground(self, t: float) -> float:
        """Probability of >= 1 emission in (t, horizon], starting in |g> at t."""
        y = self._sol(t)
        c1, c2 = self._ground_column(t)
        dj11 = self._J_end[0] - y[4]
        dj12 = self._J_end[1] - y[5]
        dj22 = self._J_end[2] - y[6]
        return c1 * c1 * dj11 + 2.0 * c1 * c2 * dj12 + c2 * c2 * dj22

    def excited_amp_from_ground(self, t: float, start: float) -> float:
        """Excited amplitude at t of the state that was |g> at ``start``."""
        c1, c2 = self._ground_column(start)
        y = self._sol(t)
        return y[2] * c1 + y[3] * c2


_PROP_CACHE: dict = {}


def _propagator(p: PulseShape, sys: SystemParams,
                horizon: float | None = None) -> ConditionalPropagator:
    key = (id(p), sys.gamma, horizon)
    prop = _PROP_CACHE.get(key)
    if prop is None:
        prop = ConditionalPropagator(p, sys, horizon)
        if len(_PROP_CACHE) > 32:
            _PROP_CACHE.clear()
        _PROP_CACHE[key] = prop
    return prop


def propagate_conditional(p: PulseShape, sys: SystemParams, state: TwoLevelState,
                          t_a: float, t_b: float) -> TwoLevelState:
    """No-jump evolution of an (unnormalized) state from t_a to t_b.

    The squared-norm ratio is the no-emission survival probability over the
    interval.
    """
    if t_b < t_a:
        raise ValueError("require t_a <= t_b")
    gam = sys.gamma

    def rhs(t, y):
        om = envelope(p, t)
        p11, p12, p21, p22 = y
        return [0.5 * om * p21, 0.5 * om * p22,
                -0.5 * om * p11 - 0.5 * gam * p21,
                -0.5 * om * p12 - 0.5 * gam * p22]

    sol = _solve_two_phase(rhs, [1.0, 0.0, 0.0, 1.0], t_a,
                           min(p.support_end, t_b), t_b, 1e-11, 1e-13)
    m = np.asarray(sol(t_b)).reshape(2, 2)
    g, e = state.amp_g, state.amp_e
    return TwoLevelState(m[0, 0] * g + m[0, 1] * e, m[1, 0] * g + m[1, 1] * e)


def exact_density_fn(p: PulseShape, sys: SystemParams, times) -> float:
    """Exact inclusive emission density at strictly increasing times (n <= 4)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or not 1 <= len(times) <= 4:
        raise ValueError("need 1..4 emission times")
    if np.any(times < 0.0) or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be strictly increasing and >= 0")
    prop = _propagator(p, sys, max(default_horizon(p, sys), times[-1]))
    w = 1.0
    prev = 0.0
    for t in times:
        w *= prop.excited_amp_from_ground(t, prev) if prev > 0.0 else prop.matrix(t)[1, 0]
        prev = t
    return sys.gamma ** len(times) * w * w


def exact_distribution(p: PulseShape, sys: SystemParams, nmax: int = 3,
                       cfg: QuadratureConfig = QuadratureConfig(1e-7, 1e-12),
                       horizon: float | None = None) -> PhotocountDistribution:
    """Exact photocount distribution P_0..P_nmax by nested quadrature.

    F_n integrates the exact density over the first n-1 (ordered) emission
    times; the last emission is folded into the always-emit-later probability
    from the ground state, which vanishes once the drive is over, so all
    quadratures run over the pulse support only.
    """
    if not 1 <= nmax <= 3:
        raise ValueError("nmax must be in 1..3")
    prop = _propagator(p, sys, horizon)
    g = sys.gamma
    T = p.support_end
    F = [prop._J_end[0]]  # F_1 = int gamma * P_eg(t)^2 dt = 1 - survival

    def f2_integrand(t1):
        y = prop.state_at(t1)
        return g * y[2] * y[2] * prop.emit_prob_from_ground(t1)

    if nmax + 1 >= 2:
        val, _ = integrate_1d(f2_integrand, 0.0, T, cfg)
        F.append(val)

    def f3_integrand(t1):
        y = prop.state_at(t1)
        w1 = g * y[2] * y[2]
        if w1 == 0.0:
            return 0.0

        def inner(t2):
            amp = prop.excited_amp_from_ground(t2, t1)
            return g * amp * amp * prop.emit_prob_from_ground(t2)

        val, _ = integrate_1d(inner, t1, T, cfg.relaxed(0.1))
        return w1 * val

    if nmax + 1 >= 3:
        val, _ = integrate_1d(f3_integrand, 0.0, T, cfg.relaxed(10.0))
        F.append(val)

    def f4_integrand(t1):
        y = prop.state_at(t1)
        w1 = g * y[2] * y[2]
        if w1 == 0.0:
            return 0.0

        def mid(t2):
            amp = prop.excited_amp_from_ground(t2, t1)
            w2 = g * amp * amp
            if w2 == 0.0:
                return 0.0

            def inner(t3):
                amp3 = prop.excited_amp_from_ground(t3, t2)
                return g * amp3 * amp3 * prop.emit_prob_from_ground(t3)

            val, _ = integrate_1d(inner, t2, T, cfg.relaxed(1e4))
            return w2 * val

        val, _ = integrate_1d(mid, t1, T, cfg.relaxed(1e3))
        return w1 * val

    if nmax + 1 >= 4:
        val, _ = integrate_1d(f4_integrand, 0.0, T, cfg.relaxed(1e2))
        F.append(val)

    F, bound = F[:nmax], F[nmax]
    P = [1.0 - F[0]] + [F[k] - (F[k + 1] if k + 1 < nmax else bound)
                        for k in range(nmax)]
    eps = 10.0 * max(cfg.abs_tol, cfg.rel_tol, 1e-12)
    return PhotocountDistribution(tuple(F), tuple(P), bound, "exact-oracle", eps=eps)


# ---------------------------------------------------------------------------
# Monte Carlo jump trajectories

_MAX_JUMPS = 64


def sample_trajectories(p: PulseShape, sys: SystemParams, n_traj: int,
                        stream: RandomStream, t_horizon: float | None = None) -> list:
    """Sample jump trajectories by the inverse-CDF method.

    Each trajectory draws u ~ U(0,1), propagates the unnormalized conditional
    state until its squared norm crosses u (bisected to 1e-8/gamma), records
    the jump, resets to the ground state and repeats until the horizon.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    g = sys.gamma
    horizon = default_horizon(p, sys) if t_horizon is None else float(t_horizon)
    uniforms = stream.generator().random((n_traj, _MAX_JUMPS))
    kind, p0, p1, p2, tt, tw = _kernels.pulse_args(p)
    t_pulse = min(p.support_end, horizon)
    n_steps = int(max(512, 128 * math.ceil(p.total_area / math.pi),
                      50 * g * t_pulse))
    times, counts, out_g, out_e = _kernels.sample_batch(
        kind, p0, p1, p2, tt, tw, g, t_pulse, horizon, n_steps, uniforms)
    records = []
    for i in range(n_traj):
        c = int(counts[i])
        records.append(TrajectoryRecord(tuple(times[i, :c]), c,
                                        TwoLevelState(out_g[i], out_e[i]),
                                        stream.seed))
    return records


def trajectory_histogram(records, nmax: int = 3):
    """Empirical P_0..P_nmax (last bin collects >= nmax) and standard errors."""
    counts = np.array([min(r.count, nmax) for r in records])
    n = len(records)
    probs = np.array([(counts == k).sum() / n for k in range(nmax + 1)])
    errs = np.sqrt(np.maximum(probs * (1.0 - probs), 1.0 / n) / n)
    return probs, errs


# ---------------------------------------------------------------------------
# master equation and quantum regression


def _lindblad_rhs(p: PulseShape, g: float):
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
    sd = sigma.conj().T
    n_op = sd @ sigma

    def rhs(t, y):
        om = envelope(p, t)
        rho = y.reshape(2, 2)
        h = 0.5 * om * np.array([[0.0, 1j], [-1j, 0.0]])
        drho = -1j * (h @ rho - rho @ h)
        drho += g * (sigma @ rho @ sd - 0.5 * (n_op @ rho + rho @ n_op))
        return drho.reshape(-1)

    return rhs


def _solve_master(p: PulseShape, sys: SystemParams, rho0: np.ndarray,
                  t0: float, t1: float, rtol: float = 1e-10, atol: float = 1e-12):
    return _solve_two_phase(_lindblad_rhs(p, sys.gamma), rho0.reshape(-1),
                            t0, min(p.support_end, t1), t1, rtol, atol)


def master_equation_rho(p: PulseShape, sys: SystemParams, t: float) -> DensityMatrix2:
    """Density matrix at time t, starting from the ground state at t = 0."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    if t == 0.0:
        rho = rho0
    else:
        rho = _solve_master(p, sys, rho0, 0.0, t)(t).reshape(2, 2)
    return DensityMatrix2(rho[0, 0], rho[0, 1], rho[1, 0], rho[1, 1])


def excited_population(p: PulseShape, sys: SystemParams, t_grid) -> np.ndarray:
    """rho_ee on a grid of times (single dense master-equation solve)."""
    t_grid = np.asarray(t_grid, dtype=float)
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    sol = _solve_master(p, sys, rho0, 0.0, float(t_grid[-1]))
    return np.array([sol(t).reshape(2, 2)[1, 1].real if t > 0.0 else 0.0
                     for t in t_grid])


def g2_two_time(p: PulseShape, sys: SystemParams, t1_grid, t2_grid) -> TwoTimeCorrelation:
    """G2(t1, t2) by quantum regression on a rectangular grid.

    For t2 > t1: propagate rho to t1, collapse with the lowering operator,
    propagate the collapsed (ground-state) matrix to t2 and read off
    gamma^2 * excited population.  Mirrored for t2 < t1; zero diagonal.
    """
    t1_grid = np.asarray(t1_grid, dtype=float)
    t2_grid = np.asarray(t2_grid, dtype=float)
    if np.any(np.diff(t1_grid) <= 0.0) or np.any(np.diff(t2_grid) <= 0.0):
        raise ValueError("grids must be strictly increasing")
    if not np.array_equal(t1_grid, t2_grid):
        raise ValueError("symmetric correlation requires identical grids")
    g = sys.gamma
    n = len(t1_grid)
    t_end = float(t1_grid[-1])
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    sol = _solve_master(p, sys, rho0, 0.0, t_end)
    pe = np.array([sol(t).reshape(2, 2)[1, 1].real if t > 0 else 0.0
                   for t in t1_grid])
    values = np.zeros((n, n))
    ground = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    for i, t1 in enumerate(t1_grid[:-1]):
        if pe[i] <= 0.0:
            continue
        # collapsed matrix is pe * |g><g|; propagate the normalized ground state
        sol2 = _solve_master(p, sys, ground, t1, t_end)
        for j in range(i + 1, n):
            w = sol2(t2_grid[j]).reshape(2, 2)[1, 1].real
            values[i, j] = g * g * pe[i] * w
    values = values + values.T
    return TwoTimeCorrelation(t1_grid, t2_grid, values)


def g2_pulsewise(p: PulseShape, sys: SystemParams, n_nodes: int = 96,
                 tail: float = 12.0) -> float:
    """Pulse-wise degree of second-order coherence from the regression path.

    g2[0] = (integral of G2 over both times) / E[n]^2, with the t2 integral
    taken per t1 node by quadrature of the re-excited population.
    """
    g = sys.gamma
    T = p.support_end
    t_end = T + tail / g
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    sol = _solve_master(p, sys, rho0, 0.0, t_end)

    def flux(t):
        return g * sol(t).reshape(2, 2)[1, 1].real

    mean_n, _ = integrate_1d(flux, 0.0, t_end, QuadratureConfig(1e-9, 1e-13),
                             points=[T])
    if mean_n <= 0.0:
        raise ValueError("mean photon number is zero; g2 undefined")
    ground = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)

    # composite Gauss-Legendre nodes over [0, pulse] and [pulse, tail]
    def gl_nodes(a, b, m):
        x, w = np.polynomial.legendre.leggauss(m)
        return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w

    n_pulse = max(n_nodes // 2, 8)
    xs1, ws1 = gl_nodes(0.0, T, n_pulse)
    xs2, ws2 = gl_nodes(T, t_end, max(n_nodes - n_pulse, 8))
    xs = np.concatenate([xs1, xs2])
    ws = np.concatenate([ws1, ws2])
    total = 0.0
    for t1, w1 in zip(xs, ws):
        pe1 = sol(t1).reshape(2, 2)[1, 1].real
        if pe1 <= 0.0 or t1 >= t_end:
            continue
        sol2 = _solve_master(p, sys, ground, t1, t_end, rtol=1e-8, atol=1e-11)

        def refed(t2):
            return sol2(t2).reshape(2, 2)[1, 1].real

        inner, _ = integrate_1d(refed, t1, t_end, QuadratureConfig(1e-7, 1e-11),
                                points=[T] if t1 < T else None)
        total += w1 * g * pe1 * g * inner
    return 2.0 * total / mean_n ** 2
