"""Monte Carlo jump-trajectory sampling kernels.

Two implementations of the same algorithm: a numba @njit per-trajectory loop
(default) and a vectorized pure-numpy batch path.  Set the environment
variable ``PULSEDTLS_DISABLE_NUMBA=1`` before import to force the numpy path.
``benchmarks/bench_sampler.py`` compares the two.

The conditional amplitudes (g, e) obey the linear system
    g' = (Omega/2) e,   e' = -(Omega/2) g - (gamma/2) e
stepped with classical RK4 over the pulse support.  Jump times are located by
bisection of the squared norm against the drawn threshold (tolerance
1e-8/gamma); after the pulse the norm decay is a pure exponential in the
excited amplitude, so tail jumps are solved in closed form.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLE = os.environ.get("PULSEDTLS_DISABLE_NUMBA", "0") not in ("0", "", "false")
try:
    if _DISABLE:
        raise ImportError("numba disabled by PULSEDTLS_DISABLE_NUMBA")
    from numba import njit, prange
    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

_BISECT_ITERS = 52


def pulse_args(p):
    """Flatten a PulseShape into the scalar/array arguments the kernels take."""
    empty = np.empty(0)
    if p.kind == "square":
        return 0, p.total_area / p.width, p.width, 0.0, empty, empty
    if p.kind == "gaussian":
        sigma = p.sigma
        amp = p.total_area / (sigma * math.sqrt(2.0 * math.pi)) / (1.0 - 1e-9)
        return 1, amp, p.center, sigma, empty, empty
    tt, tw = p.samples
    return 2, 0.0, 0.0, 0.0, np.asarray(tt, float), np.asarray(tw, float)


# ---------------------------------------------------------------------------
# numba path

if USING_NUMBA:

    @njit(cache=True, inline="always")
    def _omega(kind, p0, p1, p2, tt, tw, t):
        if kind == 0:
            return p0 if 0.0 <= t <= p1 else 0.0
        if kind == 1:
            if t < 0.0 or t > 2.0 * p1:
                return 0.0
            z = (t - p1) / p2
            return p0 * math.exp(-0.5 * z * z)
        # tabulated, piecewise linear
        n = tt.shape[0]
        if t <= tt[0] or t >= tt[n - 1]:
            return tw[0] if t == tt[0] else (tw[n - 1] if t == tt[n - 1] else 0.0)
        lo, hi = 0, n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tt[mid] <= t:
                lo = mid
            else:
                hi = mid
        frac = (t - tt[lo]) / (tt[lo + 1] - tt[lo])
        return tw[lo] + frac * (tw[lo + 1] - tw[lo])

    @njit(cache=True, inline="always")
    def _rk4(kind, p0, p1, p2, tt, tw, gamma, g, e, t, h):
        om1 = _omega(kind, p0, p1, p2, tt, tw, t)
        om2 = _omega(kind, p0, p1, p2, tt, tw, t + 0.5 * h)
        om3 = _omega(kind, p0, p1, p2, tt, tw, t + h)
        k1g = 0.5 * om1 * e
        k1e = -0.5 * om1 * g - 0.5 * gamma * e
        g2 = g + 0.5 * h * k1g
        e2 = e + 0.5 * h * k1e
        k2g = 0.5 * om2 * e2
        k2e = -0.5 * om2 * g2 - 0.5 * gamma * e2
        g3 = g + 0.5 * h * k2g
        e3 = e + 0.5 * h * k2e
        k3g = 0.5 * om2 * e3
        k3e = -0.5 * om2 * g3 - 0.5 * gamma * e3
        g4 = g + h * k3g
        e4 = e + h * k3e
        k4g = 0.5 * om3 * e4
        k4e = -0.5 * om3 * g4 - 0.5 * gamma * e4
        gn = g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        en = e + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        return gn, en

    @njit(cache=True, parallel=True)
    def _sample_batch_numba(kind, p0, p1, p2, tt, tw, gamma, t_pulse, horizon,
                            n_steps, uniforms, times, counts, out_g, out_e):
        n_traj, kmax = uniforms.shape
        dt = t_pulse / n_steps
        tol = 1e-8 / gamma if gamma > 0.0 else dt * 1e-12
        for i in prange(n_traj):
            g = 1.0
            e = 0.0
            u = uniforms[i, 0]
            uidx = 1
            nrec = 0
            t = 0.0
            for step in range(n_steps):
                t_end = (step + 1) * dt
                g1, e1 = _rk4(kind, p0, p1, p2, tt, tw, gamma, g, e, t, t_end - t)
                while g1 * g1 + e1 * e1 < u and nrec < kmax:
                    lo = t
                    hi = t_end
                    glo = g
                    elo = e
                    for _ in range(_BISECT_ITERS):
                        if hi - lo <= tol:
                            break
                        mid = 0.5 * (lo + hi)
                        gm, em = _rk4(kind, p0, p1, p2, tt, tw, gamma,
                                      glo, elo, lo, mid - lo)
                        if gm * gm + em * em < u:
                            hi = mid
                        else:
                            lo = mid
                            glo = gm
                            elo = em
                    tj = 0.5 * (lo + hi)
                    times[i, nrec] = tj
                    nrec += 1
                    g = 1.0
                    e = 0.0
                    t = tj
                    if uidx < kmax:
                        u = uniforms[i, uidx]
                        uidx += 1
                    else:
                        u = -1.0  # exhausted: no further jumps
                    g1, e1 = _rk4(kind, p0, p1, p2, tt, tw, gamma, g, e, t, t_end - t)
                g = g1
                e = e1
                t = t_end
            # analytic tail: no drive, excited amplitude decays exponentially
            if gamma > 0.0:
                gg = g * g
                ee = e * e
                if ee > 0.0 and u > gg and nrec < kmax:
                    tj = t_pulse + math.log(ee / (u - gg)) / gamma
                    if tj <= horizon:
                        times[i, nrec] = tj
                        nrec += 1
                        g = 1.0
                        e = 0.0
                    else:
                        e *= math.exp(-0.5 * gamma * (horizon - t_pulse))
                else:
                    e *= math.exp(-0.5 * gamma * (horizon - t_pulse))
            counts[i] = nrec
            out_g[i] = g
            out_e[i] = e


# ---------------------------------------------------------------------------
# numpy fallback (vectorized over trajectories)


def _omega_np(kind, p0, p1, p2, tt, tw, t):
    t = np.asarray(t)
    if kind == 0:
        return np.where((t >= 0.0) & (t <= p1), p0, 0.0)
    if kind == 1:
        z = (t - p1) / p2
        return np.where((t >= 0.0) & (t <= 2.0 * p1), p0 * np.exp(-0.5 * z * z), 0.0)
    return np.interp(t, tt, tw, left=0.0, right=0.0)


def _rk4_np(kind, p0, p1, p2, tt, tw, gamma, g, e, t, h):
    om1 = _omega_np(kind, p0, p1, p2, tt, tw, t)
    om2 = _omega_np(kind, p0, p1, p2, tt, tw, t + 0.5 * h)
    om3 = _omega_np(kind, p0, p1, p2, tt, tw, t + h)
    k1g = 0.5 * om1 * e
    k1e = -0.5 * om1 * g - 0.5 * gamma * e
    g2 = g + 0.5 * h * k1g
    e2 = e + 0.5 * h * k1e
    k2g = 0.5 * om2 * e2
    k2e = -0.5 * om2 * g2 - 0.5 * gamma * e2
    g3 = g + 0.5 * h * k2g
    e3 = e + 0.5 * h * k2e
    k3g = 0.5 * om2 * e3
    k3e = -0.5 * om2 * g3 - 0.5 * gamma * e3
    g4 = g + h * k3g
    e4 = e + h * k3e
    k4g = 0.5 * om3 * e4
    k4e = -0.5 * om3 * g4 - 0.5 * gamma * e4
    gn = g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    en = e + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    return gn, en


def _sample_batch_numpy(kind, p0, p1, p2, tt, tw, gamma, t_pulse, horizon,
                        n_steps, uniforms, times, counts, out_g, out_e):
    n_traj, kmax = uniforms.shape
    dt = t_pulse / n_steps
    tol = 1e-8 / gamma if gamma > 0.0 else dt * 1e-12
    g = np.ones(n_traj)
    e = np.zeros(n_traj)
    pos = np.zeros(n_traj)
    u = uniforms[:, 0].copy()
    uidx = np.ones(n_traj, dtype=np.int64)
    for step in range(n_steps):
        t_end = (step + 1) * dt
        g1, e1 = _rk4_np(kind, p0, p1, p2, tt, tw, gamma, g, e, pos, t_end - pos)
        active = (g1 * g1 + e1 * e1 < u) & (counts < kmax)
        while np.any(active):
            idx = np.nonzero(active)[0]
            lo = pos[idx].copy()
            hi = np.full(len(idx), t_end)
            glo = g[idx].copy()
            elo = e[idx].copy()
            for _ in range(_BISECT_ITERS):
                if np.all(hi - lo <= tol):
                    break
                mid = 0.5 * (lo + hi)
                gm, em = _rk4_np(kind, p0, p1, p2, tt, tw, gamma,
                                 glo, elo, lo, mid - lo)
                below = gm * gm + em * em < u[idx]
                hi = np.where(below, mid, hi)
                lo = np.where(below, lo, mid)
                glo = np.where(below, glo, gm)
                elo = np.where(below, elo, em)
            tj = 0.5 * (lo + hi)
            times[idx, counts[idx]] = tj
            counts[idx] += 1
            g[idx] = 1.0
            e[idx] = 0.0
            pos[idx] = tj
            has_u = uidx[idx] < kmax
            nxt = np.where(has_u, uniforms[idx, np.minimum(uidx[idx], kmax - 1)], -1.0)
            u[idx] = nxt
            uidx[idx] += 1
            gs, es = _rk4_np(kind, p0, p1, p2, tt, tw, gamma,
                             g[idx], e[idx], pos[idx], t_end - pos[idx])
            g1[idx] = gs
            e1[idx] = es
            active = np.zeros(n_traj, dtype=bool)
            active[idx] = (gs * gs + es * es < u[idx]) & (counts[idx] < kmax)
        g, e = g1, e1
        pos[:] = t_end
    if gamma > 0.0:
        gg = g * g
        ee = e * e
        can = (ee > 0.0) & (u > gg) & (counts < kmax)
        with np.errstate(divide="ignore", invalid="ignore"):
            tj = t_pulse + np.log(ee / (u - gg)) / gamma
        jump = can & (tj <= horizon)
        times[jump, counts[jump]] = tj[jump]
        counts[jump] += 1
        g = np.where(jump, 1.0, g)
        e = np.where(jump, 0.0, e * math.exp(-0.5 * gamma * (horizon - t_pulse)))
    out_g[:] = g
    out_e[:] = e


def sample_batch(kind, p0, p1, p2, tt, tw, gamma, t_pulse, horizon, n_steps,
                 uniforms):
    """Run the sampler on a batch of pre-drawn uniform thresholds.

    Returns (times, counts, final_g, final_e); row i of ``times`` holds the
    first counts[i] emission times of trajectory i.
    """
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    n_traj, kmax = uniforms.shape
    times = np.zeros((n_traj, kmax))
    counts = np.zeros(n_traj, dtype=np.int64)
    out_g = np.empty(n_traj)
    out_e = np.empty(n_traj)
    args = (int(kind), float(p0), float(p1), float(p2),
            np.ascontiguousarray(tt, dtype=np.float64),
            np.ascontiguousarray(tw, dtype=np.float64),
            float(gamma), float(t_pulse), float(horizon), int(n_steps),
            uniforms, times, counts, out_g, out_e)
    if USING_NUMBA:
        _sample_batch_numba(*args)
    else:
        _sample_batch_numpy(*args)
    return times, counts, out_g, out_e
