"""Benchmark for the trajectory sampler: compiled kernels vs numpy fallback.

Runs the same seeded batch of jump trajectories through both execution
paths and reports wall-clock times and the speedup.  The compiled path is
warmed up once so compilation time is reported separately.

Usage:
    python benchmarks/bench_sampler.py [--n-traj N] [--gammaT X] [--area M]
"""

import argparse
import math
import time

import numpy as np

from pulsedtls import RandomStream, SystemParams, make_pulse
from pulsedtls import _kernels
from pulsedtls.oracle import _MAX_JUMPS, default_horizon


def run_batch(fn, args):
    t0 = time.perf_counter()
    out = fn(*args)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-traj", type=int, default=200000)
    ap.add_argument("--gammaT", type=float, default=0.3)
    ap.add_argument("--area", type=float, default=2.0,
                    help="pulse area in multiples of pi")
    ap.add_argument("--seed", type=int, default=2024)
    opts = ap.parse_args()

    sys_p = SystemParams(1.0)
    p = make_pulse("square", opts.area * math.pi, opts.gammaT)
    horizon = default_horizon(p, sys_p)
    t_pulse = p.support_end
    n_steps = int(max(512, 128 * math.ceil(p.total_area / math.pi),
                      50 * sys_p.gamma * t_pulse))
    uniforms = RandomStream(opts.seed).generator().random(
        (opts.n_traj, _MAX_JUMPS))
    kind, p0, p1, p2, tt, tw = _kernels.pulse_args(p)
    args = (kind, p0, p1, p2, tt, tw, sys_p.gamma, t_pulse, horizon,
            n_steps, uniforms)

    print(f"n_traj={opts.n_traj}, area={opts.area}pi, "
          f"gammaT={opts.gammaT}, n_steps={n_steps}")

    if not _kernels.USING_NUMBA:
        print("compiled path unavailable (PULSEDTLS_DISABLE_NUMBA set or "
              "numba missing); benchmarking numpy fallback only")
        t_np, _ = run_batch(_kernels.sample_batch, args)
        print(f"numpy fallback: {t_np:.3f} s")
        return

    # warm-up triggers JIT compilation
    small = args[:-1] + (uniforms[:16],)
    t_compile, _ = run_batch(_kernels.sample_batch, small)
    print(f"compile+warmup: {t_compile:.2f} s")

    t_nb, out_nb = run_batch(_kernels.sample_batch, args)
    _kernels.USING_NUMBA = False
    try:
        t_np, out_np = run_batch(_kernels.sample_batch, args)
    finally:
        _kernels.USING_NUMBA = True

    counts_nb, counts_np = out_nb[1], out_np[1]
    agree = np.array_equal(counts_nb, counts_np)
    print(f"compiled kernels: {t_nb:.3f} s "
          f"({opts.n_traj / t_nb:,.0f} traj/s)")
    print(f"numpy fallback:   {t_np:.3f} s "
          f"({opts.n_traj / t_np:,.0f} traj/s)")
    print(f"speedup: {t_np / t_nb:.1f}x; identical emission counts: {agree}")


if __name__ == "__main__":
    main()
