"""Command-line driver producing CSV datasets with reproducibility manifests.

Subcommands
-----------
scan-width    P1/P2/g2[0] versus pulse width at fixed area (analytic + exact).
scan-area     Photon statistics versus pulse area at fixed width.
densities     Emission-time probability densities (1-D marginals + 2-D joints).
g2grid        Temporally resolved second-order coherence on a square grid.
distribution  Photocount distribution and purities versus pulse width.
replay        Re-run a previous invocation from its JSON manifest.

Every dataset <out>.csv is accompanied by <out>.manifest.json recording the
tool version, fully resolved parameters, seed, wall-clock time and per-row
error status.  Re-running a manifest with deterministic backends reproduces
the CSV byte-for-byte.  All numbers are serialized with 17 significant
digits; time is expressed in units of 1/gamma so the width parameter is
gammaT.  Exit status is 0 only if every row succeeded.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .counting import (
    PhotocountDistribution,
    SystemParams,
    closed_form_square,
    density_p2_joint,
    exclusive_Pn,
    ideal_excited_prob,
    marginal_p1,
    marginal_p2,
    marginal_p3_sym1,
    marginal_p3_sym2,
)
from .numerics import QuadratureConfig, RandomStream
from .oracle import (
    exact_distribution,
    g2_pulsewise,
    g2_two_time,
    sample_trajectories,
    trajectory_histogram,
)
from .pulses import PulseShape, cumulative_area, load_tabulated_csv, make_pulse
from .stats import expected_n, g2_zero, purities, variance_rel

SCHEMA_VERSION = 1

_BACKENDS = ("analytic", "exact", "monte-carlo", "all")


# ---------------------------------------------------------------------------
# argument plumbing


def _parse_gamma_t(text: str) -> list[float]:
    """Parse a width argument: single value or min:max:count:lin|log grid."""
    if ":" not in text:
        v = float(text)
        if v <= 0.0:
            raise argparse.ArgumentTypeError("gammaT must be > 0")
        return [v]
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            "grid must be min:max:count:lin|log")
    lo, hi, count, spacing = float(parts[0]), float(parts[1]), int(parts[2]), parts[3]
    if count < 2:
        raise argparse.ArgumentTypeError("grid count must be >= 2")
    if not lo < hi:
        raise argparse.ArgumentTypeError("grid requires min < max")
    if spacing == "lin":
        return list(np.linspace(lo, hi, count))
    if spacing == "log":
        if lo <= 0.0:
            raise argparse.ArgumentTypeError("log grid requires min > 0")
        return list(np.geomspace(lo, hi, count))
    raise argparse.ArgumentTypeError("spacing must be 'lin' or 'log'")


def _parse_area_grid(text: str) -> list[float]:
    """Area argument in multiples of pi: single value or min:max:count grid."""
    if ":" not in text:
        return [float(text)]
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("area grid must be min:max:count")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 2:
        raise argparse.ArgumentTypeError("grid count must be >= 2")
    if not lo < hi:
        raise argparse.ArgumentTypeError("grid requires min < max")
    return list(np.linspace(lo, hi, count))


def _resolve_pulse(spec: str, area: float, gamma_t: float) -> PulseShape:
    if spec == "square" or spec == "gaussian":
        return make_pulse(spec, area, gamma_t)
    if spec.startswith("tabulated:"):
        return load_tabulated_csv(spec.split(":", 1)[1], total_area=area)
    raise ValueError(f"unknown pulse kind {spec!r}")


def _default_outdir() -> str:
    return os.environ.get("PULSEDTLS_OUTDIR", ".")


def _out_path(args: argparse.Namespace, stem: str) -> str:
    if args.out is not None:
        return args.out
    return os.path.join(_default_outdir(), stem)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return "%.17g" % x


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def _write_manifest(csv_path: str, subcommand: str, params: dict,
                    wall_clock: float, row_errors: list,
                    err_estimates: list | None) -> str:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "pulsedtls",
        "tool_version": __version__,
        "subcommand": subcommand,
        "params": params,
        "seed": params.get("seed"),
        "wall_clock_s": wall_clock,
        "row_errors": row_errors,
        "err_estimates": err_estimates,
        "output": os.path.basename(csv_path),
    }
    path = os.path.splitext(csv_path)[0] + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _map_grid(fn, items: list, jobs: int) -> list:
    """Evaluate fn over grid points, optionally in a process pool.

    Results are assembled in grid order regardless of completion order.
    Each item is (index, payload); fn returns (row, error_or_None).
    """
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# scan-width


def _scan_width_row(payload):
    (gt, pulse_kind, area, tol, seed) = payload
    sys_p = SystemParams(1.0)
    cfg = QuadratureConfig(rel_tol=tol)
    try:
        p = _resolve_pulse(pulse_kind, area, gt)
        ana = exclusive_Pn(p, sys_p, nmax=3, cfg=cfg)
        exa = exact_distribution(p, sys_p)
        g2_ana = g2_zero(ana) if expected_n(ana) > 0.0 else None
        g2_exa = g2_pulsewise(p, sys_p)
        err = max(ana.truncation_bound, exa.truncation_bound)
        row = [gt, ana.exclusive[1], ana.exclusive[2],
               exa.exclusive[1], exa.exclusive[2], g2_ana, g2_exa, err]
        return row, None, err
    except Exception as exc:  # pragma: no cover - per-row fault isolation
        return [gt] + [None] * 7, f"{type(exc).__name__}: {exc}", None


def cmd_scan_width(args: argparse.Namespace) -> int:
    grid = args.gammaT
    payloads = [(gt, args.pulse, args.area * math.pi, args.tol, args.seed)
                for gt in grid]
    results = _map_grid(_scan_width_row, payloads, args.jobs)
    header = ["gammaT", "P1_analytic", "P2_analytic", "P1_exact", "P2_exact",
              "g2_analytic", "g2_exact", "err_est"]
    return _finish(args, "scan-width", "scan_width.csv", header, results)


# ---------------------------------------------------------------------------
# scan-area


def _scan_area_row(payload):
    (area, gt, pulse_kind, backend, tol, seed, n_traj, index) = payload
    sys_p = SystemParams(1.0)
    cfg = QuadratureConfig(rel_tol=tol)
    try:
        p = _resolve_pulse(pulse_kind, area, gt)
        if backend == "analytic":
            dist = exclusive_Pn(p, sys_p, nmax=3, cfg=cfg)
        elif backend == "exact":
            dist = exact_distribution(p, sys_p)
        elif backend == "monte-carlo":
            recs = sample_trajectories(p, sys_p, n_traj,
                                       RandomStream(seed).spawn(index))
            probs, _ = trajectory_histogram(recs, nmax=3)
            dist = probs
        else:
            raise ValueError(f"unsupported backend {backend!r}")
        en = expected_n(dist)
        g2 = g2_zero(dist) if en > 0.0 else None
        vr = variance_rel(dist) if en > 0.0 else None
        p1i = ideal_excited_prob(area)
        probs = dist.exclusive if isinstance(dist, PhotocountDistribution) else dist
        row = [area / math.pi, p1i, probs[1], probs[2], en, g2, vr, backend]
        return row, None, None
    except Exception as exc:  # pragma: no cover
        return [area / math.pi] + [None] * 6 + [backend], \
            f"{type(exc).__name__}: {exc}", None


def cmd_scan_area(args: argparse.Namespace) -> int:
    backends = (["analytic", "exact"] if args.backend == "all"
                else [args.backend])
    payloads = []
    i = 0
    for backend in backends:
        for frac in args.area:
            payloads.append((frac * math.pi, args.gammaT[0], args.pulse,
                             backend, args.tol, args.seed, args.n_traj, i))
            i += 1
    results = _map_grid(_scan_area_row, payloads, args.jobs)
    header = ["area_pi", "P1_ideal", "P1", "P2", "En", "g2", "var_rel",
              "backend"]
    return _finish(args, "scan-area", "scan_area.csv", header, results)


# ---------------------------------------------------------------------------
# densities


def cmd_densities(args: argparse.Namespace) -> int:
    sys_p = SystemParams(1.0)
    gt = args.gammaT[0]
    area = args.area * math.pi
    t0 = time.monotonic()
    p = _resolve_pulse(args.pulse, area, gt)
    tee = p.support_end
    row_errors: list = []

    ts = np.linspace(0.0, tee, args.points)
    rows1 = []
    for t in ts:
        a_t = cumulative_area(p, t)
        try:
            rows1.append([a_t / math.pi, ideal_excited_prob(a_t),
                          marginal_p1(p, sys_p, t), marginal_p2(p, sys_p, t),
                          marginal_p3_sym1(p, sys_p, t)])
            row_errors.append(None)
        except Exception as exc:  # pragma: no cover
            rows1.append([a_t / math.pi] + [None] * 4)
            row_errors.append(f"{type(exc).__name__}: {exc}")
    base = _out_path(args, "densities.csv")
    stem = os.path.splitext(base)[0]
    _write_csv(base, ["A_t1_pi", "Pe_no_jump", "p1", "p2", "p3"], rows1)

    ts2 = np.linspace(0.0, tee, args.points_2d)
    rows_p2, rows_p3 = [], []
    for t1 in ts2:
        a1 = cumulative_area(p, t1) / math.pi
        for t2 in ts2:
            a2 = cumulative_area(p, t2) / math.pi
            try:
                # the joints are exchange-symmetric with a vanishing diagonal
                if t1 == t2:
                    rows_p2.append([a1, a2, 0.0])
                    rows_p3.append([a1, a2, 0.0])
                    row_errors.append(None)
                    continue
                ta, tb = min(t1, t2), max(t1, t2)
                rows_p2.append([a1, a2, density_p2_joint(p, sys_p, ta, tb)])
                rows_p3.append([a1, a2, marginal_p3_sym2(p, sys_p, ta, tb)])
                row_errors.append(None)
            except Exception as exc:  # pragma: no cover
                rows_p2.append([a1, a2, None])
                rows_p3.append([a1, a2, None])
                row_errors.append(f"{type(exc).__name__}: {exc}")
    _write_csv(stem + "_p2joint.csv", ["A_t1_pi", "A_t2_pi", "p2_joint"],
               rows_p2)
    _write_csv(stem + "_p3sym.csv", ["A_t1_pi", "A_t2_pi", "p3_sym"], rows_p3)

    wall = time.monotonic() - t0
    _write_manifest(base, "densities", _params_dict(args), wall,
                    row_errors, None)
    failed = sum(e is not None for e in row_errors)
    print(f"densities: wrote {base} (+2 joint files), "
          f"{failed} failed rows", file=sys.stderr)
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# g2grid


def cmd_g2grid(args: argparse.Namespace) -> int:
    if args.points > 256:
        print("g2grid: grid resolution capped at 256", file=sys.stderr)
        return 2
    sys_p = SystemParams(1.0)
    gt = args.gammaT[0]
    t0 = time.monotonic()
    p = _resolve_pulse(args.pulse, args.area * math.pi, gt)
    horizon = p.support_end + args.tail / sys_p.gamma
    ts = np.linspace(0.0, horizon, args.points)
    corr = g2_two_time(p, sys_p, ts, ts)
    rows = [[t1, t2, corr.values[i, j]]
            for i, t1 in enumerate(ts) for j, t2 in enumerate(ts)]
    base = _out_path(args, "g2grid.csv")
    _write_csv(base, ["t1", "t2", "G2"], rows)
    wall = time.monotonic() - t0
    _write_manifest(base, "g2grid", _params_dict(args), wall,
                    [None] * len(rows), None)
    print(f"g2grid: wrote {base}, 0 failed rows", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# distribution


def _distribution_row(payload):
    (gt, pulse_kind, area, backend, tol, seed, n_traj, index) = payload
    sys_p = SystemParams(1.0)
    cfg = QuadratureConfig(rel_tol=tol)
    try:
        p = _resolve_pulse(pulse_kind, area, gt)
        if backend == "analytic":
            dist = exclusive_Pn(p, sys_p, nmax=3, cfg=cfg)
            probs, err = dist.exclusive, dist.truncation_bound
        elif backend == "exact":
            dist = exact_distribution(p, sys_p)
            probs, err = dist.exclusive, dist.truncation_bound
        elif backend == "monte-carlo":
            recs = sample_trajectories(p, sys_p, n_traj,
                                       RandomStream(seed).spawn(index))
            hist, errs = trajectory_histogram(recs, nmax=3)
            probs, err = hist, float(np.max(errs))
        else:
            raise ValueError(f"unsupported backend {backend!r}")
        pi = purities(probs)
        row = [gt, probs[0], probs[1], probs[2], probs[3],
               pi[0], pi[1], pi[2], backend]
        return row, None, err
    except Exception as exc:  # pragma: no cover
        return [gt] + [None] * 7 + [backend], \
            f"{type(exc).__name__}: {exc}", None


def cmd_distribution(args: argparse.Namespace) -> int:
    backends = (["analytic", "exact"] if args.backend == "all"
                else [args.backend])
    payloads = []
    i = 0
    for backend in backends:
        for gt in args.gammaT:
            payloads.append((gt, args.pulse, args.area * math.pi, backend,
                             args.tol, args.seed, args.n_traj, i))
            i += 1
    results = _map_grid(_distribution_row, payloads, args.jobs)
    header = ["gammaT", "P0", "P1", "P2", "P3", "pi1", "pi2", "pi3",
              "backend"]
    return _finish(args, "distribution", "distribution.csv", header, results)


# ---------------------------------------------------------------------------
# replay


def cmd_replay(args: argparse.Namespace) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    if manifest.get("tool") != "pulsedtls":
        print("replay: not a pulsedtls manifest", file=sys.stderr)
        return 2
    params = dict(manifest["params"])
    if args.out is not None:
        params["out"] = args.out
    ns = argparse.Namespace(**params)
    ns._t0 = time.monotonic()
    handler = _HANDLERS[manifest["subcommand"]]
    return handler(ns)


# ---------------------------------------------------------------------------
# shared finishers / parser


def _params_dict(args: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(args).items()
              if k != "func" and not k.startswith("_")}
    params["out"] = _out_path(args, _DEFAULT_STEMS[args.subcommand])
    return params


def _wall_clock(args: argparse.Namespace) -> float:
    return time.monotonic() - getattr(args, "_t0", time.monotonic())


_DEFAULT_STEMS = {
    "scan-width": "scan_width.csv",
    "scan-area": "scan_area.csv",
    "densities": "densities.csv",
    "g2grid": "g2grid.csv",
    "distribution": "distribution.csv",
}


def _finish(args, subcommand, stem, header, results) -> int:
    rows = [r for r, _, _ in results]
    errors = [e for _, e, _ in results]
    estimates = [est for _, _, est in results]
    base = _out_path(args, stem)
    _write_csv(base, header, rows)
    _write_manifest(base, subcommand, _params_dict(args), _wall_clock(args),
                    errors, estimates)
    failed = sum(e is not None for e in errors)
    print(f"{subcommand}: wrote {base}, {failed} failed rows",
          file=sys.stderr)
    return 0 if failed == 0 else 1


def _add_common(sub: argparse.ArgumentParser, *, area_grid: bool = False,
                default_area: str = "1", default_gamma_t: str = "0.001"):
    sub.add_argument("--pulse", default="square",
                     help="square | gaussian | tabulated:<path>")
    if area_grid:
        sub.add_argument("--area", type=_parse_area_grid, default=None,
                         help="pulse area in multiples of pi; "
                              "single value or min:max:count grid")
    else:
        sub.add_argument("--area", type=float, default=float(default_area),
                         help="pulse area in multiples of pi")
    sub.add_argument("--gammaT", type=_parse_gamma_t,
                     default=_parse_gamma_t(default_gamma_t),
                     help="pulse width gammaT; single value or "
                          "min:max:count:lin|log grid")
    sub.add_argument("--backend", choices=_BACKENDS, default="all")
    sub.add_argument("--seed", type=int, default=2024)
    sub.add_argument("--out", default=None,
                     help="output CSV path (default: $PULSEDTLS_OUTDIR)")
    sub.add_argument("--tol", type=float, default=1e-8,
                     help="relative quadrature tolerance")
    sub.add_argument("--jobs", type=int, default=1,
                     help="parallel worker processes for scan points")
    sub.add_argument("--n-traj", type=int, default=20000,
                     help="Monte Carlo trajectories per grid point")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsedtls",
        description="Pulsed photon-emission statistics of a driven "
                    "two-level system")
    parser.add_argument("--version", action="version",
                        version=f"pulsedtls {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sw = subs.add_parser("scan-width", help="P1/P2/g2 vs pulse width")
    _add_common(sw, default_gamma_t="0.01:10:40:log")
    sw.set_defaults(func=cmd_scan_width)

    sa = subs.add_parser("scan-area", help="photon statistics vs pulse area")
    _add_common(sa, area_grid=True, default_gamma_t="0.3")
    sa.set_defaults(func=cmd_scan_area)

    de = subs.add_parser("densities", help="emission-time densities")
    _add_common(de, default_area="2")
    de.add_argument("--points", type=int, default=201,
                    help="1-D grid resolution")
    de.add_argument("--points-2d", type=int, default=41,
                    help="2-D grid resolution per axis")
    de.set_defaults(func=cmd_densities)

    gg = subs.add_parser("g2grid", help="two-time second-order coherence")
    _add_common(gg, default_gamma_t="3.3")
    gg.add_argument("--points", type=int, default=64,
                    help="grid resolution per axis (max 256)")
    gg.add_argument("--tail", type=float, default=5.0,
                    help="post-pulse window in units of 1/gamma")
    gg.set_defaults(func=cmd_g2grid)

    di = subs.add_parser("distribution", help="photocount distribution")
    _add_common(di, default_area="2", default_gamma_t="0.01:2:15:log")
    di.set_defaults(func=cmd_distribution)

    rp = subs.add_parser("replay", help="re-run from a JSON manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=cmd_replay)

    return parser


_HANDLERS = {
    "scan-width": cmd_scan_width,
    "scan-area": cmd_scan_area,
    "densities": cmd_densities,
    "g2grid": cmd_g2grid,
    "distribution": cmd_distribution,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args._t0 = time.monotonic()
    if getattr(args, "subcommand", None) == "scan-area" and \
            getattr(args, "area", None) is None:
        args.area = _parse_area_grid("0:5:41")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
