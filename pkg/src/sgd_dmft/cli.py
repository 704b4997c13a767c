"""Command-line surface: dmft, simulate, tau, fit, validate-effective, sweep.

Exit codes: 0 success, 2 configuration error, 3 numerical failure. Every
output file starts with a '#' metadata line carrying the full parameters,
seed, and code version.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_THRESHOLD,
    fit_power_law,
    read_tau_table,
    relaxation_time,
    run_sweep,
)
from .core import ConfigurationError, DmftParams, NumericalFailure, format_meta, series_from_csv, series_to_csv
from .effective import simulate_effective
from .finiten import SimParams, aggregate_series, run_reps
from .integrator import integrate
from .stateio import dump_state, load_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgd-dmft", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dmft", help="integrate the mean-field equations for one (alpha, b)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--m0", type=float, default=1e-4)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--omega2-form", choices=("corrected", "literal"), default="corrected")
    p.add_argument("--kernel-scaling", choices=("effective", "literal"), default="effective")
    p.add_argument("--stop-threshold", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-two-time", metavar="PREFIX", default=None)

    p = sub.add_parser("simulate", help="finite-N simulation, repetitions aggregated")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--m0", type=float, default=0.1)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--j-mode", choices=("stored", "regen"), default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("tau", help="relaxation time of a series file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)

    p = sub.add_parser("fit", help="power-law fit of a tau table")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--grid-min", type=float, required=True)
    p.add_argument("--grid-max", type=float, required=True)
    p.add_argument("--grid-step", type=float, required=True)

    p = sub.add_parser("validate-effective", help="moment check of the effective process against a dumped state")
    p.add_argument("--state", metavar="PREFIX", required=True)
    p.add_argument("--tlen", type=int, required=True)
    p.add_argument("--nreal", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run an (alpha, b) grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--force", action="store_true")
    return ap


def _cmd_dmft(args) -> int:
    params = DmftParams(
        alpha=args.alpha, b=args.b, eta=args.eta, m0=args.m0, c0=args.c0,
        t_max=args.tmax, n_samples=args.samples, seed=args.seed,
        omega2_form=args.omega2_form, kernel_scaling=args.kernel_scaling,
    )
    series, state = integrate(params, stop_threshold=args.stop_threshold, return_state=True)
    series.meta["version"] = __version__
    series_to_csv(series, args.out)
    if args.dump_two_time:
        dump_state(state, args.dump_two_time)
    print(f"wrote {args.out} ({len(series)} rows, final msd {series.delta[-1]:.6g})")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    p = SimParams(
        n=args.n, alpha=args.alpha, b=args.b, eta=args.eta, m0=args.m0,
        t_max=args.tmax, seed=args.seed, reps=args.reps, j_mode=args.j_mode,
    )
    runs = run_reps(p)
    base = args.out[:-4] if args.out.endswith(".csv") else args.out
    for i, series in enumerate(runs):
        series.meta["version"] = __version__
        series.meta["rep"] = i
        series_to_csv(series, f"{base}_rep{i}.csv")
    agg = aggregate_series(runs)
    meta = dict(runs[0].meta)
    meta.update({"reps": len(runs), "version": __version__})
    with open(args.out, "w") as fh:
        fh.write(format_meta(meta) + "\n")
        fh.write("t,m_mean,m_se,delta_mean,delta_se,c_mean,c_se\n")
        for i in range(len(agg["t"])):
            fh.write(
                f"{agg['t'][i]:d},{agg['m_mean'][i]:.17g},{agg['m_se'][i]:.17g},"
                f"{agg['delta_mean'][i]:.17g},{agg['delta_se'][i]:.17g},"
                f"{agg['c_mean'][i]:.17g},{agg['c_se'][i]:.17g}\n"
            )
    print(f"wrote {args.out} and {len(runs)} per-rep files")
    return EXIT_OK


def _cmd_tau(args) -> int:
    series = series_from_csv(args.infile)
    tp = relaxation_time(series, args.threshold)
    tau_str = str(tp.tau) if tp.reached else "unreached"
    print(f"alpha={tp.alpha:g} b={tp.b:g} threshold={tp.threshold:g} horizon={tp.horizon} tau={tau_str}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    points = read_tau_table(args.infile)
    fit = fit_power_law(points, (args.grid_min, args.grid_max, args.grid_step))
    print(
        f"alpha_star={fit.alpha_star:.6g} z={fit.z:.6g} tau0={fit.tau0:.6g} "
        f"rss={fit.rss:.6g} n_points={fit.n_points}"
    )
    return EXIT_OK


def _cmd_validate_effective(args) -> int:
    state = load_state(args.state)
    t_len, n_real = args.tlen, args.nreal
    mean_emp, second = simulate_effective(state, t_len, n_real, args.seed)
    var = np.clip(np.diag(second) - mean_emp**2, 0.0, None)
    m_se = np.sqrt(var / n_real)
    # the process is exactly Gaussian, so Var(w^2) = 2 var^2 + 4 mean^2 var
    c_se = np.sqrt((2.0 * var**2 + 4.0 * mean_emp**2 * var) / n_real)
    m_dmft = state.m[: t_len + 1]
    c_dmft = np.array([state.c.get(t, t) for t in range(t_len + 1)])
    with open(args.out, "w") as fh:
        fh.write(format_meta({"state": args.state, "tlen": t_len, "nreal": n_real, "seed": args.seed, "version": __version__}) + "\n")
        fh.write("t,m_dmft,m_emp,m_stderr,c_dmft,c_emp,c_stderr\n")
        for t in range(t_len + 1):
            fh.write(
                f"{t},{m_dmft[t]:.17g},{mean_emp[t]:.17g},{m_se[t]:.17g},"
                f"{c_dmft[t]:.17g},{second[t, t]:.17g},{c_se[t]:.17g}\n"
            )
    zm = np.abs(mean_emp - m_dmft) / np.where(m_se > 0, m_se, np.inf)
    zc = np.abs(np.diag(second) - c_dmft) / np.where(c_se > 0, c_se, np.inf)
    print(f"wrote {args.out}; max |z| first moment {zm.max():.3g}, second moment {zc.max():.3g}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    rows = run_sweep(config, args.out_dir, parallel=args.parallel, force=args.force)
    done = sum(1 for r in rows if not str(r["status"]).startswith("failed"))
    print(f"wrote {args.out_dir}/summary.csv ({done}/{len(rows)} points ok)")
    return EXIT_OK


_COMMANDS = {
    "dmft": _cmd_dmft,
    "simulate": _cmd_simulate,
    "tau": _cmd_tau,
    "fit": _cmd_fit,
    "validate-effective": _cmd_validate_effective,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
