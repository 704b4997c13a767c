"""Relaxation-time extraction, power-law threshold fits, and parameter sweeps.

tau(alpha, b) is the first step at which the msd drops below a threshold
(0.15 unless stated otherwise), reported in integer steps without
interpolation. The recovery threshold alpha* is located by fitting
tau ~ tau0 |alpha - alpha*|^{-z}: for each candidate alpha* the fit of
log tau against log(alpha - alpha*) is linear, so alpha* is found by a grid
scan on the residual sum of squares plus one golden-section refinement.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigurationError, DmftParams, NumericalFailure, Series, format_meta, parse_meta, series_from_csv, series_to_csv
from .integrator import integrate

DEFAULT_THRESHOLD = 0.15


@dataclass
class TauPoint:
    """Relaxation time of one (alpha, b) run; tau is None when the threshold is never reached."""

    alpha: float
    b: float
    tau: Optional[int]
    horizon: int
    threshold: float

    @property
    def reached(self) -> bool:
        return self.tau is not None


@dataclass
class PowerLawFit:
    """tau ~ tau0 |alpha - alpha*|^{-z}, fitted in log space."""

    tau0: float
    alpha_star: float
    z: float
    rss: float
    n_points: int


def relaxation_time(series: Series, threshold: float) -> TauPoint:
    """Smallest t with msd(t) strictly below threshold, or unreached."""
    if len(series) == 0:
        raise ConfigurationError("empty series")
    if not threshold > 0:
        raise ConfigurationError(f"threshold must be > 0, got {threshold}")
    below = series.delta < threshold
    tau = int(series.t[int(np.argmax(below))]) if below.any() else None
    meta = series.meta
    return TauPoint(
        alpha=float(meta.get("alpha", "nan")),
        b=float(meta.get("b", "nan")),
        tau=tau,
        horizon=int(series.t[-1]),
        threshold=threshold,
    )


def _log_rss(alpha_star: float, la: np.ndarray, lt: np.ndarray) -> tuple[float, float, float]:
    """OLS of log tau on log(alpha - alpha*); returns (rss, z, log_tau0)."""
    x = np.log(la - alpha_star)
    xm, ym = x.mean(), lt.mean()
    dx = x - xm
    denom = float(dx @ dx)
    slope = float(dx @ (lt - ym)) / denom
    intercept = ym - slope * xm
    resid = lt - (intercept + slope * x)
    return float(resid @ resid), -slope, intercept


def fit_power_law(points: list[TauPoint], grid: tuple[float, float, float]) -> PowerLawFit:
    """Grid scan over candidate alpha* plus golden-section refinement of the best cell."""
    grid_min, grid_max, grid_step = grid
    reached = [p for p in points if p.reached]
    dropped = len(points) - len(reached)
    if dropped:
        warnings.warn(f"excluding {dropped} unreached point(s) from the fit", stacklevel=2)
    alphas = np.array([p.alpha for p in reached])
    taus = np.array([float(p.tau) for p in reached])
    if len(set(alphas.tolist())) < 3:
        raise ConfigurationError("power-law fit needs >= 3 reached points at distinct alpha")
    if np.any(taus <= 0):
        # tau = 0 rows carry no log-space information
        keep = taus > 0
        alphas, taus = alphas[keep], taus[keep]
        if len(set(alphas.tolist())) < 3:
            raise ConfigurationError("power-law fit needs >= 3 reached points with tau > 0")
    a_min = float(alphas.min())
    if not grid_max < a_min:
        raise ConfigurationError(f"candidate grid must lie entirely below min(alpha)={a_min}")
    if not (grid_step > 0 and grid_min < grid_max):
        raise ConfigurationError("need grid_min < grid_max and grid_step > 0")

    lt = np.log(taus)
    candidates = np.arange(grid_min, grid_max + 0.5 * grid_step, grid_step)
    rss = np.array([_log_rss(c, alphas, lt)[0] for c in candidates])
    best = int(np.argmin(rss))

    lo = max(grid_min, candidates[best] - grid_step)
    hi = min(grid_max, candidates[best] + grid_step)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1 = _log_rss(x1, alphas, lt)[0]
    f2 = _log_rss(x2, alphas, lt)[0]
    while hi - lo > 1e-12:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = _log_rss(x1, alphas, lt)[0]
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = _log_rss(x2, alphas, lt)[0]
    alpha_star = 0.5 * (lo + hi)
    rss_best, z, log_tau0 = _log_rss(alpha_star, alphas, lt)
    return PowerLawFit(tau0=math.exp(log_tau0), alpha_star=alpha_star, z=z, rss=rss_best, n_points=len(alphas))


# ---------------------------------------------------------------------------
# sweeps

SWEEP_DEFAULTS = {
    "eta": 0.1,
    "m0": 1e-4,
    "c0": 1.0,
    "tmax": 1000,
    "samples": 1000,
    "seed": 0,
    "omega2_form": "corrected",
    "kernel_scaling": "effective",
    "threshold": DEFAULT_THRESHOLD,
    "stop_at_threshold": True,
}


def sweep_points(config: dict) -> list[tuple[float, float]]:
    if "points" in config:
        return [(float(a), float(b)) for a, b in config["points"]]
    if "alphas" in config and "bs" in config:
        return [(float(a), float(b)) for b in config["bs"] for a in config["alphas"]]
    raise ConfigurationError("sweep config needs 'points' or both 'alphas' and 'bs'")


def point_filename(alpha: float, b: float) -> str:
    return f"alpha{alpha:g}_b{b:g}.csv"


def _sweep_one(args) -> dict:
    alpha, b, cfg, out_dir, force = args
    path = os.path.join(out_dir, point_filename(alpha, b))
    threshold = float(cfg["threshold"])
    if os.path.exists(path) and not force:
        series = series_from_csv(path)
        status = "cached"
    else:
        params = DmftParams(
            alpha=alpha, b=b, eta=float(cfg["eta"]), m0=float(cfg["m0"]), c0=float(cfg["c0"]),
            t_max=int(cfg["tmax"]), n_samples=int(cfg["samples"]), seed=int(cfg["seed"]),
            omega2_form=cfg["omega2_form"], kernel_scaling=cfg["kernel_scaling"],
        )
        try:
            series = integrate(params, stop_threshold=threshold if cfg["stop_at_threshold"] else None)
        except NumericalFailure as err:
            return {
                "alpha": alpha, "b": b, "tau": "", "reached": 0,
                "horizon": int(cfg["tmax"]), "threshold": threshold, "status": f"failed_step_{err.step}",
            }
        series_to_csv(series, path)
        status = "computed"
    tp = relaxation_time(series, threshold)
    return {
        "alpha": alpha, "b": b, "tau": tp.tau if tp.reached else "",
        "reached": int(tp.reached), "horizon": tp.horizon, "threshold": threshold, "status": status,
    }


def run_sweep(config: dict, out_dir: str, parallel: int = 1, force: bool = False) -> list[dict]:
    """Integrate every (alpha, b) grid point, write per-point CSVs and a summary table.

    Completed points are skipped (their series re-read) unless force is set;
    per-point numerical failures are recorded in the summary, not fatal.
    """
    cfg = dict(SWEEP_DEFAULTS)
    cfg.update(config)
    points = sweep_points(cfg)
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(a, b, cfg, out_dir, force) for a, b in points]
    if parallel <= 1 or len(jobs) == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    write_summary(rows, os.path.join(out_dir, "summary.csv"), cfg)
    return rows


SUMMARY_COLS = ("alpha", "b", "tau", "reached", "horizon", "threshold", "status")


def write_summary(rows: list[dict], path: str, cfg: dict) -> None:
    meta = {k: cfg[k] for k in ("eta", "m0", "c0", "tmax", "samples", "seed", "omega2_form", "kernel_scaling", "threshold")}
    with open(path, "w") as fh:
        fh.write(format_meta(meta) + "\n")
        fh.write(",".join(SUMMARY_COLS) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) for c in SUMMARY_COLS) + "\n")


def read_tau_table(path: str) -> list[TauPoint]:
    """Parse a sweep summary (or any CSV with alpha,b,tau,reached,horizon,threshold columns)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].startswith("#"):
        parse_meta(lines[0])
        lines = lines[1:]
    header = lines[0].split(",")
    idx = {c: i for i, c in enumerate(header)}
    points = []
    for ln in lines[1:]:
        parts = ln.split(",")
        reached = bool(int(parts[idx["reached"]])) if "reached" in idx else bool(parts[idx["tau"]])
        points.append(
            TauPoint(
                alpha=float(parts[idx["alpha"]]),
                b=float(parts[idx["b"]]) if "b" in idx else float("nan"),
                tau=int(parts[idx["tau"]]) if reached and parts[idx["tau"]] != "" else None,
                horizon=int(parts[idx["horizon"]]) if "horizon" in idx else -1,
                threshold=float(parts[idx["threshold"]]) if "threshold" in idx else DEFAULT_THRESHOLD,
            )
        )
    return points
