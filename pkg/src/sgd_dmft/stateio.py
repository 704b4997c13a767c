"""CSV/JSON persistence of integrator states and two-time grids."""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from . import __version__
from .core import DmftParams, DmftState, TwoTimeGrid, format_meta, parse_meta

GRID_NAMES = ("C", "R", "lambda_c", "lambda_r")


def dump_two_time(grid: TwoTimeGrid, path, extra_meta: dict | None = None) -> None:
    """Write the finalized triangle as rows t,tp,value (17 significant digits)."""
    meta = {"t_max": grid.t_max, "filled": grid.filled, "version": __version__}
    meta.update(extra_meta or {})
    with open(path, "w") as fh:
        fh.write(format_meta(meta) + "\n")
        fh.write("t,tp,value\n")
        for t in range(grid.filled + 1):
            row = grid.row(t)
            for tp in range(t + 1):
                fh.write(f"{t},{tp},{row[tp]:.17g}\n")


def load_two_time(path) -> TwoTimeGrid:
    with open(path) as fh:
        meta = parse_meta(fh.readline())
        fh.readline()  # header
        grid = TwoTimeGrid(int(meta["t_max"]))
        row: list[float] = []
        cur = 0
        for line in fh:
            if not line.strip():
                continue
            t_s, tp_s, v_s = line.split(",")
            t = int(t_s)
            if t != cur:
                grid.set_row(cur, row)
                cur, row = t, []
            row.append(float(v_s))
        if row:
            grid.set_row(cur, row)
    return grid


def dump_state(state: DmftState, prefix: str) -> None:
    """Write PREFIX_meta.json, PREFIX_m.csv and the four two-time grids."""
    with open(f"{prefix}_meta.json", "w") as fh:
        json.dump({"params": dataclasses.asdict(state.params), "t": state.t, "version": __version__}, fh, indent=1)
    with open(f"{prefix}_m.csv", "w") as fh:
        fh.write(format_meta({"t": state.t, "version": __version__}) + "\n")
        fh.write("t,m\n")
        for t in range(state.t + 1):
            fh.write(f"{t},{state.m[t]:.17g}\n")
    for name, grid in zip(GRID_NAMES, (state.c, state.r, state.lambda_c, state.lambda_r)):
        dump_two_time(grid, f"{prefix}_{name}.csv")


def load_state(prefix: str) -> DmftState:
    with open(f"{prefix}_meta.json") as fh:
        meta = json.load(fh)
    params = DmftParams(**meta["params"])
    m = np.zeros(params.t_max + 1)
    with open(f"{prefix}_m.csv") as fh:
        fh.readline()
        fh.readline()
        for line in fh:
            if line.strip():
                t_s, v_s = line.split(",")
                m[int(t_s)] = float(v_s)
    grids = [load_two_time(f"{prefix}_{name}.csv") for name in GRID_NAMES]
    return DmftState(params=params, m=m, c=grids[0], r=grids[1], lambda_c=grids[2], lambda_r=grids[3], t=int(meta["t"]))
