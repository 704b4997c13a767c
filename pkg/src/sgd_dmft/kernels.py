"""Per-step memory-kernel rows from selection-conditioned triangular systems.

At each step t the two self-energy rows lambda_C(t,.), lambda_R(t,.) are
Monte-Carlo averages, over selection trajectories sigma, of solutions of a
2(t+1) x 2(t+1) block system. The block structure makes the solve direct:

  stage 1 (response rows): A x_R = e_t / eta with
      A(t',s) = delta + (eta/b) C(s,t') R(s,t') sig,   sig = sigma(t') [side R]
                                                       or sigma(s)   [side L];
      R(s,t') != 0 only for s > t', so A has unit diagonal and is solved by
      back-substitution descending from t' = t (x_R(t) = 1/eta always).
  stage 2 (correlation rows): B x_C = -K x_R with
      B(t',s) = delta + (eta/b) C(s,t') R(t',s) sig  (unit diagonal, lower),
      K(t',s) = (eta/2b) [1 - m(t')^2 - m(s)^2 + C(t',s)^2] sig;
      forward substitution ascending from t' = 0.

No pivoting is ever needed: the diagonals are exactly 1. All trajectories are
solved together, vectorized over the ensemble axis; the reduction over
trajectories is a fixed-order mean, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DmftState
from .selection import SelectionEnsemble


@dataclass
class KernelRowPair:
    """Kernel rows at step t averaged over n_used selection trajectories."""

    t: int
    lambda_c_row: np.ndarray
    lambda_r_row: np.ndarray
    n_used: int


class KernelWorkspace:
    """Dense scratch mirrors of the finalized m, C, R rows used by the solves.

    cf is the symmetric completion of C, csq its elementwise square, rl the
    strict-lower response, and gf/gc hold C(s,t')*R(s,t') in column-fast and
    row-fast order for the two substitution directions. Rows are ingested in
    causal order; no solve output depends on scratch beyond the filled rows.
    """

    def __init__(self, t_max: int):
        n = t_max + 1
        self.t_max = t_max
        self.filled = -1
        self.m = np.zeros(n)
        self.cf = np.zeros((n, n))
        self.csq = np.zeros((n, n))
        self.rl = np.zeros((n, n))
        self.gf = np.zeros((n, n), order="F")
        self.gc = np.zeros((n, n))

    def ingest_row(self, t: int, m_t: float, c_row, r_row) -> None:
        if t != self.filled + 1:
            raise IndexError(f"workspace rows ingest in order; next is {self.filled + 1}, got {t}")
        c_row = np.asarray(c_row, dtype=float)
        r_row = np.asarray(r_row, dtype=float)
        self.m[t] = m_t
        self.cf[t, : t + 1] = c_row
        self.cf[: t + 1, t] = c_row
        self.csq[t, : t + 1] = c_row * c_row
        self.csq[: t + 1, t] = self.csq[t, : t + 1]
        self.rl[t, :t] = r_row[:t]
        g = c_row[:t] * r_row[:t]
        self.gf[t, :t] = g
        self.gc[t, :t] = g
        self.filled = t

    @classmethod
    def from_state(cls, state: DmftState, through: Optional[int] = None) -> "KernelWorkspace":
        through = state.t if through is None else through
        ws = cls(state.params.t_max)
        for s in range(through + 1):
            ws.ingest_row(s, float(state.m[s]), state.c.row(s), state.r.row(s))
        return ws


def _solve_batch(side: str, t: int, ws: KernelWorkspace, sig: np.ndarray, b: float, eta: float):
    """Solve both stages for every trajectory at once; sig is (n_traj, t+1) of 0/1.

    Returns (x_c, x_r), each (n_traj, t+1). Side 'R' attaches sigma to the row
    index t', side 'L' to the summed index s.
    """
    if side not in ("R", "L"):
        raise ValueError(f"side must be 'R' or 'L', got {side!r}")
    if ws.filled < t:
        raise IndexError(f"workspace filled through {ws.filled}, need {t}")
    n = t + 1
    ntraj = sig.shape[0]
    coef = eta / b
    gf = ws.gf[:n, :n]
    gc = ws.gc[:n, :n]
    msq = ws.m[:n] ** 2

    x_r = np.zeros((ntraj, n))
    x_r[:, t] = 1.0 / eta
    if side == "R":
        for tp in range(t - 1, -1, -1):
            x_r[:, tp] = -coef * sig[:, tp] * (x_r[:, tp + 1 :] @ gf[tp + 1 : n, tp])
        z_r = x_r
        row_scale = sig
    else:
        z = np.empty_like(x_r)
        z[:, t] = sig[:, t] * x_r[:, t]
        for tp in range(t - 1, -1, -1):
            x_r[:, tp] = -coef * (z[:, tp + 1 :] @ gf[tp + 1 : n, tp])
            z[:, tp] = sig[:, tp] * x_r[:, tp]
        z_r = z
        row_scale = 1.0

    # rhs of stage 2: -(eta/2b) sig_hat * sum_s [1 - m(t')^2 - m(s)^2 + C(t',s)^2] z(s)
    core = z_r @ ws.csq[:n, :n]
    s0 = z_r.sum(axis=1)
    s1 = z_r @ msq
    rh = (-0.5 * coef) * row_scale * (core + s0[:, None] * (1.0 - msq)[None, :] - s1[:, None])

    x_c = np.zeros((ntraj, n))
    x_c[:, 0] = rh[:, 0]
    if side == "R":
        for tp in range(1, n):
            x_c[:, tp] = rh[:, tp] - coef * sig[:, tp] * (x_c[:, :tp] @ gc[tp, :tp])
    else:
        zc = np.empty_like(x_c)
        zc[:, 0] = sig[:, 0] * x_c[:, 0]
        for tp in range(1, n):
            x_c[:, tp] = rh[:, tp] - coef * (zc[:, :tp] @ gc[tp, :tp])
            zc[:, tp] = sig[:, tp] * x_c[:, tp]
    return x_c, x_r


def solve_kernel_system(side: str, t: int, state: DmftState, sigma) -> tuple[np.ndarray, np.ndarray]:
    """Single-trajectory solve of the side-R or side-L system at step t.

    sigma is a 0/1 trajectory covering steps 0..t. Returns (c_a_row, r_a_row).
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[0] < t + 1:
        raise ValueError(f"sigma must cover steps 0..{t}, got length {sigma.shape[0]}")
    ws = KernelWorkspace.from_state(state, through=t)
    x_c, x_r = _solve_batch(side, t, ws, sigma[None, : t + 1], state.params.b, state.params.eta)
    return x_c[0], x_r[0]


def lambda_row(
    t: int,
    state: DmftState,
    ensemble: Optional[SelectionEnsemble],
    workspace: Optional[KernelWorkspace] = None,
) -> KernelRowPair:
    """Monte-Carlo kernel rows lambda_C(t, 0..t), lambda_R(t, 0..t).

    Per trajectory n the side-R and side-L systems are solved and combined as
      lambda_C(t,t') = mean_n (1/2) [c_r_n(t,t') w_n(t) + c_l_n(t,t') w_n(t')]
    (same for lambda_R with the response rows), with weight w = sigma/b under
    'effective' kernel scaling and w = sigma under 'literal'. For b=1 the
    selection is deterministic, both sides coincide, and one solve suffices.
    """
    p = state.params
    ws = workspace if workspace is not None else KernelWorkspace.from_state(state, through=t)
    if p.b == 1.0:
        sig = np.ones((1, t + 1))
        x_c, x_r = _solve_batch("R", t, ws, sig, p.b, p.eta)
        return KernelRowPair(t=t, lambda_c_row=x_c[0].copy(), lambda_r_row=x_r[0].copy(), n_used=1)

    if ensemble is None:
        raise ValueError("b < 1 requires a selection ensemble")
    sig = ensemble.window(t)
    xc_r, xr_r = _solve_batch("R", t, ws, sig, p.b, p.eta)
    xc_l, xr_l = _solve_batch("L", t, ws, sig, p.b, p.eta)
    w = sig / p.b if p.kernel_scaling == "effective" else sig
    w_t = w[:, t][:, None]
    lam_c = 0.5 * (w_t * xc_r + w * xc_l).mean(axis=0)
    lam_r = 0.5 * (w_t * xr_r + w * xr_l).mean(axis=0)
    return KernelRowPair(t=t, lambda_c_row=lam_c, lambda_r_row=lam_r, n_used=sig.shape[0])
