"""Causal step-by-step integration of the mean-field recursions for m, C, R.

One step t -> t+1: compute the kernel rows lambda_C(t,.), lambda_R(t,.), form
F(t,s) = lambda_R(t,s) C(t,s) + lambda_C(t,s) R(t,s), then

  m(t+1)      = m(t) - eta^2 a [ sum_s F(t,s) m(s) - m(t) sum_s lambda_R(t,s) ]
  C(t+1,t')   = C(t,t') + eta Omega1(t,t')
  R(t+1,t')   = delta_{t,t'} + R(t,t') - eta^2 a sum_{s>t'} F(t,s) R(s,t')
  C(t+1,t+1)  = C(t,t) + 2 eta Omega1(t,t) + eta^2 Omega2(t)

with Omega1 the drive/memory bracket and Omega2 the diagonal variance term.
The Omega2 quadratic form is the symmetric F C F one; its squared-drive term
carries the m(t) factor under the default 'corrected' form and drops it under
'literal'.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    C_DIVERGENCE_LIMIT,
    EPS_MONITOR,
    DmftParams,
    DmftState,
    NumericalFailure,
    PhysicalMonitorWarning,
    Series,
    init_state,
    msd,
)
from .kernels import KernelWorkspace, lambda_row
from .selection import SelectionEnsemble, sample_trajectories


@dataclass
class IncrementTerms:
    """Per-step combination terms; recomputed fresh each step, never cached."""

    t: int
    f_row: np.ndarray
    lr_sum: float
    omega1_row: np.ndarray
    omega2: float


def _increments(t, ws, lam_c_row, lam_r_row, p: DmftParams):
    """All step-t combination terms from the workspace and the kernel rows."""
    n = t + 1
    c_t = ws.cf[t, :n]
    r_t = ws.rl[t, :n]
    f_row = lam_r_row * c_t + lam_c_row * r_t
    u_row = lam_c_row * c_t
    lr_sum = float(lam_r_row.sum())
    m_t = float(ws.m[t])
    ae = p.alpha * p.eta

    term2 = ws.rl[:n, :n] @ u_row      # sum_{s<t'} lambda_C(t,s) C(t,s) R(t',s)
    term3 = ws.cf[:n, :n] @ f_row      # sum_s F(t,s) C(t',s)
    omega1_row = ae * (m_t * lr_sum * ws.m[:n] - term2 - term3)

    a2e2 = ae * ae
    q1 = a2e2 * float(f_row @ term3)
    q2 = -2.0 * a2e2 * m_t * lr_sum * float(f_row @ ws.m[:n])
    q3 = 2.0 * a2e2 * float(f_row @ term2)
    q4 = -p.alpha * float(u_row[t])
    drive = ae * lr_sum * (m_t if p.omega2_form == "corrected" else 1.0)
    omega2 = q1 + q2 + q3 + q4 + drive * drive
    return f_row, lr_sum, omega1_row, omega2


def build_increment_terms(t: int, ws: KernelWorkspace, lam_c_row, lam_r_row, params: DmftParams) -> IncrementTerms:
    f_row, lr_sum, omega1_row, omega2 = _increments(t, ws, np.asarray(lam_c_row), np.asarray(lam_r_row), params)
    return IncrementTerms(t=t, f_row=f_row, lr_sum=lr_sum, omega1_row=omega1_row, omega2=omega2)


def omega_one(t: int, t_prime: int, state: DmftState, terms: IncrementTerms) -> float:
    """Off-diagonal increment Omega1(t,t'); requires kernel rows set on the state."""
    if not 0 <= t_prime <= t:
        raise IndexError(f"need 0 <= t' <= t, got t'={t_prime}, t={t}")
    ws = KernelWorkspace.from_state(state, through=t)
    _, _, row, _ = _increments(t, ws, state.lambda_c.row(t), state.lambda_r.row(t), state.params)
    return float(row[t_prime])


def omega_two(t: int, state: DmftState, terms: IncrementTerms) -> float:
    """Diagonal variance increment Omega2(t); requires kernel rows set on the state."""
    ws = KernelWorkspace.from_state(state, through=t)
    _, _, _, val = _increments(t, ws, state.lambda_c.row(t), state.lambda_r.row(t), state.params)
    return float(val)


def _monitor(t: int, m_t: float, c_tt: float) -> None:
    d = msd(m_t, c_tt)
    if d < -EPS_MONITOR:
        warnings.warn(f"msd(t={t}) = {d} below -{EPS_MONITOR}", PhysicalMonitorWarning, stacklevel=3)
    if m_t * m_t > c_tt + EPS_MONITOR:
        warnings.warn(f"m(t)^2 > C(t,t) + {EPS_MONITOR} at t={t}", PhysicalMonitorWarning, stacklevel=3)


def step_with_kernels(state: DmftState, lam_c_row, lam_r_row, workspace: Optional[KernelWorkspace] = None) -> DmftState:
    """Advance one step using externally supplied kernel rows for step t.

    This is the deterministic tail of `dmft_step`; it also lets tests drive the
    recursion with expectation-exact kernels.
    """
    p = state.params
    t = state.t
    if t >= p.t_max:
        raise IndexError(f"state already at horizon t_max={p.t_max}")
    lam_c_row = np.asarray(lam_c_row, dtype=float)
    lam_r_row = np.asarray(lam_r_row, dtype=float)
    ws = workspace if workspace is not None else KernelWorkspace.from_state(state)
    if ws.filled != t:
        raise IndexError(f"workspace filled through {ws.filled}, state at {t}")

    state.lambda_c.set_row(t, lam_c_row)
    state.lambda_r.set_row(t, lam_r_row)
    f_row, lr_sum, omega1_row, omega2 = _increments(t, ws, lam_c_row, lam_r_row, p)

    n = t + 1
    eta2a = p.eta * p.eta * p.alpha
    m_next = float(ws.m[t]) - eta2a * (float(f_row @ ws.m[:n]) - float(ws.m[t]) * lr_sum)

    c_next = np.empty(t + 2)
    c_next[:n] = ws.cf[t, :n] + p.eta * omega1_row
    c_next[t + 1] = ws.cf[t, t] + 2.0 * p.eta * omega1_row[t] + p.eta * p.eta * omega2

    # the R line keeps its inertia term R(t,t'), like the m and C lines; the
    # response to a kick decays slowly from 1 rather than collapsing to O(eta^2)
    r_next = np.empty(t + 2)
    r_next[:n] = ws.rl[t, :n] - eta2a * (f_row @ ws.rl[:n, :n])
    r_next[t] += 1.0
    r_next[t + 1] = 0.0

    c_tt = c_next[t + 1]
    if not (np.isfinite(m_next) and np.all(np.isfinite(c_next)) and np.all(np.isfinite(r_next))):
        raise NumericalFailure("NaN/Inf in integrator update", step=t + 1)
    if not c_tt > 0:
        raise NumericalFailure(f"C(t,t) = {c_tt} non-positive", step=t + 1)
    if c_tt > C_DIVERGENCE_LIMIT:
        raise NumericalFailure(f"C(t,t) = {c_tt} diverged past {C_DIVERGENCE_LIMIT}", step=t + 1)

    state.c.set_row(t + 1, c_next)
    state.r.set_row(t + 1, r_next)
    state.m[t + 1] = m_next
    state.t = t + 1
    if workspace is not None:
        ws.ingest_row(t + 1, m_next, c_next, r_next)
    _monitor(t + 1, m_next, c_tt)
    return state


def dmft_step(
    state: DmftState,
    ensemble: Optional[SelectionEnsemble],
    workspace: Optional[KernelWorkspace] = None,
) -> DmftState:
    """Advance the state one step: kernel rows, increment terms, row updates."""
    ws = workspace if workspace is not None else KernelWorkspace.from_state(state)
    pair = lambda_row(state.t, state, ensemble, ws)
    return step_with_kernels(state, pair.lambda_c_row, pair.lambda_r_row, ws)


def integrate(
    params: DmftParams,
    stop_threshold: Optional[float] = None,
    return_state: bool = False,
):
    """Run the full integration to t_max (or early stop on msd < stop_threshold).

    Deterministic for fixed params; for b=1 the selection is deterministic and
    the output does not depend on n_samples or seed. Numerical failures
    propagate as NumericalFailure with the offending step index.
    """
    state = init_state(params)
    workspace = KernelWorkspace.from_state(state)
    ensemble = None
    if params.b < 1.0:
        ensemble = sample_trajectories(params.b, params.t_max, params.n_samples, params.seed)
    while state.t < params.t_max:
        dmft_step(state, ensemble, workspace)
        if stop_threshold is not None and state.delta() < stop_threshold:
            break
    n = state.t + 1
    series = Series.from_m_c(
        state.m[:n],
        np.array([state.c.get(s, s) for s in range(n)]),
        meta={
            "alpha": params.alpha,
            "b": params.b,
            "eta": params.eta,
            "m0": params.m0,
            "c0": params.c0,
            "t_max": params.t_max,
            "n_samples": params.n_samples,
            "seed": params.seed,
            "omega2_form": params.omega2_form,
            "kernel_scaling": params.kernel_scaling,
        },
    )
    if return_state:
        return series, state
    return series
