"""Self-consistent single-variable process used to validate the integrator.

The scalar recursion

  w(t+1) = w(t) - a eta^2 sum_{s<=t} F(t,s) w(s) + a eta^2 m(t) sum_{s<=t} lambda_R(t,s) + xi(t)

driven by centered Gaussian noise with <xi(t) xi(s)> = -a eta^2 lambda_C(t,s) C(t,s)
reproduces the integrator's m(t) and C(t,t) in its first and second moments
(the eta^2 normalization of the noise is the one consistent with the C and m
recursions). Monte-Carlo noise in the kernel rows can leave the assembled
covariance slightly indefinite; negative eigenvalues are clipped at zero, the
minimal spectral-norm repair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import DmftState

CLIP_TRACE_WARN_FRACTION = 0.01


class CovarianceClipWarning(UserWarning):
    """More than the tolerated trace fraction was removed to restore PSD."""


def project_psd(mat: np.ndarray) -> tuple[np.ndarray, int]:
    """Nearest-PSD projection by clipping negative eigenvalues at zero."""
    vals, vecs = np.linalg.eigh(mat)
    clipped = int(np.sum(vals < 0.0))
    if clipped == 0:
        return mat, 0
    removed = -float(vals[vals < 0.0].sum())
    total = float(np.abs(vals).sum())
    if total > 0 and removed > CLIP_TRACE_WARN_FRACTION * total:
        warnings.warn(
            f"PSD projection removed {removed:.3e} of trace ({removed / total:.2%})",
            CovarianceClipWarning,
            stacklevel=2,
        )
    fixed = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return 0.5 * (fixed + fixed.T), clipped


@dataclass
class NoiseCovariance:
    """PSD-projected covariance of the process noise over a time window."""

    t_len: int
    cov: np.ndarray
    clipped: int

    def factor(self) -> np.ndarray:
        """Symmetric factor L with L L^T = cov (eigen square root)."""
        vals, vecs = np.linalg.eigh(self.cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def noise_covariance(state: DmftState, t_len: int) -> NoiseCovariance:
    """Covariance -a eta^2 lambda_C(t,s) C(t,s) on steps 0..t_len-1, symmetrized and projected."""
    p = state.params
    if state.lambda_c.filled < t_len - 1:
        raise IndexError(f"kernel rows filled through {state.lambda_c.filled}, need {t_len - 1}")
    raw = np.zeros((t_len, t_len))
    for t in range(t_len):
        row = state.lambda_c.row(t)[:t_len] * state.c.row(t)[:t_len]
        raw[t, : min(t + 1, t_len)] = row
        raw[: min(t + 1, t_len), t] = row
    cov = -p.alpha * p.eta * p.eta * raw
    cov, clipped = project_psd(cov)
    return NoiseCovariance(t_len=t_len, cov=cov, clipped=clipped)


def simulate_effective(
    state: DmftState, t_len: int, n_real: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate n_real realizations over steps 0..t_len; return mean and second moments.

    w(0) is Gaussian with mean m0 and variance C(0,0) - m0^2, the choice
    matching <w(0)> = m(0) and <w(0)^2> = C(0,0).
    """
    p = state.params
    if state.t < t_len:
        raise IndexError(f"state integrated through {state.t}, need {t_len}")
    ae2 = p.alpha * p.eta * p.eta

    f = np.zeros((t_len, t_len))
    drive = np.zeros(t_len)
    for t in range(t_len):
        lam_r = state.lambda_r.row(t)
        lam_c = state.lambda_c.row(t)
        f[t, : t + 1] = lam_r * state.c.row(t) + lam_c * state.r.row(t)
        drive[t] = ae2 * state.m[t] * lam_r.sum()

    ncov = noise_covariance(state, t_len)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    xi = rng.standard_normal((n_real, t_len)) @ ncov.factor().T

    w = np.empty((n_real, t_len + 1))
    w[:, 0] = p.m0 + np.sqrt(max(p.c0 - p.m0 * p.m0, 0.0)) * rng.standard_normal(n_real)
    for t in range(t_len):
        w[:, t + 1] = w[:, t] - ae2 * (w[:, : t + 1] @ f[t, : t + 1]) + drive[t] + xi[:, t]

    mean_traj = w.mean(axis=0)
    second_moment = (w.T @ w) / n_real
    return mean_traj, second_moment
