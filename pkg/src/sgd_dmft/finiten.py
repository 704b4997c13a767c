"""Direct finite-N simulation of the planted quadratic-measurement model.

Ground truth for the mean-field integrator: sample a signal w* on the sphere
|w*|^2 = N, M = round(alpha N) symmetric Gaussian measurement matrices with
zero diagonal, labels y_mu = (1/N) sum_{i<j} J^mu_ij w*_i w*_j, then run

  w(t+1) = w(t) + (eta / (b N)) sum_mu sigma_mu(t) (y_mu - h_mu(w)) (J^mu w)

recording m(t), C(t,t), msd and the loss. Measurement matrices are either
materialized ("stored", float64 below a size cutoff, float32 above) or
regenerated on the fly per mu from counter-based substreams ("regen", the
default above N=200). Both modes stream over fixed-size mu-chunks with
identical arithmetic, so trajectories are bit-identical across modes at equal
dtype; everything downstream of the matvec accumulates in float64.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .core import ConfigurationError, NumericalFailure, Series
from .selection import sample_trajectories

# stream tags for seed derivation (distinct from selection.TRAJECTORY_STREAM)
SIGNAL_STREAM = 0xA11CE
J_STREAM = 0xBEEF
INIT_STREAM = 0xCAFE
SELECTION_STREAM = 0xD1CE
REP_STREAM = 0xFEED

MU_CHUNK = 32                      # measurement matrices per streamed chunk
STORED_F64_BYTE_LIMIT = 256 << 20  # stored instances smaller than this keep float64
W_DIVERGENCE_LIMIT = 1e6


@dataclass
class SimParams:
    """Finite-N run parameters; m0 defaults to the hot-start value used for validation."""

    n: int
    alpha: float
    b: float = 1.0
    eta: float = 0.1
    m0: float = 0.1
    t_max: int = 100
    seed: int = 0
    reps: int = 1
    j_mode: Optional[str] = None  # None = stored for n <= 200, regen above

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError(f"n must be >= 2, got {self.n}")
        if not (0.0 < self.b <= 1.0):
            raise ConfigurationError(f"b must be in (0, 1], got {self.b}")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be > 0, got {self.eta}")
        if self.t_max < 1 or self.reps < 1:
            raise ConfigurationError("t_max and reps must be >= 1")
        if self.j_mode not in (None, "stored", "regen"):
            raise ConfigurationError(f"j_mode must be 'stored' or 'regen', got {self.j_mode}")
        if abs(self.m0) > 1.0:
            raise ConfigurationError(f"m0 must lie in [-1, 1], got {self.m0}")


@dataclass
class Instance:
    """One planted problem: signal, measurement matrices (or their seeds), labels."""

    n: int
    m_count: int
    w_star: np.ndarray
    y: np.ndarray
    seed: int
    j_mode: str
    j_dtype: np.dtype
    j: Optional[np.ndarray] = None  # (m_count, n, n) in stored mode


@lru_cache(maxsize=8)
def _pair_indices(n: int):
    return np.triu_indices(n, 1)


def _j_chunk(seed: int, lo: int, hi: int, n: int, dtype) -> np.ndarray:
    """Regenerate measurement matrices mu = lo..hi-1 from their substreams."""
    iu, ju = _pair_indices(n)
    out = np.zeros((hi - lo, n, n), dtype=dtype)
    for k, mu in enumerate(range(lo, hi)):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, J_STREAM, mu])))
        out[k, iu, ju] = rng.standard_normal(iu.size, dtype=dtype)
    return out + out.transpose(0, 2, 1)


def _chunks(inst: Instance):
    for lo in range(0, inst.m_count, MU_CHUNK):
        hi = min(lo + MU_CHUNK, inst.m_count)
        if inst.j_mode == "stored":
            yield lo, hi, inst.j[lo:hi]
        else:
            yield lo, hi, _j_chunk(inst.seed, lo, hi, inst.n, inst.j_dtype)


def _measurements(inst: Instance, w: np.ndarray) -> np.ndarray:
    """h_mu(w) = (1/N) sum_{i<j} J^mu_ij w_i w_j for all mu."""
    h = np.empty(inst.m_count)
    wd = w.astype(inst.j_dtype)
    for lo, hi, jc in _chunks(inst):
        u = (jc @ wd).astype(float, copy=False)
        h[lo:hi] = (u @ w) / (2.0 * inst.n)
    return h


def generate_instance(
    n: int,
    alpha: float,
    seed: int,
    j_mode: Optional[str] = None,
    j_dtype=None,
) -> Instance:
    """Sample signal, measurement matrices and labels, deterministically in seed."""
    if n < 2:
        raise ConfigurationError(f"n must be >= 2, got {n}")
    if not alpha > 0:
        raise ConfigurationError(f"alpha must be > 0, got {alpha}")
    m_count = int(round(alpha * n))
    if m_count < 1:
        raise ConfigurationError(f"round(alpha*n) = {m_count} < 1")
    if j_mode is None:
        j_mode = "stored" if n <= 200 else "regen"
    if j_mode not in ("stored", "regen"):
        raise ConfigurationError(f"j_mode must be 'stored' or 'regen', got {j_mode}")
    if j_dtype is None:
        if j_mode == "stored":
            j_dtype = np.float64 if m_count * n * n * 8 <= STORED_F64_BYTE_LIMIT else np.float32
        else:
            j_dtype = np.float32
    j_dtype = np.dtype(j_dtype)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, SIGNAL_STREAM])))
    g = rng.standard_normal(n)
    w_star = g * (np.sqrt(n) / np.linalg.norm(g))

    inst = Instance(
        n=n, m_count=m_count, w_star=w_star, y=np.empty(m_count),
        seed=seed, j_mode=j_mode, j_dtype=j_dtype,
    )
    if j_mode == "stored":
        inst.j = np.empty((m_count, n, n), dtype=j_dtype)
        for lo in range(0, m_count, MU_CHUNK):
            hi = min(lo + MU_CHUNK, m_count)
            inst.j[lo:hi] = _j_chunk(seed, lo, hi, n, j_dtype)
    inst.y = _measurements(inst, w_star)
    return inst


def recompute_labels(inst: Instance) -> np.ndarray:
    """Labels recomputed from (w*, J); bit-identical to inst.y."""
    return _measurements(inst, inst.w_star)


def loss(inst: Instance, w: np.ndarray) -> float:
    """H[w] = 1/2 sum_mu (y_mu - h_mu(w))^2."""
    w = np.asarray(w, dtype=float)
    if w.shape != (inst.n,):
        raise ValueError(f"w must have shape ({inst.n},)")
    r = inst.y - _measurements(inst, w)
    return 0.5 * float(r @ r)


def minibatch_gradient(inst: Instance, w: np.ndarray, sigma_t: np.ndarray, b: float) -> np.ndarray:
    """(1/b) sum_mu sigma_mu dv_mu/dw with dv_mu/dw = -(y_mu - h_mu) (J^mu w)/N."""
    w = np.asarray(w, dtype=float)
    sigma_t = np.asarray(sigma_t, dtype=float)
    grad = np.zeros(inst.n)
    wd = w.astype(inst.j_dtype)
    for lo, hi, jc in _chunks(inst):
        u = (jc @ wd).astype(float, copy=False)
        h = (u @ w) / (2.0 * inst.n)
        coeff = sigma_t[lo:hi] * (inst.y[lo:hi] - h)
        grad -= u.T @ coeff
    return grad / (b * inst.n)


def _initial_iterate(inst: Instance, m0: float, rng: np.random.Generator) -> np.ndarray:
    """w(0) = m0 w* + sqrt(1-m0^2) z with z uniform on the sphere orthogonal to w*."""
    g = rng.standard_normal(inst.n)
    g -= (g @ inst.w_star / inst.n) * inst.w_star
    z = g * (np.sqrt(inst.n) / np.linalg.norm(g))
    return m0 * inst.w_star + np.sqrt(1.0 - m0 * m0) * z


def run_dynamics(inst: Instance, p: SimParams, traj_seed: Optional[int] = None) -> Series:
    """One trajectory of the update rule, recording m, C(t,t), msd, loss per step."""
    seed = p.seed if traj_seed is None else traj_seed
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, INIT_STREAM])))
    w = _initial_iterate(inst, p.m0, rng)
    sel_seed = int(np.random.SeedSequence([seed, SELECTION_STREAM]).generate_state(1)[0])
    sel = sample_trajectories(p.b, p.t_max, inst.m_count, sel_seed)

    n = inst.n
    m_series = np.empty(p.t_max + 1)
    c_series = np.empty(p.t_max + 1)
    loss_series = np.empty(p.t_max + 1)
    scale = p.eta / (p.b * n)
    wd_dtype = inst.j_dtype
    for t in range(p.t_max):
        m_series[t] = w @ inst.w_star / n
        c_series[t] = w @ w / n
        sigma = sel.bits[:, t].astype(float)
        kick = np.zeros(n)
        half_loss = 0.0
        wd = w.astype(wd_dtype)
        for lo, hi, jc in _chunks(inst):
            u = (jc @ wd).astype(float, copy=False)
            h = (u @ w) / (2.0 * n)
            res = inst.y[lo:hi] - h
            half_loss += float(res @ res)
            kick += u.T @ (sigma[lo:hi] * res)
        loss_series[t] = 0.5 * half_loss
        w = w + scale * kick
        if w @ w / n > W_DIVERGENCE_LIMIT:
            raise NumericalFailure("|w|^2/N diverged", step=t + 1)
    m_series[p.t_max] = w @ inst.w_star / n
    c_series[p.t_max] = w @ w / n
    loss_series[p.t_max] = loss(inst, w)

    return Series.from_m_c(
        m_series, c_series, loss=loss_series,
        meta={
            "n": n, "alpha": p.alpha, "m_count": inst.m_count, "b": p.b, "eta": p.eta,
            "m0": p.m0, "t_max": p.t_max, "seed": seed, "j_mode": inst.j_mode,
            "j_dtype": str(np.dtype(inst.j_dtype)),
        },
    )


def _rep_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, REP_STREAM, rep]).generate_state(1)[0])


def _run_rep(args) -> Series:
    p, rep = args
    rs = _rep_seed(p.seed, rep)
    inst = generate_instance(p.n, p.alpha, seed=rs, j_mode=p.j_mode)
    return run_dynamics(inst, p, traj_seed=rs)


def run_reps(p: SimParams, workers: int = 1) -> list[Series]:
    """Independent instance+trajectory repetitions; reproducible per (seed, rep)."""
    jobs = [(p, rep) for rep in range(p.reps)]
    if workers <= 1 or p.reps == 1:
        return [_run_rep(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_rep, jobs))


def aggregate_series(runs: list[Series]) -> dict:
    """Mean and standard error of m and msd per step across repetitions."""
    m = np.stack([s.m for s in runs])
    d = np.stack([s.delta for s in runs])
    c = np.stack([s.c_diag for s in runs])
    k = len(runs)
    sem = lambda x: x.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(x.shape[1])
    return {
        "t": runs[0].t,
        "m_mean": m.mean(axis=0), "m_se": sem(m),
        "delta_mean": d.mean(axis=0), "delta_se": sem(d),
        "c_mean": c.mean(axis=0), "c_se": sem(c),
        "n_reps": k,
    }
