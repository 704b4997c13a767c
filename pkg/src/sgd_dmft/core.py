"""Two-time data structures, run parameters, initial conditions, and scalar observables.

The dynamical order parameters of the mean-field description live on the
lower triangle 0 <= t' <= t: the correlation C(t,t'), the response R(t,t')
(zero on and above the diagonal by causality), and the two memory kernels.
Everything here is plain float64 numpy; rows are finalized in causal order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EPS_MONITOR = 1e-8          # tolerance of the physical-consistency monitors
C_DIVERGENCE_LIMIT = 1e6    # C(t,t) above this aborts the run as divergent

OMEGA2_FORMS = ("corrected", "literal")
KERNEL_SCALINGS = ("effective", "literal")


class ConfigurationError(ValueError):
    """Invalid run parameters. Mapped to CLI exit code 2."""


class NumericalFailure(RuntimeError):
    """NaN/Inf or diverging C(t,t) during integration. Mapped to CLI exit code 3."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class PhysicalMonitorWarning(UserWarning):
    """A monitored physical inequality (msd >= 0, m^2 <= C) was violated beyond tolerance."""


def msd(m_t: float, c_tt: float) -> float:
    """Mean squared displacement from the signal, 1 - 2*m + C(t,t)."""
    return 1.0 - 2.0 * m_t + c_tt


class TwoTimeGrid:
    """Packed lower-triangular storage for a two-time quantity A(t,t'), 0 <= t' <= t <= t_max.

    Row-major in t: row t is the contiguous slab data[t(t+1)/2 : t(t+1)/2 + t+1].
    Rows must be finalized in causal order; reading an unfinalized row or any
    index outside the triangle is a contract violation and raises IndexError.
    """

    def __init__(self, t_max: int):
        if t_max < 0:
            raise ConfigurationError(f"t_max must be >= 0, got {t_max}")
        self.t_max = int(t_max)
        self.data = np.zeros((self.t_max + 1) * (self.t_max + 2) // 2)
        self.filled = -1  # highest finalized row index

    @staticmethod
    def _offset(t: int) -> int:
        return t * (t + 1) // 2

    def _check(self, t: int, tp: int) -> None:
        if not (0 <= tp <= t <= self.t_max):
            raise IndexError(f"(t={t}, t'={tp}) outside triangle 0 <= t' <= t <= {self.t_max}")
        if t > self.filled:
            raise IndexError(f"row {t} not finalized (filled through {self.filled})")

    def get(self, t: int, tp: int) -> float:
        self._check(t, tp)
        return float(self.data[self._offset(t) + tp])

    def row(self, t: int) -> np.ndarray:
        """Contiguous read-only view of finalized row t (length t+1)."""
        self._check(t, t)
        off = self._offset(t)
        out = self.data[off : off + t + 1]
        out.flags.writeable = False
        return out

    def set_row(self, t: int, values) -> None:
        """Finalize row t. Requires all rows s < t finalized and len(values) == t+1."""
        if t != self.filled + 1:
            raise IndexError(f"rows must be finalized in order; next is {self.filled + 1}, got {t}")
        if t > self.t_max:
            raise IndexError(f"row {t} exceeds capacity t_max={self.t_max}")
        values = np.asarray(values, dtype=float)
        if values.shape != (t + 1,):
            raise ValueError(f"row {t} needs {t + 1} values, got shape {values.shape}")
        off = self._offset(t)
        self.data[off : off + t + 1] = values
        self.filled = t

    def sym(self, t: int, tp: int) -> float:
        """Symmetric read A(t,t') = A(t',t); both orders accepted (used for C)."""
        if tp > t:
            t, tp = tp, t
        return self.get(t, tp)

    def dense(self, through: Optional[int] = None) -> np.ndarray:
        """Finalized triangle as a dense (n, n) array, zero above the diagonal."""
        n = (self.filled if through is None else through) + 1
        out = np.zeros((n, n))
        for t in range(n):
            off = self._offset(t)
            out[t, : t + 1] = self.data[off : off + t + 1]
        return out


@dataclass
class DmftParams:
    """Parameters of one mean-field integration run.

    alpha: sample complexity (measurements per dimension), > 0.
    b: batch fraction in (0,1]; b=1 is full-batch GD and needs no sampling.
    eta: learning rate. m0, c0: initial overlap and squared norm per spin.
    n_samples: Monte-Carlo selection trajectories averaged in the kernels.
    omega2_form: 'corrected' squares the drive with its m(t) factor, 'literal'
        without it. kernel_scaling: 'effective' weights kernel averages by
        sigma/b, 'literal' by sigma.
    """

    alpha: float
    b: float = 1.0
    eta: float = 0.1
    m0: float = 1e-4
    c0: float = 1.0
    t_max: int = 100
    n_samples: int = 1000
    seed: int = 0
    omega2_form: str = "corrected"
    kernel_scaling: str = "effective"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if not (0.0 < self.b <= 1.0):
            raise ConfigurationError(f"b must be in (0, 1], got {self.b}")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be > 0, got {self.eta}")
        if not self.c0 > 0:
            raise ConfigurationError(f"c0 must be > 0, got {self.c0}")
        if self.m0 * self.m0 > self.c0:
            raise ConfigurationError(f"m0^2={self.m0**2} exceeds c0={self.c0}")
        if self.t_max < 1:
            raise ConfigurationError(f"t_max must be >= 1, got {self.t_max}")
        if self.n_samples < 1:
            raise ConfigurationError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.omega2_form not in OMEGA2_FORMS:
            raise ConfigurationError(f"omega2_form must be one of {OMEGA2_FORMS}")
        if self.kernel_scaling not in KERNEL_SCALINGS:
            raise ConfigurationError(f"kernel_scaling must be one of {KERNEL_SCALINGS}")


@dataclass
class DmftState:
    """Full integrator state: m series, the four two-time grids, and the step counter.

    R(t,t') is stored for t >= t' with R(t,t) = 0; R vanishes for t <= t' by
    causality, and R(t'+1,t') = 1 exactly. Kernel rows lambda_*(t, .) exist for
    every step t that has been advanced (filled through t-1 after reaching t).
    """

    params: DmftParams
    m: np.ndarray
    c: TwoTimeGrid
    r: TwoTimeGrid
    lambda_c: TwoTimeGrid
    lambda_r: TwoTimeGrid
    t: int = 0

    def delta(self, t: Optional[int] = None) -> float:
        t = self.t if t is None else t
        return msd(float(self.m[t]), self.c.get(t, t))


def init_state(params: DmftParams) -> DmftState:
    """Fresh state with m(0)=m0, C(0,0)=c0, R(0,0)=0, kernels unfilled."""
    m = np.zeros(params.t_max + 1)
    m[0] = params.m0
    c = TwoTimeGrid(params.t_max)
    c.set_row(0, [params.c0])
    r = TwoTimeGrid(params.t_max)
    r.set_row(0, [0.0])
    return DmftState(
        params=params,
        m=m,
        c=c,
        r=r,
        lambda_c=TwoTimeGrid(params.t_max),
        lambda_r=TwoTimeGrid(params.t_max),
        t=0,
    )


@dataclass
class Series:
    """Per-step observables of one run: overlap, diagonal correlation, msd, optional loss."""

    t: np.ndarray
    m: np.ndarray
    c_diag: np.ndarray
    delta: np.ndarray
    loss: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_m_c(cls, m, c_diag, loss=None, meta=None) -> "Series":
        m = np.asarray(m, dtype=float)
        c_diag = np.asarray(c_diag, dtype=float)
        return cls(
            t=np.arange(len(m)),
            m=m,
            c_diag=c_diag,
            delta=1.0 - 2.0 * m + c_diag,
            loss=None if loss is None else np.asarray(loss, dtype=float),
            meta=dict(meta or {}),
        )


def format_meta(meta: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items())


def parse_meta(line: str) -> dict:
    meta = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            meta[k] = v
    return meta


def series_to_csv(series: Series, path) -> None:
    """Write a Series with header t,m,c_diag,delta[,loss], 17 significant digits."""
    cols = ["t", "m", "c_diag", "delta"] + (["loss"] if series.loss is not None else [])
    with open(path, "w") as fh:
        if series.meta:
            fh.write(format_meta(series.meta) + "\n")
        fh.write(",".join(cols) + "\n")
        for i in range(len(series)):
            row = [f"{series.t[i]:d}", f"{series.m[i]:.17g}", f"{series.c_diag[i]:.17g}", f"{series.delta[i]:.17g}"]
            if series.loss is not None:
                row.append(f"{series.loss[i]:.17g}")
            fh.write(",".join(row) + "\n")


def series_from_csv(path) -> Series:
    meta = {}
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#"):
            meta = parse_meta(first)
            header = fh.readline()
        else:
            header = first
        cols = header.strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = {c: np.array([float(r[i]) for r in rows]) for i, c in enumerate(cols)}
    return Series(
        t=data["t"].astype(int),
        m=data["m"],
        c_diag=data["c_diag"],
        delta=data["delta"],
        loss=data.get("loss"),
        meta=meta,
    )
