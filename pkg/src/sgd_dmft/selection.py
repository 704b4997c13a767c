"""Reproducible ensembles of Bernoulli selection trajectories sigma(t).

Each trajectory i draws from its own Philox stream keyed by
SeedSequence([master_seed, TRAJECTORY_STREAM, i]), so the bit matrix is a pure
function of (master_seed, b, t_len, n) and independent of generation order or
worker count. Entries are stored as uint8 (consumed multiplicatively in the
kernel averages; packing would just add decode cost).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError

# stream tags for seed derivation; fixed constants, never reuse across purposes
TRAJECTORY_STREAM = 0x5E1EC7


@dataclass
class SelectionEnsemble:
    """n Bernoulli(b) selection trajectories of length t_len, bits[i, t] in {0, 1}."""

    b: float
    t_len: int
    n: int
    bits: np.ndarray
    master_seed: int

    def window(self, t: int) -> np.ndarray:
        """Float view of the first t+1 steps of every trajectory, shape (n, t+1)."""
        if t >= self.t_len:
            raise IndexError(f"step {t} outside ensemble horizon {self.t_len}")
        return self.bits[:, : t + 1].astype(float)


def trajectory_rng(master_seed: int, i: int) -> np.random.Generator:
    """Generator for trajectory i; the documented splitting rule."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, TRAJECTORY_STREAM, i])))


def sample_trajectories(b: float, t_len: int, n: int, master_seed: int) -> SelectionEnsemble:
    """Sample n i.i.d. Bernoulli(b) trajectories of length t_len, bit-reproducibly."""
    if not (0.0 < b <= 1.0):
        raise ConfigurationError(f"b must be in (0, 1], got {b}")
    if t_len < 1 or n < 1:
        raise ConfigurationError(f"need t_len >= 1 and n >= 1, got t_len={t_len}, n={n}")
    bits = np.empty((n, t_len), dtype=np.uint8)
    if b == 1.0:
        bits[:] = 1
    else:
        for i in range(n):
            u = trajectory_rng(master_seed, i).random(t_len)
            bits[i] = u < b
    return SelectionEnsemble(b=b, t_len=t_len, n=n, bits=bits, master_seed=master_seed)
