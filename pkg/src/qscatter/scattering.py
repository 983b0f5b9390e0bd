"""Random scattering matrices for a lossless diffusive slab.

A realization is built in polar form

    S = diag(u, u') @ [[-sqrt(1 - tau), sqrt(tau)], [sqrt(tau), sqrt(1 - tau)]] @ diag(v, v')

with independent Haar unitaries u, u', v, v' and transmission eigenvalues
tau_k = sech^2(x_k), x_k ~ U[0, s]. The scale s is fixed by the calibration
<tau> = tanh(s)/s = T_bar, so the ensemble-mean total transmission of any
input channel equals the diffusive value (ell + z_e)/(L + 2 z_e).

Block layout: inputs and outputs 0..N-1 live on the illuminated (left) side,
N..2N-1 on the far side, i.e. S = [[r, t'], [t, r']].
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np

from .circuits import haar_unitary

DEFAULT_WAVELENGTH_UM = 1.064


@dataclass(frozen=True)
class MediumSpec:
    """Diffusive slab parameters; lengths in micrometres."""

    ell: float
    L: float
    z_e: float = 0.0
    n_channels: int = 32

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError(f"transport mean free path must be positive, got {self.ell}")
        if self.L < self.ell:
            raise ValueError(f"thickness L={self.L} must be at least ell={self.ell}")
        if self.z_e < 0:
            raise ValueError(f"extrapolation length must be >= 0, got {self.z_e}")
        if int(self.n_channels) < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")
        if self.L < 3 * self.ell:
            warnings.warn(f"L={self.L} < 3 ell: outside the diffusive regime", stacklevel=2)

    def in_diffusive_regime(self, wavelength_um: float = DEFAULT_WAVELENGTH_UM, ratio: float = 3.0) -> bool:
        """Check lambda/2pi < ell << L, with "<<" read as a factor ``ratio``."""
        return wavelength_um / (2 * np.pi) < self.ell and ratio * self.ell <= self.L


@dataclass(frozen=True)
class ScatteringMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError(f"scattering matrix must be square with even size, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def r(self) -> np.ndarray:
        n = self.n_channels
        return self.matrix[:n, :n]

    @property
    def t(self) -> np.ndarray:
        n = self.n_channels
        return self.matrix[n:, :n]

    @property
    def t_prime(self) -> np.ndarray:
        n = self.n_channels
        return self.matrix[:n, n:]

    @property
    def r_prime(self) -> np.ndarray:
        n = self.n_channels
        return self.matrix[n:, n:]

    def total_transmission(self, a: int) -> float:
        """T_a = sum_b |t_ba|^2 for input channel ``a``."""
        return float(np.sum(np.abs(self.t[:, a]) ** 2))

    @classmethod
    def identity(cls, n_channels: int) -> "ScatteringMatrix":
        return cls(np.eye(2 * n_channels, dtype=complex))


def mean_transmission(medium: MediumSpec) -> float:
    T = (medium.ell + medium.z_e) / (medium.L + 2 * medium.z_e)
    return float(np.clip(T, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)))


def scattering_event_count(medium: MediumSpec) -> float:
    return ((medium.L + 2 * medium.z_e) / medium.ell) ** 2


@functools.lru_cache(maxsize=256)
def bimodal_scale(T_bar: float, tol: float = 1e-12) -> float:
    """Solve tanh(s)/s = T_bar for s > 0 by bisection."""
    if not 0.0 < T_bar < 1.0:
        raise ValueError(f"mean transmission must lie in (0, 1), got {T_bar}")
    lo, hi = 0.0, 1.0
    while np.tanh(hi) / hi > T_bar:
        hi *= 2.0
    # tanh(s)/s decreases monotonically from 1 at s = 0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        val = np.tanh(mid) / mid if mid > 0 else 1.0
        if val > T_bar:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def derive_seed(master_seed: int, index: int) -> int:
    """Counter-based 64-bit seed for realization ``index`` of a run."""
    words = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),)).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def sample_haar_unitary(n: int, seed: int) -> np.ndarray:
    if int(n) < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return haar_unitary(int(n), np.random.default_rng(seed))


def sample_transmission_eigenvalues(n: int, s: float, rng: np.random.Generator) -> np.ndarray:
    return 1.0 / np.cosh(rng.uniform(0.0, s, size=n)) ** 2


def sample_scattering_matrix(medium: MediumSpec, seed: int) -> ScatteringMatrix:
    rng = np.random.default_rng(seed)
    n = medium.n_channels
    s = bimodal_scale(mean_transmission(medium))
    tau = sample_transmission_eigenvalues(n, s, rng)
    u, u2, v, v2 = (haar_unitary(n, rng) for _ in range(4))
    st, sr = np.sqrt(tau), np.sqrt(1.0 - tau)
    S = np.empty((2 * n, 2 * n), dtype=complex)
    S[:n, :n] = -(u * sr) @ v
    S[:n, n:] = (u * st) @ v2
    S[n:, :n] = (u2 * st) @ v
    S[n:, n:] = (u2 * sr) @ v2
    return ScatteringMatrix(S)
