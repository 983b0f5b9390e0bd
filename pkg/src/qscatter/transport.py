"""Source preparation, propagation through one realization, and detection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import gaussian as gs
from .errors import InfeasibleSourceError
from .scattering import ScatteringMatrix

PLANCK = 6.62607015e-34
SPEED_OF_LIGHT = 299792458.0
R_CAP = 2.0

TRANSMITTED = "transmitted"
REFLECTED = "reflected"


@dataclass(frozen=True)
class QuantumSourceSpec:
    """Single-mode squeezed + displaced source.

    Either explicit (``r``, ``theta_s``, ``alpha_mag``, ``theta_d``) or a
    target (``F_a``, ``n_mean``). In explicit form the squeezed quadrature
    lies at angle theta_s / 2, so theta_d = theta_s / 2 gives the
    sub-Poissonian branch and theta_d = theta_s / 2 + pi / 2 the
    super-Poissonian one.
    """

    r: Optional[float] = None
    theta_s: float = 0.0
    alpha_mag: Optional[float] = None
    theta_d: float = 0.0
    F_a: Optional[float] = None
    n_mean: Optional[float] = None

    def __post_init__(self):
        explicit = self.r is not None or self.alpha_mag is not None
        target = self.F_a is not None or self.n_mean is not None
        if explicit == target:
            raise ValueError("give either explicit (r, alpha_mag, ...) or target (F_a, n_mean) source parameters")
        if explicit:
            if self.r is None or self.alpha_mag is None:
                raise ValueError("explicit source needs both r and alpha_mag")
            if not np.isfinite([self.r, self.theta_s, self.alpha_mag, self.theta_d]).all():
                raise ValueError("source parameters must be finite")
            if self.alpha_mag < 0:
                raise ValueError("alpha_mag must be >= 0")
        else:
            if self.F_a is None or self.n_mean is None:
                raise ValueError("target source needs both F_a and n_mean")
            if self.n_mean < 0:
                raise ValueError(f"n_mean must be >= 0, got {self.n_mean}")
            if not self.F_a > 0:
                raise ValueError(f"F_a must be positive, got {self.F_a}")

    @property
    def is_target(self) -> bool:
        return self.F_a is not None


@dataclass(frozen=True)
class DetectionSpec:
    """Detection chain; SI units. The detection frequency is metadata only."""

    eta: float = 1.0
    wavelength: float = 1064e-9
    power: float = 120e-6
    bandwidth: float = 300e3
    detection_frequency: float = 3.93e6

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not (self.wavelength > 0 and self.bandwidth > 0 and self.power >= 0):
            raise ValueError("wavelength and bandwidth must be positive, power non-negative")


@dataclass(frozen=True)
class ChannelStats:
    """Photon statistics of one side, plus the flux fraction of the source it carries."""

    moments: gs.PhotonMoments
    flux_fraction: float


def photons_per_mode(det: DetectionSpec) -> float:
    """Photons in one detection mode: n = P lambda / (h c B)."""
    return det.power * det.wavelength / (PLANCK * SPEED_OF_LIGHT * det.bandwidth)


def displaced_squeezed_fano(r: float, alpha2: float, along_squeezed: bool = True) -> float:
    """Fano factor of a displaced squeezed state with |alpha|^2 = alpha2."""
    e = np.exp(-2 * r if along_squeezed else 2 * r)
    sh2 = np.sinh(r) ** 2
    n = alpha2 + sh2
    return (alpha2 * e + 2 * sh2 * (1 + sh2)) / n


def _solve_target(F_a: float, n_mean: float) -> tuple[float, float, float]:
    """Return (r, alpha_mag, theta_d) reaching (F_a, n_mean) with theta_s = 0."""
    if F_a == 1.0:
        return 0.0, np.sqrt(n_mean), 0.0
    sub = F_a < 1.0
    r_hi = min(R_CAP, float(np.arcsinh(np.sqrt(n_mean))))

    def excess(r):
        return displaced_squeezed_fano(r, n_mean - np.sinh(r) ** 2, sub) - F_a

    grid = np.linspace(0.0, r_hi, 4001)
    vals = np.array([excess(r) for r in grid])
    crossing = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if crossing.size == 0:
        reach = vals.min() + F_a if sub else vals.max() + F_a
        raise InfeasibleSourceError(
            f"F_a={F_a} unreachable at n_mean={n_mean} with r <= {R_CAP} "
            f"({'lowest' if sub else 'highest'} attainable F = {reach:.6g})"
        )
    k = crossing[0]
    r = brentq(excess, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    alpha = np.sqrt(max(n_mean - np.sinh(r) ** 2, 0.0))
    return r, alpha, 0.0 if sub else np.pi / 2


def source_prepare(spec: QuantumSourceSpec) -> tuple[gs.GaussianState, float, float]:
    """Build the single-mode source; returns (state, F_a, n_mean)."""
    if spec.is_target:
        if spec.n_mean == 0:
            raise InfeasibleSourceError("Fano factor is undefined for an empty source (n_mean = 0)")
        r, alpha_mag, theta_d = _solve_target(spec.F_a, spec.n_mean)
        theta_s = 0.0
    else:
        r, alpha_mag, theta_s, theta_d = spec.r, spec.alpha_mag, spec.theta_s, spec.theta_d
    state = gs.squeeze(gs.vacuum_state(1), 0, r, theta_s)
    state = gs.displace(state, 0, alpha_mag * np.exp(1j * theta_d))
    pm = gs.photon_moments(state, [0])
    return state, pm.fano_total, pm.total_mean


def embed_source(source: gs.GaussianState, num_modes: int, mode: int) -> gs.GaussianState:
    """Place a single-mode state in ``mode`` of an otherwise vacuum register."""
    if source.num_modes != 1:
        raise ValueError("source must be a single-mode state")
    if not 0 <= mode < num_modes:
        raise IndexError(f"input mode {mode} out of range for {num_modes} modes")
    d = np.zeros(2 * num_modes)
    cov = 0.5 * np.eye(2 * num_modes)
    sl = slice(2 * mode, 2 * mode + 2)
    d[sl] = source.displacement
    cov[sl, sl] = source.covariance
    return gs.GaussianState(d, cov)


def propagate(source: gs.GaussianState, S: ScatteringMatrix, a: int = 0) -> gs.GaussianState:
    """Send ``source`` into illuminated-side input ``a``; returns the 2N-mode output.

    Equivalent to ``apply_interferometer(embed_source(...), S)``. Because every
    other input is vacuum, which passive optics leaves invariant, only the two
    symplectic columns of mode ``a`` are needed:
    sigma_out = I/2 + O_a (sigma_a - I/2) O_a^T, d_out = O_a d_a.
    """
    n = S.n_channels
    if not 0 <= a < n:
        raise IndexError(f"input channel {a} out of range for {n} channels")
    if source.num_modes != 1:
        raise ValueError("source must be a single-mode state")
    residual = gs.unitarity_residual(S.matrix)
    if residual > gs.UNITARITY_TOL:
        raise ValueError(f"scattering matrix is not unitary: max|S^dag S - I| = {residual:.3e}")
    col = S.matrix[:, a]
    O_a = np.empty((4 * n, 2))
    O_a[0::2, 0], O_a[0::2, 1] = col.real, -col.imag
    O_a[1::2, 0], O_a[1::2, 1] = col.imag, col.real
    excess = source.covariance - 0.5 * np.eye(2)
    cov = 0.5 * np.eye(4 * n) + O_a @ excess @ O_a.T
    return gs.GaussianState(O_a @ source.displacement, 0.5 * (cov + cov.T))


def side_modes(num_channels: int, side: str) -> range:
    if side == REFLECTED:
        return range(num_channels)
    if side == TRANSMITTED:
        return range(num_channels, 2 * num_channels)
    raise ValueError(f"side must be {TRANSMITTED!r} or {REFLECTED!r}, got {side!r}")


def channel_stats(out: gs.GaussianState, side: str) -> ChannelStats:
    n = out.num_modes // 2
    moments = gs.photon_moments(out, side_modes(n, side))
    everything = gs.photon_moments(out).total_mean
    frac = moments.total_mean / everything if everything > 0 else float("nan")
    return ChannelStats(moments, frac)


def apply_detection(stats: gs.PhotonMoments, eta: float) -> gs.PhotonMoments:
    """Photon statistics after independent loss ``eta`` on every detected mode."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    cov = eta**2 * stats.number_covariance + np.diag(eta * (1 - eta) * stats.means)
    return gs.PhotonMoments(stats.mode_ids, eta * stats.means, cov, stats.leakage)


def detected_fano(F: float, eta: float) -> float:
    """Single-mode Fano factor after efficiency ``eta``: 1 + eta (F - 1)."""
    return 1.0 + eta * (F - 1.0)


def infer_fano(F_detected: float, eta: float) -> float:
    """Invert :func:`detected_fano`: Fano factor before an efficiency ``eta``."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return 1.0 + (F_detected - 1.0) / eta
