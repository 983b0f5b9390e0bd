"""Gaussian-state algebra in the interleaved (x1, p1, ..., xM, pM) ordering.

Conventions: hbar = 1, x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)),
so the vacuum covariance is identity/2 and a coherent amplitude alpha sits at
displacement sqrt(2) * (Re alpha, Im alpha).

Photon-number moments are evaluated in closed form from the first and second
quadrature moments (Isserlis/Wick expansion of the quartic products):

    <n_j>          = (tr sigma_jj - 1)/2 + |d_j|^2 / 2
    Cov(n_j, n_k)  = 1/2 tr(sigma_jk sigma_kj) + d_j^T sigma_jk d_k - delta_jk / 4

where sigma_jk is the 2x2 block of the covariance between modes j and k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNITARITY_TOL = 1e-10
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GaussianState:
    """Immutable multimode Gaussian state.

    Attributes:
        displacement: real vector of length 2M (xpxp ordering).
        covariance: real symmetric 2M x 2M matrix.
    """

    displacement: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        d = np.array(self.displacement, dtype=float)
        cov = np.array(self.covariance, dtype=float)
        if d.ndim != 1 or d.size % 2 or d.size == 0:
            raise ValueError(f"displacement must be a non-empty vector of even length, got shape {d.shape}")
        if cov.shape != (d.size, d.size):
            raise ValueError(f"covariance shape {cov.shape} does not match displacement length {d.size}")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise ValueError("covariance is not symmetric")
        d.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "displacement", d)
        object.__setattr__(self, "covariance", cov)

    @property
    def num_modes(self) -> int:
        return self.displacement.size // 2

    def mode_block(self, mode: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (displacement, covariance) restricted to one mode."""
        _check_mode(mode, self.num_modes)
        sl = slice(2 * mode, 2 * mode + 2)
        return self.displacement[sl], self.covariance[sl, sl]


@dataclass(frozen=True)
class PhotonMoments:
    """Photon-number statistics for a set of modes.

    ``leakage`` is only non-zero for results produced by the Fock oracle.
    """

    mode_ids: tuple[int, ...]
    means: np.ndarray
    number_covariance: np.ndarray
    leakage: float = field(default=0.0)

    @property
    def total_mean(self) -> float:
        return float(np.sum(self.means))

    @property
    def total_variance(self) -> float:
        return float(np.sum(self.number_covariance))

    @property
    def fano_total(self) -> float:
        mean = self.total_mean
        if mean <= 0:
            return float("nan")
        return self.total_variance / mean

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.number_covariance)


def _check_mode(mode: int, num_modes: int) -> None:
    if not 0 <= int(mode) < num_modes:
        raise IndexError(f"mode {mode} out of range for a {num_modes}-mode state")


def _check_finite(**values) -> None:
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise ValueError(f"{name} must be finite, got {value!r}")


def vacuum_state(num_modes: int) -> GaussianState:
    if int(num_modes) < 1:
        raise ValueError(f"number of modes must be >= 1, got {num_modes}")
    return GaussianState(np.zeros(2 * num_modes), 0.5 * np.eye(2 * num_modes))


def coherent_state(alpha: complex) -> GaussianState:
    return displace(vacuum_state(1), 0, alpha)


def squeezing_symplectic(r: float, theta: float) -> np.ndarray:
    """2x2 symplectic of S(r e^{i theta}): a -> a cosh r - a^dag e^{i theta} sinh r.

    For theta = 0 the x quadrature is squeezed by e^{-r}.
    """
    c, s = np.cos(theta), np.sin(theta)
    return np.cosh(r) * np.eye(2) - np.sinh(r) * np.array([[c, s], [s, -c]])


def _apply_local(state: GaussianState, mode: int, sym: np.ndarray) -> GaussianState:
    sl = slice(2 * mode, 2 * mode + 2)
    d = state.displacement.copy()
    cov = state.covariance.copy()
    d[sl] = sym @ d[sl]
    cov[sl, :] = sym @ cov[sl, :]
    cov[:, sl] = cov[:, sl] @ sym.T
    return GaussianState(d, _symmetrize(cov))


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def squeeze(state: GaussianState, mode: int, r: float, theta: float = 0.0) -> GaussianState:
    _check_mode(mode, state.num_modes)
    _check_finite(r=r, theta=theta)
    if r == 0:
        return state
    return _apply_local(state, mode, squeezing_symplectic(r, theta))


def rotate(state: GaussianState, mode: int, phi: float) -> GaussianState:
    """Phase shift a -> a e^{i phi}."""
    _check_mode(mode, state.num_modes)
    _check_finite(phi=phi)
    c, s = np.cos(phi), np.sin(phi)
    return _apply_local(state, mode, np.array([[c, -s], [s, c]]))


def displace(state: GaussianState, mode: int, alpha: complex) -> GaussianState:
    _check_mode(mode, state.num_modes)
    alpha = complex(alpha)
    _check_finite(alpha=alpha)
    d = state.displacement.copy()
    d[2 * mode] += np.sqrt(2) * alpha.real
    d[2 * mode + 1] += np.sqrt(2) * alpha.imag
    return GaussianState(d, state.covariance)


def unitarity_residual(U: np.ndarray) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def passive_symplectic(U: np.ndarray) -> np.ndarray:
    """Real orthogonal symplectic (xpxp) of the mode map a -> U a."""
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    O = np.empty((2 * m, 2 * m))
    O[0::2, 0::2] = U.real
    O[0::2, 1::2] = -U.imag
    O[1::2, 0::2] = U.imag
    O[1::2, 1::2] = U.real
    return O


def apply_interferometer(state: GaussianState, U: np.ndarray) -> GaussianState:
    U = np.asarray(U, dtype=complex)
    if U.shape != (state.num_modes, state.num_modes):
        raise ValueError(f"interferometer shape {U.shape} does not match {state.num_modes} modes")
    residual = unitarity_residual(U)
    if residual > UNITARITY_TOL:
        raise ValueError(f"interferometer is not unitary: max|U^dag U - I| = {residual:.3e}")
    O = passive_symplectic(U)
    return GaussianState(O @ state.displacement, _symmetrize(O @ state.covariance @ O.T))


def apply_loss(state: GaussianState, modes: Iterable[int], eta: float) -> GaussianState:
    """Pure-loss channel of transmissivity ``eta`` on each listed mode."""
    _check_finite(eta=eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    idx = []
    for mode in modes:
        _check_mode(mode, state.num_modes)
        idx += [2 * mode, 2 * mode + 1]
    scale = np.ones(2 * state.num_modes)
    scale[idx] = np.sqrt(eta)
    cov = state.covariance * np.outer(scale, scale)
    cov[idx, idx] += 0.5 * (1.0 - eta)
    return GaussianState(state.displacement * scale, cov)


def photon_moments(state: GaussianState, mode_subset: Sequence[int] | None = None) -> PhotonMoments:
    """Exact photon-number means and covariances over ``mode_subset``."""
    if mode_subset is None:
        mode_subset = range(state.num_modes)
    modes = tuple(int(m) for m in mode_subset)
    if not modes:
        raise ValueError("mode subset must be non-empty")
    for m in modes:
        _check_mode(m, state.num_modes)
    idx = np.ravel([[2 * m, 2 * m + 1] for m in modes])
    k = len(modes)
    d = state.displacement[idx].reshape(k, 2)
    cov = state.covariance[np.ix_(idx, idx)].reshape(k, 2, k, 2)

    diag_blocks = cov[np.arange(k), :, np.arange(k), :]
    means = 0.5 * (np.trace(diag_blocks, axis1=1, axis2=2) - 1.0) + 0.5 * np.sum(d * d, axis=1)
    ncov = 0.5 * np.einsum("iajb,iajb->ij", cov, cov)
    ncov += np.einsum("ia,iajb,jb->ij", d, cov, d)
    ncov -= 0.25 * np.eye(k)
    return PhotonMoments(modes, means, 0.5 * (ncov + ncov.T))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Sorted symplectic eigenvalues of an xpxp covariance matrix."""
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0] // 2
    omega = np.kron(np.eye(m), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    ev = np.abs(np.linalg.eigvals(1j * omega @ cov))
    return np.sort(ev)[::2]


def fano_factor(state: GaussianState, mode: int = 0) -> float:
    return photon_moments(state, [mode]).fano_total
