"""Brute-force photon statistics in a truncated Fock basis.

Used only to certify :mod:`qscatter.gaussian`. States are kept as (possibly
several) unnormalized state vectors of shape ``(cutoff,) * num_modes``; the
probability mass that escapes the truncated space is reported as leakage.

Operators are the truncated blocks ``P U P`` of the exact unitaries:

* displacement and squeezing exponentiate their generators in a padded
  basis and keep the leading ``cutoff x cutoff`` block;
* an interferometer is split into two-mode Givens rotations and phases; each
  rotation is exponentiated exactly inside complete photon-number sectors;
* loss mixes the mode with a vacuum ancilla on a beam splitter and traces the
  ancilla out in its Fock basis. A loss followed by further coherent
  operations splits the state into one branch per ancilla photon number;
  trailing losses act directly on the photon-number distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, expm, schur

from .circuits import CircuitDescription, Displace, Interferometer, Loss, Squeeze, random_circuit, run_gaussian
from .errors import TruncationError
from .gaussian import PhotonMoments

LEAKAGE_LIMIT = 1e-8
PAD = 80
BRANCH_FLOOR = 1e-18
SECTOR_FLOOR = 1e-30


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def displacement_matrix(alpha: complex, cutoff: int) -> np.ndarray:
    a = _annihilation(cutoff + PAD)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)[:cutoff, :cutoff]


def squeezing_matrix(r: float, theta: float, cutoff: int) -> np.ndarray:
    a = _annihilation(cutoff + PAD)
    zeta = r * np.exp(1j * theta)
    gen = 0.5 * (np.conj(zeta) * (a @ a) - zeta * (a.conj().T @ a.conj().T))
    return expm(gen)[:cutoff, :cutoff]


def _unitary_log(V: np.ndarray) -> np.ndarray:
    """Hermitian H with V = exp(iH)."""
    T, Z = schur(V, output="complex")
    phases = np.angle(np.diag(T))
    return (Z * phases) @ Z.conj().T


def _sector_block(H: np.ndarray, total: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n1 = np.arange(total + 1)
    n2 = total - n1
    diag = H[0, 0].real * n1 + H[1, 1].real * n2
    if total == 0:
        return n1, n2, np.exp(1j * diag).reshape(1, 1)
    # a diagonal gauge e^{i n1 phi} makes the tridiagonal sector generator real
    phi = np.angle(H[1, 0])
    off = abs(H[1, 0]) * np.sqrt((n1[:-1] + 1.0) * n2[:-1])
    w, vecs = eigh_tridiagonal(diag, off)
    gauge = np.exp(-1j * phi * n1)
    block = (vecs * np.exp(1j * w)) @ vecs.T
    return n1, n2, gauge[:, None] * block * gauge.conj()[None, :]


def sector_blocks(V: np.ndarray, cutoff: int, sectors=None) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Exact unitary blocks of the passive map a -> V a on two modes.

    One entry per total photon number N (default all N < 2 * cutoff - 1):
    ``(n1, n2, block)`` in the complete sector basis |n1, N - n1>, n1 = 0..N.
    """
    H = _unitary_log(np.asarray(V, dtype=complex))
    if sectors is None:
        sectors = range(2 * cutoff - 1)
    return [_sector_block(H, total) for total in sectors]


def _project(n1, n2, block, cutoff):
    keep = (n1 < cutoff) & (n2 < cutoff)
    return n1[keep], n2[keep], block[np.ix_(keep, keep)]


def _projected(blocks, cutoff):
    for n1, n2, block in blocks:
        yield _project(n1, n2, block, cutoff)


def two_mode_matrix(V: np.ndarray, cutoff: int) -> np.ndarray:
    """Dense Fock representation P U P of a -> V a, index ``n1 * cutoff + n2``."""
    c = cutoff
    out = np.zeros((c * c, c * c), dtype=complex)
    for n1, n2, block in _projected(sector_blocks(V, c), c):
        idx = n1 * c + n2
        out[np.ix_(idx, idx)] = block
    return out


def givens_decomposition(U: np.ndarray) -> tuple[list[tuple[int, int, np.ndarray]], np.ndarray]:
    """Write U = G_1 G_2 ... G_K diag(phases) with two-mode unitaries G_k.

    Returns the list of (i, j, G_k) in product order and the diagonal phases.
    """
    W = np.array(U, dtype=complex)
    m = W.shape[0]
    rotations = []
    for col in range(m - 1):
        for row in range(m - 1, col, -1):
            a, b = W[row - 1, col], W[row, col]
            rad = np.hypot(abs(a), abs(b))
            if abs(b) < 1e-300:
                continue
            Q = np.array([[np.conj(a), np.conj(b)], [-b, a]]) / rad
            W[[row - 1, row], :] = Q @ W[[row - 1, row], :]
            rotations.append((row - 1, row, Q.conj().T))
    return rotations, np.diag(W).copy()


class _FockRun:
    """Branches stacked along a leading axis: shape (B, cutoff, ..., cutoff)."""

    def __init__(self, num_modes: int, cutoff: int):
        self.m = num_modes
        self.c = cutoff
        self.psi = np.zeros((1,) + (cutoff,) * num_modes, dtype=complex)
        self.psi[(0,) * (num_modes + 1)] = 1.0
        self.pruned = 0.0

    def local(self, mode: int, mat: np.ndarray) -> None:
        ax = mode + 1
        self.psi = np.moveaxis(np.tensordot(mat, self.psi, axes=([1], [ax])), 0, ax)

    def pair(self, i: int, j: int, V: np.ndarray) -> None:
        c = self.c
        H = _unitary_log(np.asarray(V, dtype=complex))
        moved = np.moveaxis(self.psi, (i + 1, j + 1), (0, 1))
        weight = np.sum(np.abs(moved.reshape(c, c, -1)) ** 2, axis=2)
        out = np.zeros_like(moved)
        for total in range(2 * c - 1):
            lo, hi = max(0, total - c + 1), min(total, c - 1)
            n1 = np.arange(lo, hi + 1)
            w = weight[n1, total - n1].sum()
            if w < SECTOR_FLOOR:
                # sector carries no amplitude worth transforming
                self.pruned += float(w)
                continue
            n1, n2, block = _project(*_sector_block(H, total), c)
            out[n1, n2] = np.tensordot(block, moved[n1, n2], axes=1)
        self.psi = np.moveaxis(out, (0, 1), (i + 1, j + 1))

    def phase(self, mode: int, phi: float) -> None:
        shape = [1] * (self.m + 1)
        shape[mode + 1] = self.c
        self.psi = self.psi * np.exp(1j * phi * np.arange(self.c)).reshape(shape)

    def interferometer(self, U: np.ndarray) -> None:
        rotations, phases = givens_decomposition(U)
        for mode, ph in enumerate(phases):
            self.phase(mode, float(np.angle(ph)))
        for i, j, G in reversed(rotations):
            self.pair(i, j, G)

    def branch_loss(self, mode: int, eta: float) -> None:
        kraus = np.array(loss_kraus(eta, self.c))
        ax = mode + 1
        # new leading axis k = ancilla photon number, merged with the branch axis
        out = np.moveaxis(np.tensordot(kraus, self.psi, axes=([2], [ax])), 1, ax + 1)
        out = out.reshape((-1,) + out.shape[2:])
        weights = np.sum(np.abs(out.reshape(out.shape[0], -1)) ** 2, axis=1)
        keep = weights >= BRANCH_FLOOR
        self.pruned += float(weights[~keep].sum())
        self.psi = out[keep]

    def distribution(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=0)


def loss_kraus(eta: float, cutoff: int) -> list[np.ndarray]:
    """Kraus operators of pure loss from an ancilla beam splitter.

    K_k[m, n] = <m, k| U_bs |n, 0>, with the ancilla as the second mode; only
    the sectors reachable from |n, 0>, n < cutoff, are needed.
    """
    t, s = np.sqrt(eta), np.sqrt(1.0 - eta)
    kraus = np.zeros((cutoff, cutoff, cutoff), dtype=complex)
    for n1, n2, block in sector_blocks(np.array([[t, -s], [s, t]]), cutoff, range(cutoff)):
        total = n1[-1]
        # input |total, 0> is the last sector state; output |total - k, k>
        kraus[n2, n1, total] = block[:, -1]
    return list(kraus)


def thinning_matrix(eta: float, cutoff: int) -> np.ndarray:
    """Photon-number transfer matrix of loss, sum_k |K_k|^2."""
    return sum(np.abs(K) ** 2 for K in loss_kraus(eta, cutoff))


def check_truncation(leakage: float, cutoff: int) -> None:
    """Refuse results whose truncation error may exceed the oracle's accuracy.

    Missing mass sits at n >= cutoff, so second moments can be off by at
    least cutoff**2 * leakage; both the bare and the weighted figure must stay
    below ``LEAKAGE_LIMIT``.
    """
    if leakage >= LEAKAGE_LIMIT:
        raise TruncationError(f"truncation leakage {leakage:.2e} >= {LEAKAGE_LIMIT:.0e}; increase cutoff (now {cutoff})")
    if cutoff**2 * leakage >= LEAKAGE_LIMIT:
        raise TruncationError(
            f"second-moment leakage cutoff^2 * {leakage:.2e} >= {LEAKAGE_LIMIT:.0e}; increase cutoff (now {cutoff})"
        )


def oracle_photon_moments(circuit: CircuitDescription, check_leakage: bool = True) -> PhotonMoments:
    """Photon-number moments of ``circuit`` computed by Fock-space brute force."""
    m, c = circuit.num_modes, circuit.cutoff
    ops = list(circuit.operations)
    last_coherent = max((k for k, op in enumerate(ops) if not isinstance(op, Loss)), default=-1)
    run = _FockRun(m, c)
    for op in ops[: last_coherent + 1]:
        if isinstance(op, Squeeze):
            run.local(op.mode, squeezing_matrix(op.r, op.theta, c))
        elif isinstance(op, Displace):
            run.local(op.mode, displacement_matrix(op.alpha, c))
        elif isinstance(op, Interferometer):
            run.interferometer(op.U)
        elif isinstance(op, Loss):
            run.branch_loss(op.mode, op.eta)
        else:
            raise TypeError(f"unknown operation {op!r}")

    p = run.distribution()
    for op in ops[last_coherent + 1 :]:
        p = np.moveaxis(np.tensordot(thinning_matrix(op.eta, c), p, axes=([1], [op.mode])), 0, op.mode)

    leakage = max(0.0, 1.0 - float(p.sum())) + run.pruned
    if check_leakage:
        check_truncation(leakage, c)

    n = np.arange(c, dtype=float)
    means = np.empty(m)
    marg = []
    for j in range(m):
        other = tuple(k for k in range(m) if k != j)
        pj = p.sum(axis=other) if other else p
        marg.append(pj)
        means[j] = n @ pj
    second = np.empty((m, m))
    for j in range(m):
        second[j, j] = (n * n) @ marg[j]
        for k in range(j + 1, m):
            other = tuple(q for q in range(m) if q not in (j, k))
            pjk = p.sum(axis=other) if other else p
            second[j, k] = second[k, j] = n @ pjk @ n
    cov = second - np.outer(means, means)
    return PhotonMoments(tuple(range(m)), means, cov, leakage=leakage)


@dataclass
class EquivalenceReport:
    passed: int
    failed: int
    refused: int
    max_error: float

    @property
    def ok(self) -> bool:
        return self.failed == 0


def run_equivalence_suite(n_circuits: int = 200, seed: int = 20090101, tol: float = 1e-6, cutoff: int = 40,
                          log=None) -> EquivalenceReport:
    """Compare Gaussian and Fock moments over ``n_circuits`` accepted random circuits.

    Circuits the oracle refuses for excessive leakage are redrawn and counted.
    """
    rng = np.random.default_rng(seed)
    passed = failed = refused = 0
    worst = 0.0
    while passed + failed < n_circuits:
        circuit = random_circuit(rng, cutoff=cutoff)
        try:
            ref = oracle_photon_moments(circuit)
        except TruncationError:
            refused += 1
            continue
        got = run_gaussian(circuit)
        err = max(np.max(np.abs(got.means - ref.means)), np.max(np.abs(got.number_covariance - ref.number_covariance)))
        worst = max(worst, float(err))
        if err <= tol:
            passed += 1
        else:
            failed += 1
            if log:
                log(f"mismatch {err:.3e} on circuit {circuit}")
    return EquivalenceReport(passed, failed, refused, worst)
