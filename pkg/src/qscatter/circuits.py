"""Small circuit descriptions shared by the Gaussian engine and the Fock oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import gaussian as gs


@dataclass(frozen=True)
class Squeeze:
    mode: int
    r: float
    theta: float = 0.0


@dataclass(frozen=True)
class Displace:
    mode: int
    alpha: complex


@dataclass(frozen=True)
class Interferometer:
    U: np.ndarray


@dataclass(frozen=True)
class Loss:
    mode: int
    eta: float


Operation = Union[Squeeze, Displace, Interferometer, Loss]

MAX_ORACLE_MODES = 3


@dataclass(frozen=True)
class CircuitDescription:
    """An ordered list of primitive operations acting on vacuum."""

    num_modes: int
    operations: tuple = field(default_factory=tuple)
    cutoff: int = 40

    def __post_init__(self):
        if not 1 <= self.num_modes <= MAX_ORACLE_MODES:
            raise ValueError(f"circuits support 1..{MAX_ORACLE_MODES} modes, got {self.num_modes}")
        if self.cutoff < 10:
            raise ValueError(f"cutoff must be >= 10, got {self.cutoff}")
        object.__setattr__(self, "operations", tuple(self.operations))
        for op in self.operations:
            if isinstance(op, Interferometer):
                if np.shape(op.U) != (self.num_modes, self.num_modes):
                    raise ValueError("interferometer size does not match circuit")
            elif not 0 <= op.mode < self.num_modes:
                raise IndexError(f"operation {op} addresses a missing mode")


def run_gaussian(circuit: CircuitDescription) -> gs.PhotonMoments:
    """Evaluate a circuit with the Gaussian engine."""
    state = gs.vacuum_state(circuit.num_modes)
    for op in circuit.operations:
        if isinstance(op, Squeeze):
            state = gs.squeeze(state, op.mode, op.r, op.theta)
        elif isinstance(op, Displace):
            state = gs.displace(state, op.mode, op.alpha)
        elif isinstance(op, Interferometer):
            state = gs.apply_interferometer(state, op.U)
        elif isinstance(op, Loss):
            state = gs.apply_loss(state, [op.mode], op.eta)
        else:
            raise TypeError(f"unknown operation {op!r}")
    return gs.photon_moments(state)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x n unitary via phase-corrected QR of a Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_circuit(
    rng: np.random.Generator,
    max_modes: int = 3,
    r_max: float = 0.8,
    alpha_max: float = 1.5,
    cutoff: int = 40,
) -> CircuitDescription:
    """Draw a random preparation / interferometer / loss circuit.

    Every mode is squeezed and displaced once, then mixed; losses are placed
    either between two interferometers or at the end. Mid-circuit losses are
    limited to one so the oracle's branch count stays bounded.
    """
    m = int(rng.integers(1, max_modes + 1))
    ops: list = []
    for mode in range(m):
        ops.append(Squeeze(mode, float(rng.uniform(0, r_max)), float(rng.uniform(0, 2 * np.pi))))
        alpha = float(rng.uniform(0, alpha_max)) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        ops.append(Displace(mode, complex(alpha)))
    if m > 1:
        ops.append(Interferometer(haar_unitary(m, rng)))
    if rng.random() < 0.5:
        ops.append(Loss(int(rng.integers(m)), float(rng.uniform(0, 1))))
        if m > 1:
            ops.append(Interferometer(haar_unitary(m, rng)))
        else:
            ops.append(Displace(0, complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))))
    for mode in range(m):
        if rng.random() < 0.5:
            ops.append(Loss(mode, float(rng.uniform(0, 1))))
    return CircuitDescription(m, tuple(ops), cutoff)
