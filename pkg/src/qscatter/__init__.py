"""Quantum-optical transport of non-classical light through random media.

Gaussian-state photon statistics, a truncated-Fock cross-check, random
scattering-matrix ensembles, and estimators of the spatial quantum
correlation C^Q.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    InfeasibleSourceError,
    QScatterError,
    TruncationError,
    UndefinedCorrelationError,
)
from .gaussian import GaussianState, PhotonMoments, photon_moments  # noqa: E402
from .scattering import MediumSpec, ScatteringMatrix, sample_scattering_matrix  # noqa: E402
from .transport import DetectionSpec, QuantumSourceSpec, propagate, source_prepare  # noqa: E402
from .estimators import EnsembleConfig, cq_direct, cq_from_total_variance, cq_predicted, run_ensemble  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "InfeasibleSourceError",
    "QScatterError",
    "TruncationError",
    "UndefinedCorrelationError",
    "GaussianState",
    "PhotonMoments",
    "photon_moments",
    "MediumSpec",
    "ScatteringMatrix",
    "sample_scattering_matrix",
    "DetectionSpec",
    "QuantumSourceSpec",
    "propagate",
    "source_prepare",
    "EnsembleConfig",
    "cq_direct",
    "cq_from_total_variance",
    "cq_predicted",
    "run_ensemble",
]
