"""Disorder ensembles and estimators of the spatial quantum correlation C^Q.

Quantum expectation values inside one realization are exact (closed-form
Gaussian moments); the disorder average is the only Monte-Carlo step.
Standard errors come from a bootstrap over realizations with a fixed number
of resamples and a seed derived from the run's master seed, so every number
reported here is reproducible.

Only b != b' pairs are estimated: the b = b' term is dominated by shot noise
and is not a spatial correlation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import gaussian as gs
from .errors import UndefinedCorrelationError
from .scattering import MediumSpec, ScatteringMatrix, derive_seed, mean_transmission, sample_scattering_matrix
from .transport import (
    REFLECTED,
    TRANSMITTED,
    DetectionSpec,
    QuantumSourceSpec,
    propagate,
    side_modes,
    source_prepare,
)

N_BOOTSTRAP = 1000
_BOOTSTRAP_KEY = 2**62


@dataclass(frozen=True)
class EnsembleConfig:
    medium: MediumSpec
    source: QuantumSourceSpec
    realizations: int
    master_seed: int = 0
    detection: Optional[DetectionSpec] = None
    pairs: tuple = ((0, 1),)
    pair_side: str = TRANSMITTED
    input_mode: int = 0
    pre_sample_eta: float = 1.0

    def __post_init__(self):
        if self.realizations < 2:
            raise ValueError(f"need at least 2 realizations, got {self.realizations}")
        n = self.medium.n_channels
        pairs = tuple((int(b), int(bp)) for b, bp in self.pairs)
        for b, bp in pairs:
            if b == bp:
                raise ValueError(f"pair ({b}, {bp}) must reference two different output modes")
            if not (0 <= b < n and 0 <= bp < n):
                raise ValueError(f"pair ({b}, {bp}) outside 0..{n - 1}")
        object.__setattr__(self, "pairs", pairs)
        side_modes(n, self.pair_side)
        if not 0 <= self.input_mode < n:
            raise ValueError(f"input mode {self.input_mode} outside 0..{n - 1}")
        if not 0.0 <= self.pre_sample_eta <= 1.0:
            raise ValueError(f"pre_sample_eta must lie in [0, 1], got {self.pre_sample_eta}")


@dataclass
class EnsembleRecord:
    """Per-realization photon statistics of one ensemble run.

    Array rows are realizations in index order. ``means`` and ``total_variance``
    are keyed by side; ``pair_products`` holds <n_b n_b'> for ``pairs`` on
    ``pair_side``.
    """

    n_channels: int
    source_fano: float
    source_mean: float
    pairs: tuple
    pair_side: str
    transmission: np.ndarray
    means: dict
    total_variance: dict
    pair_products: np.ndarray
    master_seed: int = 0
    T_bar: float = float("nan")

    @property
    def realizations(self) -> int:
        return self.transmission.size

    def total_mean(self, side: str) -> np.ndarray:
        return self.means[side].sum(axis=1)

    def pair_index(self, pair) -> int:
        pair = (int(pair[0]), int(pair[1]))
        for k, p in enumerate(self.pairs):
            if p == pair or p == pair[::-1]:
                return k
        raise KeyError(f"pair {pair} was not recorded; pass it in EnsembleConfig.pairs")

    def bootstrap_weights(self, n_resamples: int = N_BOOTSTRAP) -> np.ndarray:
        """(n_resamples, R) resampling weights, each row summing to one."""
        rng = np.random.default_rng(np.random.SeedSequence(self.master_seed, spawn_key=(_BOOTSTRAP_KEY,)))
        R = self.realizations
        w = np.empty((n_resamples, R))
        for k in range(n_resamples):
            w[k] = np.bincount(rng.integers(0, R, size=R), minlength=R)
        return w / R


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    std_error: float
    realizations_used: int
    estimator_tag: str
    pair: Optional[tuple] = None


@dataclass(frozen=True)
class RangeProfile:
    separations: tuple
    estimates: list
    flatness: float


def _realization(state: gs.GaussianState, S: ScatteringMatrix, a: int, pairs, pair_side: str):
    n = S.n_channels
    out = propagate(state, S, a)
    row = {}
    for side in (TRANSMITTED, REFLECTED):
        pm = gs.photon_moments(out, side_modes(n, side))
        row[side] = (pm.means, pm.total_variance, pm.number_covariance)
    means, _, cov = row[pair_side]
    prods = np.array([cov[b, bp] + means[b] * means[bp] for b, bp in pairs])
    return S.total_transmission(a), row, prods


def record_from_matrices(
    state: gs.GaussianState,
    matrices: Sequence[ScatteringMatrix],
    input_mode: int = 0,
    pairs=((0, 1),),
    pair_side: str = TRANSMITTED,
    master_seed: int = 0,
    T_bar: float = float("nan"),
    threads: int = 1,
) -> EnsembleRecord:
    """Evaluate a single-mode source against explicit scattering realizations.

    ``matrices`` may be a sequence or a callable ``index -> ScatteringMatrix``
    together with a length via ``len``.
    """
    R = len(matrices)
    if R < 1:
        raise ValueError("no realizations")
    pairs = tuple((int(b), int(bp)) for b, bp in pairs)
    src = gs.photon_moments(state, [0])
    n = matrices[0].n_channels
    trans = np.empty(R)
    means = {TRANSMITTED: np.empty((R, n)), REFLECTED: np.empty((R, n))}
    tvar = {TRANSMITTED: np.empty(R), REFLECTED: np.empty(R)}
    prods = np.empty((R, len(pairs)))

    def work(chunk):
        for i in chunk:
            t, row, p = _realization(state, matrices[i], input_mode, pairs, pair_side)
            trans[i] = t
            for side in (TRANSMITTED, REFLECTED):
                means[side][i] = row[side][0]
                tvar[side][i] = row[side][1]
            prods[i] = p

    chunks = [range(k, min(k + 64, R)) for k in range(0, R, 64)]
    if threads <= 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    return EnsembleRecord(
        n_channels=n,
        source_fano=src.fano_total,
        source_mean=src.total_mean,
        pairs=pairs,
        pair_side=pair_side,
        transmission=trans,
        means=means,
        total_variance=tvar,
        pair_products=prods,
        master_seed=int(master_seed),
        T_bar=T_bar,
    )


class _LazyMatrices:
    """Index -> scattering matrix for a (medium, master_seed) pair."""

    def __init__(self, medium: MediumSpec, master_seed: int, count: int):
        self.medium, self.master_seed, self.count = medium, master_seed, count

    def __len__(self):
        return self.count

    def __getitem__(self, i):
        return sample_scattering_matrix(self.medium, derive_seed(self.master_seed, i))


def entering_source(config: EnsembleConfig) -> gs.GaussianState:
    """Prepared source after the optional pre-sample efficiency."""
    state, _, _ = source_prepare(config.source)
    if config.pre_sample_eta < 1.0:
        state = gs.apply_loss(state, [0], config.pre_sample_eta)
    return state


def run_ensemble(config: EnsembleConfig, threads: int = 1) -> EnsembleRecord:
    """Run ``config.realizations`` disorder realizations; result is thread-count invariant."""
    return record_from_matrices(
        entering_source(config),
        _LazyMatrices(config.medium, config.master_seed, config.realizations),
        input_mode=config.input_mode,
        pairs=config.pairs,
        pair_side=config.pair_side,
        master_seed=config.master_seed,
        T_bar=mean_transmission(config.medium),
        threads=threads,
    )


def _bootstrap_se(ensemble: EnsembleRecord, columns: np.ndarray, stat: Callable[[np.ndarray], np.ndarray]) -> float:
    """Bootstrap standard error of ``stat`` applied to column means.

    ``stat`` maps an array of shape (..., k) of column means to values.
    """
    w = ensemble.bootstrap_weights()
    reps = stat(w @ columns)
    return float(np.std(reps, ddof=1))


def _ratio_stat(m):
    return m[..., 0] / (m[..., 1] * m[..., 2]) - 1.0


def cq_direct(ensemble: EnsembleRecord, pair) -> CorrelationEstimate:
    """Disorder-averaged <n_b n_b'> over the product of averaged means, minus one."""
    b, bp = int(pair[0]), int(pair[1])
    if b == bp:
        raise ValueError("cq_direct needs two different output modes")
    k = ensemble.pair_index((b, bp))
    m = ensemble.means[ensemble.pair_side]
    cols = np.column_stack([ensemble.pair_products[:, k], m[:, b], m[:, bp]])
    mean = cols.mean(axis=0)
    if mean[1] <= 0 or mean[2] <= 0:
        raise UndefinedCorrelationError(f"no photons reach output mode {b if mean[1] <= 0 else bp} in this ensemble")
    value = float(_ratio_stat(mean))
    se = _bootstrap_se(ensemble, cols, _ratio_stat)
    return CorrelationEstimate(value, se, ensemble.realizations, "direct", (b, bp))


def cq_from_total_variance(
    ensemble: EnsembleRecord, n_mean_in: float, T_bar: float, side: str = TRANSMITTED
) -> CorrelationEstimate:
    """Invert <Delta n_T^2> = T n + T^2 n^2 C^Q for C^Q.

    For ``side='reflected'`` pass the mean reflection 1 - T_bar as ``T_bar``.
    """
    if not 0.0 < T_bar < 1.0:
        raise ValueError(f"mean transmission must lie in (0, 1), got {T_bar}")
    if not n_mean_in > 0:
        raise ValueError(f"incident photon number must be positive, got {n_mean_in}")
    var = ensemble.total_variance[side]
    denom = T_bar**2 * n_mean_in**2
    value = (var.mean() - T_bar * n_mean_in) / denom
    se = var.std(ddof=1) / math.sqrt(var.size) / denom
    return CorrelationEstimate(float(value), float(se), var.size, "variance_inverted")


def cq_predicted(F_a: float, n_mean: float) -> float:
    """Diffusive-limit prediction (F_a - 1) / <n_a> with C2 = C3 = 0."""
    if n_mean == 0:
        raise ZeroDivisionError("incident photon number must be non-zero")
    return (F_a - 1.0) / n_mean


def range_profile(ensemble: EnsembleRecord, separations: Sequence[int], base: int = 0) -> RangeProfile:
    """cq_direct at pairs (base, base + d) for each separation d.

    ``flatness`` is the largest pairwise difference between the estimates in
    units of the bootstrap standard error of that difference (resampling all
    pairs jointly, so their correlation through shared realizations is kept).
    """
    pairs = [(base, base + int(d)) for d in separations]
    estimates = [cq_direct(ensemble, p) for p in pairs]
    if len(pairs) < 2:
        return RangeProfile(tuple(separations), estimates, 0.0)
    m = ensemble.means[ensemble.pair_side]
    w = ensemble.bootstrap_weights()
    reps = []
    for p in pairs:
        k = ensemble.pair_index(p)
        cols = np.column_stack([ensemble.pair_products[:, k], m[:, p[0]], m[:, p[1]]])
        reps.append(_ratio_stat(w @ cols))
    worst = 0.0
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            se = np.std(reps[i] - reps[j], ddof=1)
            diff = abs(estimates[i].value - estimates[j].value)
            worst = max(worst, diff / se if se > 0 else (0.0 if diff == 0 else math.inf))
    return RangeProfile(tuple(separations), estimates, float(worst))


def _c2_stat(m, n):
    return m[..., 0] / (n * (n - 1)) / (m[..., 1] / n) ** 2 - 1.0


def classical_c2(ensemble: EnsembleRecord, side: str = TRANSMITTED) -> CorrelationEstimate:
    """Classical speckle cross-correlation of the mean intensities, pooled over b != b'.

    Uses E[<n_b><n_b'>] / (E<n_b> E<n_b'>) - 1 with the exchangeable-channel
    pooling sum_{b != b'} <n_b><n_b'> = (sum_b <n_b>)^2 - sum_b <n_b>^2.
    """
    if ensemble.realizations < 100:
        raise ValueError(f"classical_c2 needs at least 100 realizations, got {ensemble.realizations}")
    m = ensemble.means[side]
    n = m.shape[1]
    if n < 2:
        raise ValueError("need at least two output channels")
    total = m.sum(axis=1)
    cols = np.column_stack([total**2 - np.sum(m**2, axis=1), total])
    mean = cols.mean(axis=0)
    if mean[1] <= 0:
        raise UndefinedCorrelationError("zero-intensity ensemble")
    value = float(_c2_stat(mean, n))
    se = _bootstrap_se(ensemble, cols, lambda x: _c2_stat(x, n))
    return CorrelationEstimate(value, se, ensemble.realizations, "classical_c2")


def pair_classical_c2(ensemble: EnsembleRecord, pair) -> float:
    """Classical intensity correlation for one recorded pair (no error estimate)."""
    b, bp = int(pair[0]), int(pair[1])
    m = ensemble.means[ensemble.pair_side]
    return float(np.mean(m[:, b] * m[:, bp]) / (m[:, b].mean() * m[:, bp].mean()) - 1.0)


def transmission_fluctuation(ensemble: EnsembleRecord) -> CorrelationEstimate:
    """<T_a^2> / <T_a>^2 - 1: total-transmission fluctuation over disorder."""
    t = ensemble.transmission
    cols = np.column_stack([t * t, t])
    stat = lambda x: x[..., 0] / x[..., 1] ** 2 - 1.0  # noqa: E731
    value = float(stat(cols.mean(axis=0)))
    return CorrelationEstimate(value, _bootstrap_se(ensemble, cols, stat), t.size, "transmission_fluctuation")


def mean_transmission_estimate(ensemble: EnsembleRecord) -> CorrelationEstimate:
    t = ensemble.transmission
    return CorrelationEstimate(float(t.mean()), float(t.std(ddof=1) / math.sqrt(t.size)), t.size, "mean_T")


def detected_side_fano(ensemble: EnsembleRecord, side: str, eta: float) -> CorrelationEstimate:
    """Ensemble Fano factor of the total photon number on ``side`` after efficiency ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    cols = np.column_stack([ensemble.total_variance[side], ensemble.total_mean(side)])

    def stat(x):
        return (eta**2 * x[..., 0] + eta * (1 - eta) * x[..., 1]) / (eta * x[..., 1])

    mean = cols.mean(axis=0)
    if mean[1] <= 0 or eta == 0:
        raise UndefinedCorrelationError(f"no detected photons on the {side} side")
    return CorrelationEstimate(float(stat(mean)), _bootstrap_se(ensemble, cols, stat), ensemble.realizations,
                               f"fano_{side}")
