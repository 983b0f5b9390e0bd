"""Scenario configs and runners behind the ``qscatter`` command line.

A config is one JSON object::

    {
      "scenario": "thickness_scan",
      "medium":    {"ell_um": 0.9, "L_um": 6.0, "z_e_um": 0.0, "n_channels": 32},
      "source":    {"F_a": 0.52, "n_mean": 9.13, "pre_sample_eta": 1.0},
      "detection": {"eta": 0.37, "wavelength_m": 1.064e-6, "power_W": 1.2e-4, "bandwidth_Hz": 3.0e5},
      "sweep":     {"axis": "L_um", "values": [3, 6, 9, 12, 20]},
      "realizations": 10000,
      "master_seed": 1,
      "output_dir": "results"
    }

Unknown keys anywhere are errors.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, QScatterError
from .estimators import (
    EnsembleConfig,
    classical_c2,
    cq_direct,
    cq_from_total_variance,
    cq_predicted,
    detected_side_fano,
    entering_source,
    mean_transmission_estimate,
    run_ensemble,
    transmission_fluctuation,
)
from .gaussian import photon_moments
from .scattering import MediumSpec, mean_transmission
from .transport import REFLECTED, TRANSMITTED, DetectionSpec, QuantumSourceSpec, photons_per_mode

SCENARIOS = ("phase_scan", "thickness_scan", "power_scan", "thickness_independence", "validate")
SWEEP_AXES = {
    "phase_scan": ("theta_d_rad",),
    "thickness_scan": ("L_um",),
    "thickness_independence": ("L_um",),
    "power_scan": ("power_W", "n_mean"),
}
TOP_KEYS = {"scenario", "medium", "source", "detection", "sweep", "realizations", "master_seed", "output_dir", "pair"}
MEDIUM_KEYS = {"ell_um": "ell", "L_um": "L", "z_e_um": "z_e", "n_channels": "n_channels"}
SOURCE_KEYS = {"r", "theta_s", "alpha_mag", "theta_d", "F_a", "n_mean", "pre_sample_eta"}
DETECTION_KEYS = {
    "eta": "eta",
    "wavelength_m": "wavelength",
    "power_W": "power",
    "bandwidth_Hz": "bandwidth",
    "detection_frequency_Hz": "detection_frequency",
}
SWEEP_KEYS = {"axis", "values"}

CSV_TAIL = [
    "T_bar",
    "F_a_in",
    "n_mean_in",
    "F_T_detected",
    "F_T_err",
    "F_R_detected",
    "F_R_err",
    "CQ_direct",
    "CQ_direct_err",
    "CQ_var",
    "CQ_var_err",
    "CQ_pred",
    "realizations",
]


@dataclass
class ScenarioConfig:
    scenario: str
    medium: MediumSpec
    source: QuantumSourceSpec
    detection: DetectionSpec
    sweep_axis: str
    sweep_values: list
    realizations: int
    master_seed: int
    output_dir: str
    pre_sample_eta: float = 1.0
    pair: tuple = (0, 1)
    raw: dict = field(default_factory=dict)


class PointFailure(QScatterError):
    def __init__(self, value, cause):
        super().__init__(f"sweep point {value}: {cause}")
        self.value = value
        self.cause = cause


def _check_keys(block: dict, allowed, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object, got {type(block).__name__}")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _number(block, key, where, cast=float):
    try:
        value = cast(block[key])
    except KeyError:
        raise ConfigError(f"{where}.{key}: missing") from None
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected a number, got {block[key]!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{where}.{key}: must be finite")
    return value


def parse_config(text: str, name: str = "<config>") -> ScenarioConfig:
    """Parse and validate a JSON scenario config."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    _check_keys(raw, TOP_KEYS, "config")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"config.scenario: expected one of {list(SCENARIOS)}, got {scenario!r}")
    if scenario == "validate":
        return ScenarioConfig(scenario, None, None, None, "", [], 0, int(raw.get("master_seed", 0)),
                              str(raw.get("output_dir", ".")), raw=raw)

    for block in ("medium", "source", "sweep"):
        if block not in raw:
            raise ConfigError(f"config.{block}: missing")
    med = raw["medium"]
    _check_keys(med, MEDIUM_KEYS, "medium")
    try:
        medium = MediumSpec(
            ell=_number(med, "ell_um", "medium"),
            L=_number(med, "L_um", "medium"),
            z_e=_number(med, "z_e_um", "medium") if "z_e_um" in med else 0.0,
            n_channels=_number(med, "n_channels", "medium", int) if "n_channels" in med else 32,
        )
    except ValueError as exc:
        raise ConfigError(f"medium: {exc}") from None

    src = raw["source"]
    _check_keys(src, SOURCE_KEYS, "source")
    src_args = {k: _number(src, k, "source") for k in src if k != "pre_sample_eta"}
    pre_eta = _number(src, "pre_sample_eta", "source") if "pre_sample_eta" in src else 1.0
    if not 0.0 <= pre_eta <= 1.0:
        raise ConfigError(f"source.pre_sample_eta: must lie in [0, 1], got {pre_eta}")
    try:
        source = QuantumSourceSpec(**src_args)
    except ValueError as exc:
        raise ConfigError(f"source: {exc}") from None

    det = raw.get("detection", {})
    _check_keys(det, DETECTION_KEYS, "detection")
    try:
        detection = DetectionSpec(**{DETECTION_KEYS[k]: _number(det, k, "detection") for k in det})
    except ValueError as exc:
        raise ConfigError(f"detection: {exc}") from None

    sweep = raw["sweep"]
    _check_keys(sweep, SWEEP_KEYS, "sweep")
    axis = sweep.get("axis")
    if axis not in SWEEP_AXES[scenario]:
        raise ConfigError(f"sweep.axis: {scenario} sweeps {list(SWEEP_AXES[scenario])}, got {axis!r}")
    values = sweep.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values: expected a non-empty list")
    try:
        values = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError("sweep.values: expected numbers") from None
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep.values: must be strictly increasing")
    if scenario == "phase_scan" and source.is_target:
        raise ConfigError("source: phase_scan needs the explicit form (r, theta_s, alpha_mag, theta_d)")
    if scenario == "power_scan" and not source.is_target:
        raise ConfigError("source: power_scan needs the target form (F_a, n_mean)")
    if axis == "L_um" and min(values) < medium.ell:
        raise ConfigError(f"sweep.values: thickness below ell={medium.ell}")

    pair = raw.get("pair", [0, 1])
    if not (isinstance(pair, list) and len(pair) == 2 and pair[0] != pair[1]
            and all(isinstance(p, int) and 0 <= p < medium.n_channels for p in pair)):
        raise ConfigError(f"config.pair: expected two different channel indices below {medium.n_channels}")

    realizations = _number(raw, "realizations", "config", int)
    if realizations < 2:
        raise ConfigError("config.realizations: must be >= 2")
    return ScenarioConfig(
        scenario=scenario,
        medium=medium,
        source=source,
        detection=detection,
        sweep_axis=axis,
        sweep_values=values,
        realizations=realizations,
        master_seed=_number(raw, "master_seed", "config", int) if "master_seed" in raw else 0,
        output_dir=str(raw.get("output_dir", ".")),
        pre_sample_eta=pre_eta,
        pair=tuple(pair),
        raw=raw,
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def point_ensemble(cfg: ScenarioConfig, value: float) -> EnsembleConfig:
    """Ensemble config for one sweep point."""
    medium, source = cfg.medium, cfg.source
    if cfg.sweep_axis == "L_um":
        medium = dataclasses.replace(medium, L=value)
    elif cfg.sweep_axis == "theta_d_rad":
        source = dataclasses.replace(source, theta_d=value)
    elif cfg.sweep_axis == "n_mean":
        source = dataclasses.replace(source, n_mean=value)
    elif cfg.sweep_axis == "power_W":
        source = dataclasses.replace(source, n_mean=photons_per_mode(dataclasses.replace(cfg.detection, power=value)))
    return EnsembleConfig(
        medium=medium,
        source=source,
        realizations=cfg.realizations,
        master_seed=cfg.master_seed,
        detection=cfg.detection,
        pairs=(cfg.pair,),
        pre_sample_eta=cfg.pre_sample_eta,
    )


def evaluate_point(cfg: ScenarioConfig, value: float, threads: int = 1) -> tuple[dict, dict]:
    """Run one sweep point; returns (csv row, manifest extras)."""
    ens_cfg = point_ensemble(cfg, value)
    state = entering_source(ens_cfg)
    src = photon_moments(state, [0])
    F_in, n_in = src.fano_total, src.total_mean
    T_bar = mean_transmission(ens_cfg.medium)
    rec = run_ensemble(ens_cfg, threads=threads)
    eta = cfg.detection.eta
    fT = detected_side_fano(rec, TRANSMITTED, eta)
    fR = detected_side_fano(rec, REFLECTED, eta)
    direct = cq_direct(rec, cfg.pair)
    var = cq_from_total_variance(rec, n_in, T_bar)
    row = {
        cfg.sweep_axis: value,
        "T_bar": T_bar,
        "F_a_in": F_in,
        "n_mean_in": n_in,
        "F_T_detected": fT.value,
        "F_T_err": fT.std_error,
        "F_R_detected": fR.value,
        "F_R_err": fR.std_error,
        "CQ_direct": direct.value,
        "CQ_direct_err": direct.std_error,
        "CQ_var": var.value,
        "CQ_var_err": var.std_error,
        "CQ_pred": cq_predicted(F_in, n_in),
        "realizations": rec.realizations,
    }
    c2 = classical_c2(rec) if rec.realizations >= 100 else None
    extras = {
        "classical_c2": None if c2 is None else [c2.value, c2.std_error],
        "transmission_fluctuation": list(_pair(transmission_fluctuation(rec))),
        "sampled_mean_T": list(_pair(mean_transmission_estimate(rec))),
        "CQ_direct_inverse_bandwidth_s": [direct.value / cfg.detection.bandwidth,
                                          direct.std_error / cfg.detection.bandwidth],
        "scattering_events": ((ens_cfg.medium.L + 2 * ens_cfg.medium.z_e) / ens_cfg.medium.ell) ** 2,
    }
    return row, extras


def _pair(est):
    return est.value, est.std_error


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def version_string() -> str:
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run_scenario(cfg: ScenarioConfig, threads: int = 1, out_dir: Optional[str] = None, log=print) -> Path:
    """Run every sweep point, writing ``<scenario>.csv`` and ``<scenario>_manifest.json``.

    A failing point writes a FAILED row, flushes, and re-raises as
    :class:`PointFailure`.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = [cfg.sweep_axis] + CSV_TAIL
    csv_path = out / f"{cfg.scenario}.csv"
    manifest = {
        "scenario": cfg.scenario,
        "config": cfg.raw,
        "master_seed": cfg.master_seed,
        "threads": threads,
        "version": version_string(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "points": [],
    }
    failure = None
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for value in cfg.sweep_values:
            t0 = time.perf_counter()
            try:
                row, extras = evaluate_point(cfg, value, threads)
            except (QScatterError, ValueError, ZeroDivisionError) as exc:
                writer.writerow([_fmt(value), "FAILED"] + [""] * (len(header) - 2))
                fh.flush()
                manifest["points"].append({cfg.sweep_axis: value, "error": str(exc)})
                failure = PointFailure(value, exc)
                break
            writer.writerow([_fmt(row[k]) for k in header])
            fh.flush()
            extras.update({cfg.sweep_axis: value, "wall_time_s": time.perf_counter() - t0})
            manifest["points"].append(extras)
            if log:
                log(f"{cfg.scenario} {cfg.sweep_axis}={value:g}: CQ_direct={row['CQ_direct']:+.4g} "
                    f"CQ_var={row['CQ_var']:+.4g} CQ_pred={row['CQ_pred']:+.4g} F_T={row['F_T_detected']:.4f}")
    manifest["status"] = "FAILED" if failure else "ok"
    (out / f"{cfg.scenario}_manifest.json").write_text(json.dumps(manifest, indent=2, default=float))
    if failure:
        raise failure
    return csv_path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
