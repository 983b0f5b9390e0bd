import json

import numpy as np
import pytest

from qscatter import cli
from qscatter.errors import ConfigError
from qscatter.fock import EquivalenceReport
from qscatter.scenarios import CSV_TAIL, parse_config, read_csv


def base_config(**overrides):
    cfg = {
        "scenario": "thickness_scan",
        "medium": {"ell_um": 0.9, "L_um": 6.0, "z_e_um": 0.0, "n_channels": 8},
        "source": {"F_a": 0.52, "n_mean": 9.13},
        "detection": {"eta": 0.37},
        "sweep": {"axis": "L_um", "values": [3, 6, 9, 12, 20]},
        "realizations": 120,
        "master_seed": 11,
        "output_dir": "out",
    }
    cfg.update(overrides)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(path)


def run(tmp_path, cfg, *extra, out="out"):
    return cli.main(["run", "--config", write(tmp_path, cfg), "--out-dir", str(tmp_path / out), *extra])


class TestConfigErrors:
    def test_json_syntax_reports_position(self, tmp_path, capsys):
        path = write(tmp_path, '{\n  "scenario": "thickness_scan",\n  "medium": {,}\n}')
        assert cli.main(["run", "--config", path]) == cli.EXIT_CONFIG
        err = capsys.readouterr().err
        assert "cfg.json:3:" in err

    def test_unknown_top_level_key(self, tmp_path, capsys):
        assert run(tmp_path, base_config(medum={})) == cli.EXIT_CONFIG
        assert "medum" in capsys.readouterr().err

    def test_unknown_nested_key(self):
        cfg = base_config()
        cfg["medium"]["ell"] = 1.0
        with pytest.raises(ConfigError, match="medium"):
            parse_config(json.dumps(cfg))

    @pytest.mark.parametrize("values", [[], [3, 3, 6], [6, 3], "3,6"])
    def test_sweep_must_be_increasing(self, values):
        with pytest.raises(ConfigError, match="sweep.values"):
            parse_config(json.dumps(base_config(sweep={"axis": "L_um", "values": values})))

    def test_axis_must_match_scenario(self):
        with pytest.raises(ConfigError, match="sweep.axis"):
            parse_config(json.dumps(base_config(sweep={"axis": "power_W", "values": [1e-4]})))

    def test_phase_scan_needs_explicit_source(self):
        cfg = base_config(scenario="phase_scan", sweep={"axis": "theta_d_rad", "values": [0, 1]})
        with pytest.raises(ConfigError, match="explicit"):
            parse_config(json.dumps(cfg))

    def test_power_scan_needs_target_source(self):
        cfg = base_config(scenario="power_scan", source={"r": 0.3, "alpha_mag": 2.0},
                          sweep={"axis": "n_mean", "values": [10, 100]})
        with pytest.raises(ConfigError, match="target"):
            parse_config(json.dumps(cfg))

    @pytest.mark.parametrize("patch", [
        {"realizations": 1},
        {"scenario": "other"},
        {"pair": [1, 1]},
        {"pair": [0, 8]},
        {"detection": {"eta": 1.5}},
        {"source": {"F_a": 0.52, "n_mean": 9.13, "pre_sample_eta": 2}},
        {"medium": {"ell_um": 0.9, "L_um": 0.5}},
    ])
    def test_invalid_blocks(self, patch):
        with pytest.raises(ConfigError):
            parse_config(json.dumps(base_config(**patch)))

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG


class TestRuns:
    def test_byte_identical_and_thread_invariant(self, tmp_path):
        assert run(tmp_path, base_config(), out="a") == cli.EXIT_OK
        assert run(tmp_path, base_config(), out="b") == cli.EXIT_OK
        assert run(tmp_path, base_config(), "--threads", "3", out="c") == cli.EXIT_OK
        a = (tmp_path / "a" / "thickness_scan.csv").read_bytes()
        assert a == (tmp_path / "b" / "thickness_scan.csv").read_bytes()
        assert a == (tmp_path / "c" / "thickness_scan.csv").read_bytes()

    def test_seed_override(self, tmp_path):
        run(tmp_path, base_config(), out="a")
        run(tmp_path, base_config(), "--seed", "12", out="b")
        assert (tmp_path / "a" / "thickness_scan.csv").read_bytes() != (tmp_path / "b" / "thickness_scan.csv").read_bytes()
        manifest = json.loads((tmp_path / "b" / "thickness_scan_manifest.json").read_text())
        assert manifest["master_seed"] == 12 and manifest["config"]["master_seed"] == 12

    def test_schema_and_errors_present(self, tmp_path):
        run(tmp_path, base_config())
        rows = read_csv(tmp_path / "out" / "thickness_scan.csv")
        assert list(rows[0]) == ["L_um"] + CSV_TAIL
        assert len(rows) == 5
        for row in rows:
            for col in ("F_T_err", "F_R_err", "CQ_direct_err", "CQ_var_err"):
                assert np.isfinite(float(row[col])) and float(row[col]) >= 0

    def test_manifest(self, tmp_path):
        run(tmp_path, base_config())
        manifest = json.loads((tmp_path / "out" / "thickness_scan_manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["config"]["sweep"]["values"] == [3, 6, 9, 12, 20]
        assert len(manifest["points"]) == 5
        assert all(p["wall_time_s"] > 0 for p in manifest["points"])
        assert manifest["version"].startswith("0.1.0")

    def test_thickness_trend(self, tmp_path):
        run(tmp_path, base_config())
        rows = read_csv(tmp_path / "out" / "thickness_scan.csv")
        F_T = np.array([float(r["F_T_detected"]) for r in rows])
        F_R = np.array([float(r["F_R_detected"]) for r in rows])
        # both sides stay sub-Poissonian; transmission fades toward 1 as T -> 0
        # while reflection approaches the fully reflected 1 + eta (F - 1)
        assert np.all(F_T < 1) and np.all(F_R < 1)
        assert np.all(np.diff(F_T) > 0)
        assert np.all(np.diff(F_R) < 0)
        assert F_R[-1] > 1 + 0.37 * (0.52 - 1)

    def test_phase_scan_oscillates(self, tmp_path):
        cfg = base_config(
            scenario="phase_scan",
            source={"r": 0.35, "theta_s": 0.0, "alpha_mag": 3.0, "theta_d": 0.0},
            sweep={"axis": "theta_d_rad", "values": list(np.linspace(0, 2 * np.pi, 9))},
            realizations=20,
        )
        assert run(tmp_path, cfg) == cli.EXIT_OK
        F = np.array([float(r["F_a_in"]) for r in read_csv(tmp_path / "out" / "phase_scan.csv")])
        assert F.min() < 1 < F.max()
        assert np.argmin(F) in (0, 4, 8) and np.argmax(F) in (2, 6)

    def test_power_scan_in_watts(self, tmp_path):
        cfg = base_config(scenario="power_scan", sweep={"axis": "power_W", "values": [1e-12, 1e-11]},
                          detection={"eta": 1.0, "bandwidth_Hz": 3e5}, realizations=20)
        assert run(tmp_path, cfg) == cli.EXIT_OK
        rows = read_csv(tmp_path / "out" / "power_scan.csv")
        n = [float(r["n_mean_in"]) for r in rows]
        assert np.isclose(n[1] / n[0], 10)

    def test_infeasible_point_flushes_failed_row(self, tmp_path, capsys):
        cfg = base_config(scenario="power_scan", source={"F_a": 0.3, "n_mean": 100.0},
                          sweep={"axis": "n_mean", "values": [2, 50, 100]}, realizations=20)
        assert run(tmp_path, cfg) == cli.EXIT_PHYSICS
        assert "n_mean=2" in capsys.readouterr().err
        text = (tmp_path / "out" / "power_scan.csv").read_text().splitlines()
        assert text[1].startswith("2.0,FAILED")
        manifest = json.loads((tmp_path / "out" / "power_scan_manifest.json").read_text())
        assert manifest["status"] == "FAILED"


class TestValidate:
    def test_counts_printed(self, capsys):
        assert cli.main(["validate", "--circuits", "4"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "passed=4" in out and "failed=0" in out and "refused=" in out

    def test_failed_validation_exit_code(self):
        assert cli.main(["validate", "--circuits", "2", "--tol", "1e-300"]) == cli.EXIT_VALIDATION

    def test_validate_scenario(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(cli, "run_equivalence_suite", lambda *a, **k: EquivalenceReport(200, 0, 7, 1e-9))
        assert cli.main(["run", "--config", write(tmp_path, {"scenario": "validate"})]) == cli.EXIT_OK
        assert "passed=200" in capsys.readouterr().out
