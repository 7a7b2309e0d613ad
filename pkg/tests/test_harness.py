import json
from pathlib import Path

import numpy as np
import pytest

from polyflow.cli import main
from polyflow.errors import ConfigError
from polyflow.harness import (load_config, polygonal_convergence,
                              rotation_exact, rotation_flow,
                              scenario_convergence, translation_flow,
                              validate_config, verify)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def base_config(**over):
    cfg = {
        "schema": 1,
        "scenario": "rotation",
        "seed": 0,
        "time": {"horizon": 1.0},
    }
    cfg.update(over)
    return cfg


class TestConfigValidation:
    def test_ok(self):
        validate_config(base_config())

    def test_missing_field_named(self):
        with pytest.raises(ConfigError, match="time"):
            validate_config({"schema": 1, "scenario": "rotation"})

    def test_bad_schema(self):
        with pytest.raises(ConfigError, match="schema"):
            validate_config(base_config(schema=99))

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError, match="scenario"):
            validate_config(base_config(scenario="starlings"))

    def test_negative_horizon_named(self):
        with pytest.raises(ConfigError, match="time.horizon"):
            validate_config(base_config(time={"horizon": -1.0}))

    def test_epidemic_field_names(self):
        cfg = base_config(scenario="epidemic",
                          time={"horizon": 1.0, "macro_step": 0.1},
                          params={"infection_rate": 1.0})
        with pytest.raises(ConfigError, match="params.recovery_rate"):
            validate_config(cfg)

    def test_predator_prey_negative_dx_equivalent(self):
        cfg = base_config(scenario="predator_prey",
                          time={"horizon": 0.1, "macro_step": 0.1},
                          params={
                              "dim": 1, "alpha": 1.0, "escape_radius": 0.5,
                              "search_radius": 0.5, "feeding_radius": 0.5,
                              "feeding_rate": 0.0, "prey_radius": 0.5,
                              "prey_amp": 1.0, "cells": [100],
                              "box": [[1.0, -1.0]],
                          })
        with pytest.raises(ConfigError, match="params.box"):
            validate_config(cfg)


class TestConvergence:
    def test_translation_exact(self):
        flow = translation_flow()
        x0 = (np.array([0.5]), np.array([0.25]))
        table = polygonal_convergence(flow, 0.0, x0, 1.0,
                                      levels=list(range(6)))
        assert table.exact
        assert table.converged
        assert all(r.error == 0.0 for r in table.rows)

    def test_rotation_first_order(self):
        flow = rotation_flow()
        x0 = (np.array([1.0]), np.array([0.0]))
        table = polygonal_convergence(flow, 0.0, x0, 1.0,
                                      levels=list(range(8)),
                                      reference=rotation_exact(1.0))
        orders = table.observed_orders()
        assert 0.9 <= float(np.median(orders)) <= 1.5
        assert table.converged

    def test_epidemic_self_refinement(self):
        cfg = json.loads((CONFIG_DIR / "epidemic.json").read_text())
        cfg["params"]["cells"] = 320
        cfg["time"] = {"horizon": 0.4, "macro_step": 0.05}
        table = scenario_convergence(cfg, levels=5)
        assert table.converged
        assert float(np.median(table.observed_orders())) >= 0.9

    def test_needs_three_levels(self):
        flow = translation_flow()
        with pytest.raises(ValueError):
            polygonal_convergence(flow, 0.0,
                                  (np.array([0.0]), np.array([0.0])), 1.0,
                                  levels=[0, 1])


class TestVerifyReports:
    def test_deterministic_bytes(self):
        cfg = base_config(verify=["ode", "claw", "bv"])
        r1 = verify(cfg).to_json()
        r2 = verify(cfg).to_json()
        assert r1 == r2

    def test_checks_sorted_and_anchored(self):
        cfg = base_config(verify=["ode"])
        report = verify(cfg)
        data = json.loads(report.to_json())
        names = [c["name"] for c in data["checks"]]
        assert names == sorted(names)
        assert all(c["anchor"] for c in data["checks"])

    def test_unknown_suite(self):
        with pytest.raises(ConfigError, match="suite"):
            verify(base_config(verify=["nope"]))

    def test_all_pass(self):
        cfg = base_config(verify=["metric", "ode", "renewal", "ibvp",
                                  "claw", "measures", "bv"])
        report = verify(cfg)
        failing = [c.name for c in report.checks if not c.passed]
        assert failing == []


class TestCli:
    def test_run_epidemic_writes_outputs(self, tmp_path):
        cfg = json.loads((CONFIG_DIR / "epidemic.json").read_text())
        cfg["params"]["cells"] = 100
        cfg["time"] = {"horizon": 0.2, "macro_step": 0.04}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        code = main(["run", str(path), "--out", str(tmp_path / "out"),
                     "--quiet"])
        assert code == 0
        assert (tmp_path / "out" / "epidemic_trajectory.csv").exists()
        assert (tmp_path / "out" / "epidemic_cohort_final.csv").exists()
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["schema"] == 1
        assert summary["scenario"] == "epidemic"
        assert "runtime_s" in summary
        header = (tmp_path / "out"
                  / "epidemic_trajectory.csv").read_text().splitlines()[0]
        for col in ("t", "S", "I", "R", "l1", "linf", "tv", "alpha1_margin",
                    "alphainf_margin", "alphatv_margin"):
            assert col in header.split(",")

    def test_run_predator_prey_monotone_mass(self, tmp_path):
        code = main(["run", str(CONFIG_DIR / "predator_prey_1d.json"),
                     "--out", str(tmp_path / "out"), "--quiet"])
        assert code == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        mono = [c for c in summary["checks"]
                if c["name"] == "prey-mass-monotone"]
        assert mono and mono[0]["value"] is True
        traj = (tmp_path / "out" / "predator_prey_trajectory.csv").read_text()
        assert traj.splitlines()[0].split(",")[0] == "t"

    def test_domain_exit_maps_to_exit_2(self, tmp_path, monkeypatch):
        from polyflow import harness
        from polyflow.errors import DomainExit

        def boom(params, schedule):
            raise DomainExit("left the ball", step=3, time=0.25)

        monkeypatch.setattr(harness, "run_epidemic", boom)
        cfg = json.loads((CONFIG_DIR / "epidemic_sir.json").read_text())
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", str(path), "--out", str(tmp_path / "out"),
                     "--quiet"]) == 2

    def test_invalid_config_exit_3(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(base_config(time={"horizon": -2.0})))
        code = main(["run", str(path), "--quiet"])
        assert code == 3
        assert "time.horizon" in capsys.readouterr().err

    def test_missing_file_exit_3(self):
        assert main(["run", "/nonexistent/cfg.json", "--quiet"]) == 3

    def test_verify_writes_report(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(base_config(verify=["bv"])))
        code = main(["verify", str(path), "--out", str(tmp_path / "out"),
                     "--quiet"])
        assert code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["checks"]

    def test_converge_translation(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(base_config(scenario="translation")))
        code = main(["converge", str(path), "--out", str(tmp_path / "out"),
                     "--levels", "5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "exact" in out
        assert (tmp_path / "out" / "convergence.csv").exists()

    def test_bundled_configs_validate(self):
        for name in ("epidemic.json", "epidemic_sir.json",
                     "predator_prey_1d.json", "predator_prey_2d.json",
                     "rotation.json", "verify_all.json"):
            load_config(CONFIG_DIR / name)
