#!/usr/bin/env python3
# test_harness_io.py

import json
import math
from pathlib import Path

import numpy as np
import pytest

import config
from besov_mhd import run_cli
from hypotheses import ESTIMATES, HypothesisError
from jobs import JOBS, ExperimentResult
from norm_suite import NormRecord
from report_writer import emit_reports, format_number, jsonable
from run_config import (apply_overrides, config_from_dict, config_hash, dump_config, load_config,
                        resolve_config_path)
from spectral_core import make_grid, random_solenoidal_field, read_checkpoint


def demo_result():
    grid = make_grid(2, 16)
    u = random_solenoidal_field(grid, np.random.default_rng(0))
    return ExperimentResult(
        name="demo", passed=True,
        summary={"drift": math.nan, "nested": {"count": 3, "ok": True}, "values": [1.0, 2.5]},
        series={"t": [0.0, 0.5, 1.0], "energy": [1.0, 0.5, math.inf]},
        norms=[NormRecord(norm_name="besov", s=0.5, p=2.0, r=2.0, value=1.25),
               NormRecord(norm_name="chemin_lerner", s=0.5, p=2.0, r=2.0, rho=4.0, value=2.0)],
        checkpoints={"final": ([u, u.scaled(2.0)], 0.5)})


class TestRunConfig:
    def test_minimal_config_takes_defaults(self):
        cfg = config_from_dict({"experiment": {"name": "solve"}})
        assert cfg.grid.dim == 2
        assert cfg.grid.n == 64
        assert cfg.solver.dt == config.SOLVER_DEFAULTS['dt']
        assert cfg.preset("anything") is None

    def test_trilinear_sigma_two_rejected(self):
        with pytest.raises(HypothesisError, match="trilinear_integral_bound"):
            config_from_dict({"experiment": {"name": "trilinear", "r": 2.0, "sigma": 2.0}})

    def test_weak_strong_indices_accepted(self):
        cfg = config_from_dict({"experiment": {"name": "weakstrong", "p": 1.0, "r": 3.0}})
        assert cfg.experiment.get("r") == 3.0

    def test_mild_solution_q_rejected(self):
        with pytest.raises(HypothesisError, match="mild_solution"):
            config_from_dict({"solver": {"q": 2.0}, "experiment": {"name": "picard"}})

    def test_young_indices_checked_at_load(self):
        with pytest.raises(HypothesisError, match="lorentz_young"):
            config_from_dict({"experiment": {"name": "lorentz-check", "young_p1": 1.0}})
        with pytest.raises(HypothesisError, match="lorentz_young"):
            config_from_dict({"experiment": {"name": "lorentz-check", "young_p1": 3.0, "young_p2": 3.0}})
        cfg = config_from_dict({"experiment": {"name": "lorentz-check", "young_p1": 1.25, "young_p2": 1.5}})
        assert cfg.experiment.get("young_p1") == 1.25

    def test_rejection_quotes_the_estimate(self):
        with pytest.raises(HypothesisError) as info:
            config_from_dict({"experiment": {"name": "lorentz-check", "young_p1": 1.0}})
        assert info.value.estimate == "lorentz_young"
        assert info.value.description == ESTIMATES["lorentz_young"]
        assert str(info.value).startswith(f"lorentz_young [{ESTIMATES['lorentz_young']}]: ")

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="invalid configuration"):
            config_from_dict({"grid": {"size": 32}})

    def test_dump_and_load(self, tmp_path):
        cfg = config_from_dict({"grid": {"n": 32}, "experiment": {"name": "norms", "bank_size": 4},
                                "calibration": {"remainder": 3.5}, "seed": 7})
        path = tmp_path / "cfg.yaml"
        dump_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg
        assert loaded.preset("remainder") == 3.5
        assert config_hash(loaded) == config_hash(cfg)

    def test_hash(self):
        cfg = config_from_dict({})
        tag = config_hash(cfg)
        assert len(tag) == 12
        assert config_hash(apply_overrides(cfg, seed=1)) != tag

    def test_overrides(self, tmp_path):
        cfg = apply_overrides(config_from_dict({}), n=32, T=0.5, norm=1e-3, out=tmp_path, dim=None)
        assert cfg.grid.n == 32
        assert cfg.solver.T == 0.5
        assert cfg.experiment.get("norm") == 1e-3
        assert cfg.output_dir == str(tmp_path)
        with pytest.raises(ValueError, match="unknown override"):
            apply_overrides(cfg, viscosity=2.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="config file not found"):
            load_config(tmp_path / "missing.yaml")

    def test_malformed_files(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("grid: [1, 2\n")
        with pytest.raises(ValueError, match="cannot parse"):
            load_config(bad)
        listed = tmp_path / "list.yaml"
        listed.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="top level must be a mapping"):
            load_config(listed)

    def test_shipped_configs_load(self):
        paths = sorted(Path(config.CONFIGS_DIR).glob("*.yaml"))
        assert paths
        for path in paths:
            cfg = load_config(path)
            assert cfg.experiment.name in JOBS

    def test_acceptance_presets(self):
        solve = load_config(resolve_config_path("solve"))
        assert (solve.grid.n, solve.solver.T, solve.solver.dt) == (128, 1.0, 1e-3)
        assert solve.experiment.get("data") == "random" and solve.experiment.get("energy") == 1.0
        assert solve.experiment.get("order_dts") == [4e-3, 2e-3, 1e-3]
        picard = load_config(resolve_config_path("picard"))
        assert (picard.solver.T, picard.solver.n_times, picard.solver.tol) == (1.0, 64, 1e-8)
        assert (picard.solver.p, picard.solver.r, picard.solver.q) == (2.0, 2.0, 4.0)
        assert picard.experiment.get("norm") == 1e-3
        calderon = load_config(resolve_config_path("calderon"))
        assert calderon.solver.T == 4.0
        assert (calderon.experiment.get("norm"), calderon.experiment.get("threshold")) == (1.0, 1e-2)
        weakstrong = load_config(resolve_config_path("weakstrong"))
        assert (weakstrong.grid.n, weakstrong.experiment.get("coarse_n")) == (128, 64)
        assert weakstrong.experiment.get("perturbation") == 1e-6
        for cfg in (calderon, weakstrong):
            assert cfg.experiment.get("bank_size") >= 50

    def test_quick_presets_share_the_job(self):
        for name in ("solve", "picard", "calderon", "weakstrong"):
            quick = load_config(resolve_config_path(f"{name}_quick"))
            assert quick.experiment.name == name


class TestReports:
    def test_number_formatting(self):
        assert format_number(0.1) == "0.1"
        assert format_number(math.nan) == "nan"
        assert format_number(-math.inf) == "-inf"
        assert format_number(None) == ""
        assert jsonable({"a": np.float64(math.inf), "b": np.arange(2)}) == {"a": "inf", "b": [0, 1]}

    def test_empty_run_writes_summary_only(self, tmp_path):
        paths = emit_reports([], tmp_path)
        assert [p.name for p in paths] == ["run_noconfig.json"]
        assert json.loads(paths[0].read_text())["jobs"] == []

    def test_result_files(self, tmp_path):
        cfg = config_from_dict({"seed": 3})
        tag = config_hash(cfg)
        paths = emit_reports([demo_result()], tmp_path, cfg)
        assert sorted(p.name for p in paths) == sorted([
            f"demo_{tag}.json", f"demo_{tag}_series.csv", f"demo_{tag}_norms.csv", f"demo_{tag}_final.bmhd",
            f"demo_{tag}.md", f"demo_{tag}.html", f"run_{tag}.json"])
        payload = json.loads((tmp_path / f"demo_{tag}.json").read_text())
        assert payload["summary"]["drift"] == "nan"
        assert payload["checkpoints"] == ["final"]
        lines = (tmp_path / f"demo_{tag}_series.csv").read_text().splitlines()
        assert lines == ["t,energy", "0.0,1.0", "0.5,0.5", "1.0,inf"]
        norms = (tmp_path / f"demo_{tag}_norms.csv").read_text().splitlines()
        assert norms[0] == "norm_name,s,p,r,rho,value"
        assert norms[1] == "besov,0.5,2.0,2.0,,1.25"
        fields, t = read_checkpoint(tmp_path / f"demo_{tag}_final.bmhd")
        assert t == 0.5 and len(fields) == 2
        html = (tmp_path / f"demo_{tag}.html").read_text()
        assert "<table>" in html

    def test_emission_is_deterministic(self, tmp_path):
        first = emit_reports([demo_result()], tmp_path / "a")
        second = emit_reports([demo_result()], tmp_path / "b")
        for a, b in zip(first, second):
            assert a.name == b.name
            assert a.read_bytes() == b.read_bytes()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="cannot create output directory"):
            emit_reports([demo_result()], blocker)


class TestCli:
    def test_lp_check(self, tmp_path):
        assert run_cli(["lp-check", "--n", "32", "--out", str(tmp_path)]) == 0
        summaries = list(tmp_path.glob("run_*.json"))
        assert len(summaries) == 1
        assert json.loads(summaries[0].read_text())["passed"] is True

    def test_picard(self, tmp_path):
        args = ["picard", "--config", "picard_quick", "--n", "16", "--T", "0.2", "--out", str(tmp_path)]
        assert run_cli(args) == 0
        assert list(tmp_path.glob("picard_*_final.bmhd"))

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ["lp-check", "--n", "32", "--seed", "3", "--out", str(tmp_path)]
        assert run_cli(args) == 0
        first = {path.name: path.read_bytes() for path in tmp_path.iterdir()}
        assert first
        assert run_cli(args) == 0
        assert {path.name: path.read_bytes() for path in tmp_path.iterdir()} == first

    def test_config_error_exit_code(self, tmp_path):
        assert run_cli(["solve", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            run_cli(["no-such-job"])
