"""Command line surface: golden outputs, manifests, exit codes."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ivoleq.cli import main
from ivoleq import __version__
from ivoleq.equilibrium import discrete_mpr_gap, mpr_curve, term_structure
from ivoleq.model import derive_aggregates

ROOT = Path(__file__).resolve().parents[1]
CONFIG = str(ROOT / "configs" / "table1.json")
GOLDEN = ROOT / "tests" / "golden"

BAD_FELLER = """
{
  "vol": {"mu_v": 0.001, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
  "horizon_T": 1.0,
  "investor": {"tau": 0.5, "sigma_Y": 0.3, "beta_Y": 0.2},
  "replicate": 2
}
"""


class TestTables:
    def test_table1_golden_bytes(self, tmp_path):
        assert main(["table1", CONFIG, "--out", str(tmp_path)]) == 0
        got = (tmp_path / "table1.csv").read_bytes()
        assert got == (GOLDEN / "table1.csv").read_bytes()

    def test_table2_golden_bytes(self, tmp_path):
        assert main(["table2", CONFIG, "--out", str(tmp_path)]) == 0
        got = (tmp_path / "table2.csv").read_bytes()
        assert got == (GOLDEN / "table2.csv").read_bytes()

    def test_console_uses_infinity_glyph(self, capsys):
        assert main(["table1", CONFIG]) == 0
        out = capsys.readouterr().out
        assert "∞" in out
        assert "inf" not in out
        assert "0.0800" in out and "0.0188" in out

    def test_csv_file_spells_inf(self, tmp_path):
        main(["table1", CONFIG, "--out", str(tmp_path)])
        text = (tmp_path / "table1.csv").read_text()
        assert "inf,0.0800,0.0188" in text
        assert "∞" not in text

    def test_json_payload_full_precision(self, capsys):
        assert main(["table1", CONFIG, "--format", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        rows = doc["table1"]
        assert rows[0]["investors"] == 2
        assert rows[-1]["investors"] is None
        assert rows[0]["rate_gap"] == pytest.approx(0.04, abs=1e-12)
        assert rows[-1]["rate_gap"] == pytest.approx(0.08, abs=1e-12)
        # more digits than the 4-decimal table keeps
        assert rows[0]["mpr_gap"] != round(rows[0]["mpr_gap"], 4)

    def test_manifest_records_run(self, tmp_path):
        main(["table1", CONFIG, "--out", str(tmp_path), "--seed", "9"])
        manifest = json.loads((tmp_path / "table1_manifest.json").read_text())
        assert manifest["command"] == "table1"
        assert manifest["seed"] == 9
        assert manifest["version"] == __version__
        assert manifest["outputs"] == [str(tmp_path / "table1.csv")]
        assert manifest["config"].endswith("table1.json")


class TestCurves:
    def test_files_match_library_values(self, tmp_path):
        assert main(["curves", CONFIG, "--out", str(tmp_path), "--points", "5"]) == 0
        econ_agg = derive_aggregates(__import__("ivoleq").load_config(CONFIG))

        with open(tmp_path / "term_structure.csv", newline="") as fh:
            ts_rows = list(csv.DictReader(fh))
        assert len(ts_rows) == 5
        assert float(ts_rows[0]["maturity"]) == 0.0
        assert float(ts_rows[0]["bond_price"]) == 1.0
        ts = term_structure(econ_agg, 0.0, np.linspace(0.0, 1.0, 5))
        for row, price in zip(ts_rows, ts.incomplete):
            assert float(row["bond_price"]) == pytest.approx(price, abs=1e-10)

        with open(tmp_path / "mpr_curve.csv", newline="") as fh:
            mpr_rows = list(csv.DictReader(fh))
        gap0 = discrete_mpr_gap(econ_agg, 1.0) * 1.0
        assert float(mpr_rows[0]["gap"]) == pytest.approx(gap0, abs=1e-10)

        manifest = json.loads((tmp_path / "curves_manifest.json").read_text())
        assert len(manifest["outputs"]) == 2


class TestValidate:
    def test_passing_economy(self, capsys):
        assert main(["validate", CONFIG]) == 0
        assert "pass" in capsys.readouterr().out

    def test_feller_violation_fails(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(BAD_FELLER)
        assert main(["validate", str(cfg)]) == 1
        assert "state_positivity" in capsys.readouterr().out


class TestVerifyCommands:
    def test_clearing_suite(self, tmp_path, capsys):
        rc = main(["verify", CONFIG, "--suite", "clearing", "--n-paths", "300"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "clearing_max_residual" in out

    def test_terminal_command(self, capsys):
        rc = main(["terminal", CONFIG, "--n-paths", "400"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "schedule_start_matches_window_coefficient" in out
        assert "terminal_clearing_residual" in out


class TestExitCodes:
    def test_missing_config(self, tmp_path, capsys):
        assert main(["table1", str(tmp_path / "absent.json")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unparseable_config(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text('{"vol": oops')
        assert main(["table1", str(cfg)]) == 2

    def test_heterogeneous_config_rejected_for_tables(self, tmp_path, capsys):
        cfg = tmp_path / "mixed.json"
        cfg.write_text(
            """
            {
              "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
              "horizon_T": 1.0,
              "investors": [
                {"tau": 0.5, "beta_Y": 0.2}, {"tau": 0.4, "beta_Y": 0.3}
              ]
            }
            """
        )
        with pytest.raises(SystemExit):
            main(["table1", str(cfg)])
