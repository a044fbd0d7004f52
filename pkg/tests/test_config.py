"""Config parsing: both formats, template expansion, rejection paths."""

from __future__ import annotations

import pytest

from ivoleq.config import ConfigError, load_config, parse_config_text

JSON_DOC = """
{
  "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
  "horizon_T": 1.0,
  "investors": [
    {"tau": 0.5, "sigma_Y": 0.3, "beta_Y": 0.1, "X0": 0.2, "Y0": 1.0,
     "mu_Y": 0.1, "kappa_Y": 0.05},
    {"tau": 0.3333333333333333, "sigma_Y": 0.2, "beta_Y": 0.4, "X0": -0.2,
     "Y0": -0.5}
  ]
}
"""

FLAT_DOC = """
# benchmark calibration
vol.mu_v = 0.05
vol.kappa_v = -0.7
vol.sigma_v = -0.3
vol.v0 = 1.0
horizon_T = 1.0
replicate = 2
investor.tau = 0.5
investor.sigma_Y = 0.3
investor.beta_Y = 0.2
"""


class TestJsonFormat:
    def test_explicit_investor_list(self):
        econ = parse_config_text(JSON_DOC)
        assert econ.n_investors == 2
        assert econ.vol.kappa_v == -0.7
        assert econ.horizon == 1.0
        assert econ.investors[0].X0 == 0.2
        assert econ.investors[1].beta_Y == 0.4
        assert econ.investors[1].mu_Y == 0.0

    def test_template_expansion_zeroes_wealth(self):
        doc = """
        {
          "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
          "horizon_T": 1.0,
          "investor": {"tau": 0.5, "sigma_Y": 0.3, "beta_Y": 0.2},
          "replicate": 3
        }
        """
        econ = parse_config_text(doc)
        assert econ.n_investors == 3
        assert all(inv.X0 == 0.0 for inv in econ.investors)
        assert econ.investors[0] == econ.investors[2]

    def test_load_from_disk(self, tmp_path):
        p = tmp_path / "econ.json"
        p.write_text(JSON_DOC, encoding="utf-8")
        assert load_config(p).n_investors == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.json")

    def test_shipped_config_parses(self):
        econ = load_config("configs/table1.json")
        assert econ.n_investors == 2
        assert econ.investors[0].beta_Y == 0.2


class TestFlatFormat:
    def test_template(self):
        econ = parse_config_text(FLAT_DOC)
        assert econ.n_investors == 2
        assert econ.vol.sigma_v == -0.3
        assert econ.investors[0].tau == 0.5

    def test_indexed_investors(self):
        doc = (
            "vol.mu_v = 0.05\nvol.kappa_v = -0.7\nvol.sigma_v = -0.3\n"
            "vol.v0 = 1.0\nhorizon_T = 2.0\n"
            "investors.0.tau = 0.5\ninvestors.0.beta_Y = 0.1\n"
            "investors.1.tau = 0.4\ninvestors.1.beta_Y = 0.3\n"
        )
        econ = parse_config_text(doc)
        assert econ.horizon == 2.0
        assert [inv.tau for inv in econ.investors] == [0.5, 0.4]

    def test_both_formats_agree(self):
        json_doc = """
        {
          "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
          "horizon_T": 1.0,
          "investor": {"tau": 0.5, "sigma_Y": 0.3, "beta_Y": 0.2},
          "replicate": 2
        }
        """
        assert parse_config_text(json_doc) == parse_config_text(FLAT_DOC)

    def test_gap_in_indices(self):
        doc = "vol.mu_v=0.05\nvol.kappa_v=-0.7\nvol.sigma_v=-0.3\nvol.v0=1\nhorizon_T=1\ninvestors.0.tau=0.5\ninvestors.2.tau=0.4\n"
        with pytest.raises(ConfigError, match="without gaps"):
            parse_config_text(doc)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("horizon_T = 1\nhorizon_T = 2\n")

    def test_line_without_assignment(self):
        with pytest.raises(ConfigError, match="expected key = value"):
            parse_config_text("vol.mu_v 0.05\n")


class TestRejection:
    def test_unknown_top_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config_text('{"vol": {}, "horizon_T": 1, "investors": [], "extra": 1}')

    def test_unknown_investor_key(self):
        doc = JSON_DOC.replace('"X0": 0.2', '"X9": 0.2')
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config_text(doc)

    def test_missing_vol_key(self):
        doc = JSON_DOC.replace('"sigma_v": -0.3, "v0": 1.0', '"sigma_v": -0.3')
        with pytest.raises(ConfigError, match="missing keys"):
            parse_config_text(doc)

    def test_missing_tau(self):
        doc = JSON_DOC.replace('"tau": 0.5, ', "")
        with pytest.raises(ConfigError, match="'tau'"):
            parse_config_text(doc)

    def test_both_styles_given(self):
        doc = """
        {
          "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
          "horizon_T": 1.0,
          "investors": [{"tau": 0.5}],
          "investor": {"tau": 0.5}, "replicate": 2
        }
        """
        with pytest.raises(ConfigError, match="not both"):
            parse_config_text(doc)

    def test_template_without_count(self):
        doc = """
        {
          "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
          "horizon_T": 1.0,
          "investor": {"tau": 0.5}
        }
        """
        with pytest.raises(ConfigError, match="together"):
            parse_config_text(doc)

    def test_non_numeric_value(self):
        doc = JSON_DOC.replace('"tau": 0.5', '"tau": "fast"')
        with pytest.raises(ConfigError, match="expected a number"):
            parse_config_text(doc)

    def test_fractional_replicate(self):
        doc = FLAT_DOC.replace("replicate = 2", "replicate = 2.5")
        with pytest.raises(ConfigError, match="integer"):
            parse_config_text(doc)

    def test_bad_horizon(self):
        doc = JSON_DOC.replace('"horizon_T": 1.0', '"horizon_T": -1.0')
        with pytest.raises(ConfigError, match="positive"):
            parse_config_text(doc)

    def test_invalid_json_reported(self):
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config_text('{"vol": ')

    def test_empty_investor_list(self):
        doc = """
        {
          "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
          "horizon_T": 1.0,
          "investors": []
        }
        """
        with pytest.raises(ConfigError, match="nonempty"):
            parse_config_text(doc)

    def test_negative_state_rejected_at_build(self):
        doc = JSON_DOC.replace('"v0": 1.0', '"v0": -1.0')
        with pytest.raises(ConfigError):
            parse_config_text(doc)
