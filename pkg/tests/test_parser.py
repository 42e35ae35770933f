import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.config import ExperimentConfig
from src.errors import ConfigError
from src.model.params import HandObjectParams
from src.utils import parser

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "config" / "default.json"


class TestConfigIngestion:
    def test_defaults_without_a_file(self):
        assert parser.load_config(None).model_dump() == ExperimentConfig().model_dump()

    def test_shipped_config_parses(self):
        cfg = parser.load_config(DEFAULT_CONFIG)
        assert cfg.region.alpha == 0.5
        assert cfg.design.optimality.free == ["q1", "q2", "q3", "q4"]

    def test_unknown_key_is_rejected(self):
        with pytest.raises(ConfigError):
            parser.parse_config({"hand": {"finger_count": 3}})

    def test_unknown_box_coordinate(self):
        with pytest.raises(ConfigError):
            parser.parse_config({"box": {"free": ["q1", "yaw"]}})

    def test_joint_sweep_and_gamma_floor_are_checked(self):
        with pytest.raises(ConfigError):
            parser.parse_config({"box": {"joint_sweep": ["q1"]}})
        with pytest.raises(ConfigError):
            parser.parse_config({"design": {"gamma_floor": -1.0e7}})
        with pytest.raises(ConfigError):
            parser.parse_config({"design": {"gamma_floor": 0.0}})
        assert parser.parse_config({"design": {"gamma_floor": -1.0e6}}).design.gamma_floor == -1.0e6

    def test_unordered_range(self):
        with pytest.raises(ConfigError):
            parser.parse_config({"box": {"py_range_mm": [50.0, 20.0]}})

    def test_file_format_checks(self):
        with pytest.raises(ConfigError):
            parser.parse_config_file("experiment.yaml", b"region: {}")
        with pytest.raises(ConfigError):
            parser.parse_config_file("experiment.json", b"{not json")
        assert parser.parse_config_file("experiment.json", b"").model_dump() == ExperimentConfig().model_dump()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parser.load_config(tmp_path / "absent.json")


class TestConversions:
    def test_units_are_converted_to_si(self):
        params = parser.to_params(ExperimentConfig())
        defaults = HandObjectParams()
        np.testing.assert_allclose(params.base_positions, defaults.base_positions)
        np.testing.assert_allclose(params.link_inertias, defaults.link_inertias)
        assert params.object_inertia == pytest.approx(defaults.object_inertia)
        assert params.object_mass == pytest.approx(0.02)
        assert params.delta_bounds == pytest.approx((-0.004, 0.005))
        assert params.joint_limits == pytest.approx((-math.pi, math.pi))

    def test_invalid_hand_parameters(self):
        cfg = parser.parse_config({"hand": {"object_mass_g": -1.0}})
        with pytest.raises(ConfigError):
            parser.to_params(cfg)

    def test_region_and_equilibrium(self):
        cfg = ExperimentConfig()
        region = parser.to_region(cfg)
        assert region.theta == pytest.approx(math.radians(30.0))
        np.testing.assert_allclose(parser.equilibrium(cfg), [0.0, 0.035, 0.0])

    def test_grid_of_offsets(self):
        cfg = ExperimentConfig()
        deltas = parser.grid_deltas(cfg, parser.to_params(cfg))
        assert len(deltas) == 46
        assert deltas[0] == pytest.approx(-0.004) and deltas[-1] == pytest.approx(0.005)

    def test_simulation_cases(self):
        cases = parser.sim_configs(ExperimentConfig())
        assert [c.name for c in cases] == [
            "IC1_delta-4.0mm", "IC1_delta+0.0mm", "IC1_delta+5.0mm",
            "IC2_delta-4.0mm", "IC2_delta+0.0mm", "IC2_delta+5.0mm",
        ]
        first = cases[0]
        np.testing.assert_allclose(first.x0, [-0.02, 0.05, 0.0])
        np.testing.assert_allclose(first.x_ref, [0.02, 0.05, math.radians(11.0)])
        assert first.delta_true == pytest.approx(-0.004)

    def test_box_uses_configured_free_coordinates(self):
        cfg = ExperimentConfig()
        params = parser.to_params(cfg)
        assert parser.to_box(cfg, params).free_names == ["q1", "q2", "q3", "q4", "py", "delta"]
        assert parser.to_box(cfg, params, free=["px"]).free_names == ["px"]


class TestArtifacts:
    def test_config_hash_is_stable(self):
        a = parser.config_hash(ExperimentConfig())
        assert a == parser.config_hash(parser.parse_config({}))
        assert len(a) == 64
        assert a != parser.config_hash(parser.parse_config({"design": {"seed": 1}}))

    def test_canonical_json_sorts_keys(self):
        text = parser.canonical_json({"b": 1, "a": [1.5, 2]})
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")

    def test_json_round_trip(self, tmp_path):
        path = parser.write_json(tmp_path / "nested" / "report.json", {"gamma": -0.5, "seed": 3})
        assert parser.read_json(path) == {"gamma": -0.5, "seed": 3}
        with pytest.raises(ConfigError):
            parser.read_json(tmp_path / "missing.json")

    def test_invalid_json_artifact(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            parser.read_json(path)

    def test_csv_tables(self, tmp_path):
        frame = pd.DataFrame({"t": [0.0, 0.001], "px": [0.1, 0.2]})
        path = parser.write_csv(tmp_path / "table.csv", frame)
        assert path.read_text().splitlines()[1] == "0.000000000e+00,1.000000000e-01"
        pd.testing.assert_frame_equal(parser.read_csv(path), frame)
        with pytest.raises(ConfigError):
            parser.parse_table("table.tsv", b"")

    def test_default_config_file_matches_schema_defaults(self):
        shipped = json.loads(DEFAULT_CONFIG.read_text())
        shipped.pop("output_dir")
        assert parser.parse_config(shipped).model_dump() == ExperimentConfig().model_dump()
