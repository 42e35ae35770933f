import json

import pytest

from src.errors import EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE
from src.main import main
from tests.conftest import IC1, REFERENCE_OFFSET, as_controller, pd_gain

SHORT_RUN = {
    "simulation": {
        "dt_s": 0.002,
        "horizon_s": 0.2,
        "min_normal_force_n": 0.02,
        "delta_true_mm": [0.0],
        "initial_conditions": {"IC1": {"px_mm": -20.0, "py_mm": 50.0, "ptheta_deg": 0.0}},
    },
}


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_sample_size_table(capsys):
    assert main(["sample-size", "--eps", "0.5", "--beta", "1e-3", "--d", "39"]) == EXIT_OK
    rows = [line.split() for line in capsys.readouterr().out.splitlines()]
    assert ["N", "110"] in rows
    assert ["mode", "feasibility"] in rows


def test_sample_size_rejects_bad_eps():
    assert main(["sample-size", "--eps", "1.5", "--beta", "1e-3"]) == EXIT_USAGE


def test_missing_required_argument():
    with pytest.raises(SystemExit):
        main(["sample-size", "--beta", "1e-3"])


def test_missing_config_file(tmp_path):
    code = main(["simulate", "--config", str(tmp_path / "absent.json"), "--controller", str(tmp_path / "c.json")])
    assert code == EXIT_USAGE


def test_empty_region_design_is_infeasible(tmp_path, capsys):
    config = _write(
        tmp_path / "config.json",
        {"region": {"alpha": 8.0, "radius": 7.0, "theta_deg": 30.0}, "design": {"designer": "grid", "grid_points": 1}},
    )
    code = main(["design", "--config", config, "--output-dir", str(tmp_path / "out")])
    assert code == EXIT_INFEASIBLE
    report = json.loads(capsys.readouterr().out)
    assert report["certificate"]["status"] == "infeasible"
    assert (tmp_path / "out" / "certificate_grid.json").is_file()
    assert not (tmp_path / "out" / "controller_grid.json").exists()


def test_simulate_then_analyze(tmp_path, params, capsys):
    config = _write(tmp_path / "config.json", SHORT_RUN)
    controller = _write(tmp_path / "controller.json", as_controller(pd_gain(params, IC1 + REFERENCE_OFFSET)).to_dict())
    out = tmp_path / "out"

    assert main(["simulate", "--config", config, "--controller", controller, "--output-dir", str(out)]) == EXIT_OK
    simulated = json.loads(capsys.readouterr().out)
    assert simulated["cases"]["IC1_delta+0.0mm"]["reason"] == "completed"
    assert (out / "trajectory_pd_IC1_delta+0.0mm.csv").is_file()
    assert (out / "summary_pd.json").is_file()

    code = main(
        ["analyze", "--config", config, "--controller", controller, "--output-dir", str(out), "--violation-samples", "0"]
    )
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["violation"] is None
    assert report["cases"]["IC1_delta+0.0mm"]["samples"] == 3
    assert (out / "analysis_pd.json").is_file()
    assert (out / "poles_pd_IC1_delta+0.0mm.csv").is_file()


def test_flipped_controller_exits_nonzero(tmp_path, params, capsys):
    run = json.loads(json.dumps(SHORT_RUN))
    run["simulation"]["horizon_s"] = 1.0
    config = _write(tmp_path / "config.json", run)
    controller = _write(tmp_path / "controller.json", as_controller(pd_gain(params, IC1 + REFERENCE_OFFSET)).to_dict())
    code = main(
        ["simulate", "--config", config, "--controller", controller, "--output-dir", str(tmp_path), "--flip"]
    )
    assert code == EXIT_DIVERGED
    case = json.loads(capsys.readouterr().out)["cases"]["IC1_delta+0.0mm"]
    assert case["reason"] != "completed"
    assert not case["converged"]
