import math

import numpy as np
import pytest

import greybox

SM1 = {"R_win": 0.002, "C_in": 1.5e7, "A_ih": 1.0, "B_ac": 1.0, "D_solar": 0.5}


def test_version_and_names():
    assert greybox.__version__ == "0.1.0"
    assert greybox.parameter_names("SM1") == ["R_win", "C_in", "A_ih", "B_ac", "D_solar"]
    assert len(greybox.parameter_names("SM4")) == 12
    assert greybox.disturbance_labels("SM2") == ["Q_IHL", "Q_solar", "T_sol_w", "T_am"]


def test_assemble_and_discretize():
    params = dict(SM1, R_win=0.01, C_in=1e6)
    a, b, d, c = greybox.assemble("SM1", params)
    assert a[0, 0] == pytest.approx(-1e-4)
    disc = greybox.discretize("SM1", params, 600.0)
    assert disc["Ad"][0, 0] == pytest.approx(0.94)
    assert disc["stable"]
    with pytest.raises(greybox.GreyboxError, match="UnstableDiscretization"):
        greybox.discretize("SM1", dict(params, C_in=1e4), 600.0)


def test_electrical_and_metrics():
    assert greybox.hvac_power(-10500.0) == pytest.approx(3000.0)
    assert greybox.reactive_power(1000.0, 0.95) == pytest.approx(328.68, abs=0.005)
    score = greybox.mape([20.0, 20.0], [19.0, 21.0])
    assert score["mape"] == pytest.approx(5.0)
    assert score["accuracy"] == pytest.approx(95.0)
    assert len(greybox.aggregate_phvac([3000.0] * 4320, 600)) == 240
    with pytest.raises(greybox.GreyboxError, match="AllPointsExcluded"):
        greybox.mape([0.0, 0.0], [0.0, 0.0], 1e-9)


def test_simulate_and_refit_sm1():
    trace = greybox.simulate("SM1", SM1, days=21, weather_seed=42)
    y = np.asarray(trace["y"])
    assert y.shape == (21 * 144,)
    w = np.column_stack([trace["in_" + name] for name in greybox.disturbance_labels("SM1")])
    fit = greybox.estimate("NLS", "SM1", y, np.asarray(trace["q_hvac"]), w, 600.0, starts=4,
                           seed=1)
    assert fit["converged"]
    got = greybox.to_aggregates("SM1", fit["theta"])
    want = greybox.to_aggregates("SM1", SM1)
    for name, value in want.items():
        assert math.isclose(got[name], value, rel_tol=5e-3), name


def test_truth_simulation_is_deterministic():
    truth = greybox.default_sm4_truth()
    a = greybox.simulate("SM4", truth, days=3, measurement_std=0.05, noise_seed=3)
    b = greybox.simulate("SM4", truth, days=3, measurement_std=0.05, noise_seed=3)
    assert a["y"] == b["y"]
    assert np.asarray(a["states"]).shape == (3 * 144, 4)


def test_cli_exit_codes(tmp_path):
    assert greybox.run_cli(["--out-dir", str(tmp_path), "generate", "--setpoints", "22"]) == 0
    assert (tmp_path / "truth_sp22.csv").exists()
    missing = tmp_path / "none.yaml"
    code = greybox.run_cli(["--out-dir", str(tmp_path), "forward-sim", "--result", str(missing),
                            "--season", "Winter", "--setpoint", "18"])
    assert code == 2
