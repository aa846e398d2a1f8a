import json
import math

import numpy as np
import pytest

import cpsim


def test_default_config_round_trips():
    cfg = json.loads(cpsim.default_config())
    assert cfg["schema_version"] == 1
    assert json.loads(cpsim.normalize_config(json.dumps(cfg))) == cfg


def test_config_helper_overrides_sections():
    cfg = json.loads(cpsim.config(master_seed=7, age={"capacity_kbps": 200}))
    assert cfg["master_seed"] == 7
    assert cfg["age"]["capacity_kbps"] == 200
    assert cfg["age"]["calibration_prob"] == 0.1


def test_bad_config_raises_with_field():
    with pytest.raises(cpsim.CpsimError) as info:
        cpsim.normalize_config('{"age": {"capacity_kbps": -1}}')
    assert info.value.code == "validation"
    assert "capacity_kbps" in info.value.field


def test_link_numbers():
    link = cpsim.median_link()
    assert link["snr"] == pytest.approx(1397.3789352914885, rel=1e-12)
    c = cpsim.capacity(2e6, 0.1, 4e-21, link["channel_gain"])
    assert c == pytest.approx(link["capacity_bps"], rel=1e-12)
    assert c == pytest.approx(2e6 * math.log2(1 + link["snr"]), rel=1e-12)


def test_age_formulas():
    assert cpsim.aoi(0.5, 0.1) == pytest.approx(0.35)
    r = cpsim.aopt_cycle([(0.5, 0.1, 3), (1.0, 0.2, 2), (0.5, 0.1, 0)], p1=0.2, calibration_interval_s=4.0)
    assert r["k_hat"] == 1
    assert r["g_khat"] == 2
    assert r["aopt_streaming"] == pytest.approx(2 * (0.5 + 0.2))
    assert r["aopt_calibration"] == pytest.approx(2 * (4.0 + 0.6) / 2)
    assert r["aopt_cycle"] == pytest.approx(0.2 * r["aopt_calibration"] + 0.8 * r["aopt_streaming"])
    idle = cpsim.aopt_cycle([(0.5, 0.1, 0)])
    assert idle["k_hat"] is None and idle["aopt_cycle"] == 0.0


def test_phase_occupancies_sum_to_one():
    pi = cpsim.phase_occupancies(1.0, math.log(30), 0.3, 0.1)
    assert sum(pi) == pytest.approx(1.0)
    assert pi[1] == pytest.approx(0.1 * (1 - pi[0]))


def test_pose_from_noiseless_points():
    fx = fy = 800.0
    cx, cy = 640.0, 360.0
    # Camera 6 m above the ground looking straight down.
    r = np.diag([1.0, -1.0, -1.0])
    t = -r @ np.array([0.0, 0.0, 6.0])
    world = np.array([[x, y] for x in (-2.0, 0.0, 2.0) for y in (-1.0, 1.5, 3.0)])
    pts = (r @ np.c_[world, np.zeros(len(world))].T).T + t
    image = np.c_[fx * pts[:, 0] / pts[:, 2] + cx, fy * pts[:, 1] / pts[:, 2] + cy]
    _, rot, trans = cpsim.estimate_pose(image, world, (fx, fy, cx, cy))
    assert np.allclose(rot, r, atol=1e-8)
    assert np.allclose(trans, t, atol=1e-8)


def test_fit_proxy_recovers_anchors():
    fit = cpsim.fit_proxy([(5.0, 60.0), (20.0, 80.0), (60.0, 85.0)])
    assert fit["max_abs_residual"] < 1e-6


def test_optimize_is_feasible():
    sol = cpsim.optimize()
    for phase in ("calibration", "streaming"):
        assert sol[phase]["feasible"]
        assert sol[phase]["bandwidth_hz"] > 0


def test_simulate_is_deterministic():
    a = cpsim.simulate(cpsim.config(master_seed=3))
    assert a == cpsim.simulate(cpsim.config(master_seed=3))
    assert a != cpsim.simulate(cpsim.config(master_seed=4))


def test_calibrate_and_fuse():
    cal = cpsim.calibrate()
    assert cal["failures"] == 0
    assert cal["rotation_error_deg"] < 10
    fused = cpsim.fuse()
    assert fused["moda"] > 50


def test_one_point_sweep():
    assert "calibration_budget" in cpsim.sweep_presets()
    table = cpsim.run_sweep(cpsim.default_config(), "calibration_budget", ["30"], 1)
    assert table["header"][:3] == ["axis_value", "repetition", "status"]
    assert len(table["rows"]) == 1 and table["rows"][0][2] == "ok"
