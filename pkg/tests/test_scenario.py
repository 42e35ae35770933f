import numpy as np
import pytest

from src.errors import DomainError
from src.model.kinematics import inverse_kinematics
from src.scenario.box import (
    COORDINATES,
    DELTA,
    JOINTS,
    POSE,
    Scenario,
    ScenarioSet,
    UncertaintyBox,
    delta_grid_scenarios,
    draw_scenarios,
    operating_region_box,
)
from src.scenario.lipschitz import estimate_dynamics_lipschitz
from src.scenario.rng import ScenarioRng
from tests.conftest import NOMINAL_POSE


class TestRng:
    def test_same_seed_same_stream(self):
        a = ScenarioRng(42).stream("scenarios").random(5)
        b = ScenarioRng(42).stream("scenarios").random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_independent(self):
        rng = ScenarioRng(42)
        assert not np.allclose(rng.stream("scenarios").random(5), rng.stream("violation").random(5))
        assert not np.allclose(rng.stream("scenarios", 0).random(5), rng.stream("scenarios", 1).random(5))

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            ScenarioRng(-1)


class TestBox:
    def test_default_box_covers_nominal_grasp(self, box):
        assert box.free_names == ["q1", "q2", "q3", "q4", "py", "delta"]
        assert box.n_xi == 6
        assert box.joints_sampled
        assert np.all(box.lower <= box.upper)
        assert box.contains(box.nominal)

    def test_joint_hull_follows_the_swept_pose_coordinates(self, params, box):
        for py in (0.020, 0.035, 0.050):
            q = inverse_kinematics(np.array([0.0, py, 0.0]), 0.0, params).q
            assert np.all(box.lower[JOINTS] < q) and np.all(q < box.upper[JOINTS])
        wide = operating_region_box(params, NOMINAL_POSE, joint_sweep=("px", "py", "ptheta", "delta"))
        assert np.all(wide.upper[JOINTS] - wide.lower[JOINTS] >= box.upper[JOINTS] - box.lower[JOINTS] - 1e-9)
        assert np.any(wide.upper[JOINTS] - wide.lower[JOINTS] > box.upper[JOINTS] - box.lower[JOINTS] + 1e-6)
        with pytest.raises(DomainError):
            operating_region_box(params, NOMINAL_POSE, joint_sweep=("q1",))

    def test_restricted_box(self, box):
        small = box.restricted(["delta"])
        assert small.free_names == ["delta"]
        assert not small.joints_sampled
        with pytest.raises(DomainError):
            box.restricted(["bogus"])

    def test_inverted_bounds_rejected(self, box):
        upper = box.upper.copy()
        upper[DELTA] = box.lower[DELTA] - 1.0
        with pytest.raises(DomainError):
            UncertaintyBox(lower=box.lower, upper=upper, nominal=box.nominal, free=box.free)

    def test_needs_a_free_coordinate(self, box):
        with pytest.raises(DomainError):
            UncertaintyBox(lower=box.lower, upper=box.upper, nominal=box.nominal, free=(False,) * len(COORDINATES))

    def test_dict_round_trip(self, box):
        restored = UncertaintyBox.from_dict(box.to_dict())
        np.testing.assert_array_equal(restored.lower, box.lower)
        assert restored.free == box.free


class TestSampling:
    def test_reproducible_per_seed(self, box):
        a = draw_scenarios(box, 50, seed=9).matrix
        b = draw_scenarios(box, 50, seed=9).matrix
        c = draw_scenarios(box, 50, seed=10).matrix
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_samples_stay_in_box_and_frozen_coordinates_hold(self, box):
        scenarios = draw_scenarios(box, 200, seed=1)
        values = scenarios.matrix
        assert all(box.contains(row) for row in values)
        frozen = ~box.free_mask
        np.testing.assert_array_equal(values[:, frozen], np.tile(box.nominal[frozen], (200, 1)))

    def test_uniform_mean(self, box):
        values = draw_scenarios(box, 4000, seed=3).matrix
        mask = box.free_mask
        width = box.upper[mask] - box.lower[mask]
        # standard error of a uniform mean is width / sqrt(12 n)
        assert np.all(np.abs(values[:, mask].mean(axis=0) - box.midpoint[mask]) < 5.0 * width / np.sqrt(12 * 4000))

    def test_zero_samples(self, box):
        with pytest.raises(DomainError):
            draw_scenarios(box, 0, seed=1)

    def test_set_round_trip(self, box):
        scenarios = draw_scenarios(box, 3, seed=2)
        restored = ScenarioSet.from_dict(scenarios.to_dict())
        np.testing.assert_array_equal(restored.matrix, scenarios.matrix)
        assert restored.seed == 2


class TestOperatingPoints:
    def test_sampled_joints_are_used_directly(self, box, params):
        scenario = draw_scenarios(box, 1, seed=4).scenarios[0]
        op = scenario.operating_point(box, params, delta_hat=0.001)
        np.testing.assert_array_equal(op.q, scenario.values[JOINTS])
        assert op.delta == scenario.delta and op.delta_hat == 0.001
        np.testing.assert_array_equal(op.x_eq[:3], box.nominal[POSE])

    def test_grid_scenarios_follow_inverse_kinematics(self, box, params):
        grid = delta_grid_scenarios(box, [-0.004, 0.0, 0.005])
        assert len(grid) == 3 and grid.seed is None
        assert grid.box.free_names == ["delta"]
        ops = [s.operating_point(grid.box, params) for s in grid.scenarios]
        assert [op.delta for op in ops] == [-0.004, 0.0, 0.005]
        assert not np.allclose(ops[0].q, ops[2].q)

    def test_empty_grid(self, box):
        with pytest.raises(DomainError):
            delta_grid_scenarios(box, [])


class TestLipschitz:
    def test_linear_plant_slope_is_recovered(self, box):
        small = box.restricted(["delta"])

        def plant(values):
            return np.array([[3.0 * values[DELTA]]]), np.zeros((1, 1))

        result = estimate_dynamics_lipschitz(small, 20, seed=5, plant_fn=plant, safety_factor=1.5)
        assert result.raw_A == pytest.approx(3.0)
        assert result.L_A == pytest.approx(4.5)
        assert result.raw_B == 0.0
        assert result.pairs == 20

    def test_prefix_stability(self, box):
        small = box.restricted(["delta", "py"])
        calls = []

        def plant(values):
            calls.append(values.copy())
            return np.diag(values[[DELTA, 5]]), np.zeros((2, 1))

        estimate_dynamics_lipschitz(small, 5, seed=6, plant_fn=plant)
        first = np.array(calls)
        calls.clear()
        estimate_dynamics_lipschitz(small, 8, seed=6, plant_fn=plant)
        np.testing.assert_array_equal(np.array(calls)[:10], first)

    def test_requires_pairs(self, box):
        with pytest.raises(DomainError):
            estimate_dynamics_lipschitz(box, 1, seed=0, plant_fn=lambda v: (np.eye(1), np.eye(1)))

    def test_real_plant_constants_are_finite(self, box, params):
        result = estimate_dynamics_lipschitz(box.restricted(["py", "delta"]), 4, seed=1, params=params)
        assert np.isfinite(result.L_A) and np.isfinite(result.L_B)
        assert result.L_B > 0.0
