import math

import numpy as np
import pytest

from src.control.linearization import AffinePlant
from src.control.lmi import DRegion, evaluate_constraint, pole_region_check
from src.errors import DomainError
from src.scenario.box import draw_scenarios
from src.scenario.certificates import OptimalityCertificate
from src.scenario.certify import clopper_pearson, empirical_violation
from src.scenario.design import (
    DesignOptions,
    OptimalityConfig,
    design_for_plants,
    input_scaling,
    linearize_scenarios,
    solve_feasibility_scp,
    solve_optimality_scp,
)
from src.sdp import SdpStatus


def _double_integrator():
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    B = np.zeros((6, 3))
    B[3:] = np.eye(3)
    return AffinePlant(A=A, B=B, V=np.zeros(6))


class TestDesignForPlants:
    def test_empty_region_is_infeasible_without_solving(self):
        solution, controller = design_for_plants([_double_integrator()], DRegion(alpha=8.0, radius=7.0))
        assert solution.status == SdpStatus.INFEASIBLE
        assert controller is None
        assert solution.backend == "none"

    def test_needs_plants(self):
        with pytest.raises(DomainError):
            design_for_plants([], DRegion())

    def test_double_integrator(self):
        region = DRegion()
        plant = _double_integrator()
        solution, controller = design_for_plants([plant], region, DesignOptions(solver="clarabel"), seed=3)
        assert solution.ok
        assert controller.seed == 3 and controller.gain.shape == (3, 6)
        inside, _ = pole_region_check(plant.closed_loop(controller.gain), region)
        assert inside

    def test_input_scaling_inverts_the_mean_input_block(self):
        plant = _double_integrator()
        heavy = AffinePlant(A=plant.A, B=plant.B * 4.0e4, V=plant.V)
        np.testing.assert_allclose(input_scaling([plant, heavy]), np.eye(3) / 20000.5)
        wide = AffinePlant(A=np.zeros((2, 2)), B=np.ones((2, 3)), V=np.zeros(2))
        np.testing.assert_array_equal(input_scaling([wide]), np.eye(3))

    def test_badly_scaled_inputs_keep_the_original_certificate(self):
        region = DRegion()
        plant = _double_integrator()
        plants = [
            AffinePlant(A=plant.A, B=plant.B @ np.diag([3.0, 5.0, 4.0e4]), V=plant.V),
            AffinePlant(A=plant.A, B=plant.B @ np.diag([5.0, 8.0, 6.0e4]), V=plant.V),
        ]
        solution, controller = design_for_plants(plants, region, DesignOptions(solver="clarabel"))
        assert solution.ok
        for p in plants:
            assert pole_region_check(p.closed_loop(controller.gain), region)[0]
            scale = max(1.0, np.abs(controller.P).max())
            assert evaluate_constraint(controller.vars, p.A, p.B, region).max() <= 1e-6 * scale


class TestGridDesign:
    def test_common_certificate_for_every_offset(self, grid_design):
        assert grid_design.feasible
        cert = grid_design.certificate
        assert cert.designer == "grid"
        assert cert.used_samples == 3
        assert cert.decision_variables == 39
        assert cert.gamma < 0.0
        assert grid_design.controller.provenance["designer"] == "grid"

    def test_every_training_plant_is_placed(self, grid_design):
        controller = grid_design.controller
        for plant in grid_design.plants:
            inside, margins = pole_region_check(plant.closed_loop(controller.gain), controller.region)
            assert inside, margins
            scale = max(1.0, np.abs(controller.P).max())
            assert evaluate_constraint(controller.vars, plant.A, plant.B, controller.region).max() <= 1e-7 * scale
        assert grid_design.training_margins.shape == (3,)

    def test_violation_estimate(self, grid_design, box, params):
        estimate = empirical_violation(grid_design.controller, box.restricted(["delta"]), 20, seed=7, params=params)
        assert estimate.samples + estimate.skipped == 20
        assert 0.0 <= estimate.ci_low <= estimate.rate <= estimate.ci_high <= 1.0
        assert estimate.seed == 7

    def test_violation_needs_samples(self, grid_design, box, params):
        with pytest.raises(DomainError):
            empirical_violation(grid_design.controller, box, 0, seed=7, params=params)


def test_clopper_pearson():
    low, high = clopper_pearson(0, 10)
    assert low == 0.0
    assert high == pytest.approx(1.0 - 0.025 ** 0.1, rel=1e-6)
    low, high = clopper_pearson(5, 10)
    assert low < 0.5 < high
    assert clopper_pearson(0, 0) == (0.0, 1.0)


def test_linearize_scenarios_keeps_order(box, params):
    scenarios = draw_scenarios(box, 4, seed=12)
    plants, skipped = linearize_scenarios(scenarios, params)
    assert len(plants) + len(skipped) == 4
    assert all(p.A.shape == (6, 6) and p.B.shape == (6, 3) for p in plants)


class TestOptimalityConfig:
    def test_derived_quantities(self):
        cfg = OptimalityConfig(eps=0.99, beta=0.999, mu=1e3, lipschitz_blocks=(7.4713, 8.0188, 2.7833), n_xi=4)
        assert cfg.L_xi == 8.0188
        assert cfg.tightening == pytest.approx(7.9987, abs=1e-4)
        assert cfg.sample_size(39).required_samples > 5e4

    def test_from_dynamics(self):
        cfg = OptimalityConfig.from_dynamics(0.5, 0.1, 2.0, math.radians(30.0), 1.0, 0.5, n_xi=2)
        assert cfg.lipschitz_blocks[0] == pytest.approx(6.0)
        assert cfg.lipschitz_blocks[1] == pytest.approx(3.0)
        assert cfg.L_A == 1.0 and cfg.L_B == 0.5

    def test_mu_must_be_positive(self):
        with pytest.raises(DomainError):
            OptimalityConfig(eps=0.5, beta=0.1, mu=0.0, lipschitz_blocks=(1.0,), n_xi=1)


@pytest.mark.slow
def test_feasibility_design_on_random_scenarios(box, params):
    region = DRegion()
    scenarios = draw_scenarios(box, 20, seed=2024)
    result = solve_feasibility_scp(scenarios, region, params, eps=0.5, beta=1e-3, options=DesignOptions(solver="clarabel"))
    cert = result.certificate
    assert cert.required_samples == 110
    assert cert.used_samples + len(cert.skipped_scenarios) == 20
    if result.feasible:
        for plant in result.plants:
            assert pole_region_check(plant.closed_loop(result.controller.gain), region)[0]
    else:
        assert cert.status != SdpStatus.OPTIMAL.value


@pytest.mark.slow
def test_optimality_design_reports_tightening(box, params):
    cfg = OptimalityConfig(eps=0.99, beta=0.999, mu=1e3, lipschitz_blocks=(1e-3, 2e-3, 1e-3), n_xi=4, max_samples=10)
    scenarios = draw_scenarios(box.restricted(["q1", "q2", "q3", "q4"]), 10, seed=1)
    result = solve_optimality_scp(scenarios, DRegion(), params, cfg, DesignOptions(solver="clarabel"))
    cert = result.certificate
    assert isinstance(cert, OptimalityCertificate)
    assert cert.tightening == pytest.approx(2e-3 * 0.99**0.25)
    assert cert.mu == 1e3
    if result.feasible:
        assert np.linalg.norm(result.controller.P, 2) <= 1e3 * (1 + 1e-6)


def test_default_box_has_a_common_certificate(box, params, region):
    scenarios = draw_scenarios(box, 110, seed=2024)
    result = solve_feasibility_scp(scenarios, region, params, eps=0.5, beta=1e-3, options=DesignOptions(solver="clarabel"))
    assert result.status == SdpStatus.OPTIMAL
    assert result.certificate.used_samples == 110
    assert result.certificate.gamma < 0.0
    for plant in result.plants:
        assert pole_region_check(plant.closed_loop(result.controller.gain), region)[0]
