import math

import numpy as np
import pytest

from src.control.lmi import (
    GAMMA_MIN,
    Controller,
    DecisionVars,
    DRegion,
    ScpOptions,
    VariableLayout,
    build_dregion_blocks,
    design_lmi_problem,
    evaluate_constraint,
    pole_region_check,
    pole_region_margins,
    recover_gain,
)
from src.errors import DimensionError, DomainError, SingularityError
from src.sdp import SdpStatus, solve


class TestRegion:
    def test_invalid_parameters(self):
        with pytest.raises(DomainError):
            DRegion(alpha=-1.0)
        with pytest.raises(DomainError):
            DRegion(radius=0.0)
        with pytest.raises(DomainError):
            DRegion(theta=0.0)

    def test_empty_when_disk_inside_half_plane(self):
        assert DRegion(alpha=8.0, radius=7.0).is_empty
        assert not DRegion().is_empty

    def test_round_trip_in_degrees(self):
        region = DRegion.from_degrees(0.5, 7.0, 30.0)
        restored = DRegion.from_dict(region.to_dict())
        assert (restored.alpha, restored.radius) == (0.5, 7.0)
        assert restored.theta == pytest.approx(region.theta, rel=1e-12)
        assert region.min_damping == pytest.approx(math.cos(math.radians(30.0)))

    def test_pole_margins(self):
        region = DRegion()
        inside, underdamped, slow, fast = pole_region_margins(np.array([-1.0, -1.0 + 1.0j, -0.2, -8.0]), region)
        assert np.all(inside < 0.0)
        assert underdamped[2] > 0.0 and underdamped[0] < 0.0
        assert slow[0] > 0.0
        assert fast[1] > 0.0


def test_blocks_are_symmetric():
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 2))
    P = np.eye(4)
    Y = rng.normal(size=(2, 4))
    for block in build_dregion_blocks(A, B, DRegion(), DecisionVars(P=P, Y=Y, gamma=-1.0)):
        np.testing.assert_allclose(block, block.T, atol=1e-12)


def test_block_dimension_checks():
    with pytest.raises(DimensionError):
        build_dregion_blocks(np.eye(3), np.ones((2, 1)), DRegion(), DecisionVars(P=np.eye(3), Y=np.ones((1, 3)), gamma=0.0))


def test_recover_gain():
    P = np.diag([2.0, 4.0])
    Y = np.array([[2.0, 8.0]])
    np.testing.assert_allclose(recover_gain(P, Y), [[1.0, 2.0]])
    with pytest.raises(SingularityError):
        recover_gain(np.diag([1.0, -1.0]), Y)


def test_variable_layout_unpack():
    layout = VariableLayout(6, 3)
    assert layout.decision_variables == 39
    assert layout.size == 40
    vars = layout.unpack(np.arange(layout.size, dtype=float))
    np.testing.assert_array_equal(vars.P, vars.P.T)
    assert vars.P[0, 1] == 1.0 and vars.P[5, 5] == 20.0
    assert vars.Y[0, 0] == 21.0 and vars.gamma == 39.0
    assert len(layout.names()) == layout.size


def _solve_random_design(rng, region):
    A = rng.normal(size=(3, 3))
    B = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    problem, layout = design_lmi_problem([(A, B)], region)
    solution = solve(problem, solver="clarabel")
    return A, B, solution, layout


def _random_designs_land_in_region(count):
    rng = np.random.default_rng(11)
    region = DRegion(alpha=0.5, radius=7.0, theta=math.radians(45.0))
    solved = 0
    for _ in range(count):
        A, B, solution, layout = _solve_random_design(rng, region)
        if solution.status != SdpStatus.OPTIMAL:
            continue
        solved += 1
        vars = layout.unpack(solution.x)
        inside, margins = pole_region_check(A - B @ recover_gain(vars.P, vars.Y), region)
        assert inside, margins
    assert solved >= 0.9 * count


def test_designed_gains_place_poles_in_region():
    _random_designs_land_in_region(20)


@pytest.mark.slow
def test_designed_gains_place_poles_in_region_many():
    _random_designs_land_in_region(500)


def test_feasible_vars_satisfy_every_block():
    rng = np.random.default_rng(5)
    region = DRegion()
    A, B, solution, layout = _solve_random_design(rng, region)
    assert solution.ok
    vars = layout.unpack(solution.x)
    assert evaluate_constraint(vars, A, B, region).max() <= 1e-7 * max(1.0, np.abs(vars.P).max())
    assert -1.0 - 1e-6 <= vars.gamma < 0.0


def test_gain_is_invariant_to_certificate_scaling():
    rng = np.random.default_rng(21)
    R = rng.normal(size=(4, 4))
    P = R @ R.T + np.eye(4)
    Y = rng.normal(size=(2, 4))
    for c in (1e-3, 0.5, 7.0, 1e4):
        np.testing.assert_allclose(recover_gain(c * P, c * Y), recover_gain(P, Y), rtol=1e-9, atol=1e-12)


def test_margins_are_positively_homogeneous():
    rng = np.random.default_rng(22)
    A, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 2))
    R = rng.normal(size=(4, 4))
    vars = DecisionVars(P=R @ R.T + np.eye(4), Y=rng.normal(size=(2, 4)), gamma=-0.3)
    base = evaluate_constraint(vars, A, B, DRegion())
    for c in (0.1, 3.0, 250.0):
        scaled = DecisionVars(P=c * vars.P, Y=c * vars.Y, gamma=c * vars.gamma)
        np.testing.assert_allclose(evaluate_constraint(scaled, A, B, DRegion()), c * base, rtol=1e-9, atol=1e-9 * c)


def test_enlarging_the_region_keeps_a_certificate_feasible():
    rng = np.random.default_rng(5)
    region = DRegion()
    A, B, solution, layout = _solve_random_design(rng, region)
    assert solution.ok
    vars = layout.unpack(solution.x)
    tolerance = 1e-7 * max(1.0, np.abs(vars.P).max())
    for larger in (
        DRegion(alpha=0.2, radius=7.0, theta=region.theta),
        DRegion(alpha=0.5, radius=10.0, theta=region.theta),
        DRegion(alpha=0.5, radius=7.0, theta=math.radians(45.0)),
        DRegion(alpha=0.1, radius=12.0, theta=math.radians(40.0)),
    ):
        assert evaluate_constraint(vars, A, B, larger).max() <= tolerance
        problem, _ = design_lmi_problem([(A, B)], larger)
        enlarged = solve(problem, solver="clarabel")
        assert enlarged.ok
        assert enlarged.objective <= solution.objective + 1e-6


def test_gamma_bounds_are_validated():
    plants = [(np.zeros((2, 2)), np.array([[0.0], [1.0]]))]
    with pytest.raises(DomainError):
        design_lmi_problem(plants, DRegion(), ScpOptions(gamma_floor=-1e7))
    with pytest.raises(DomainError):
        design_lmi_problem(plants, DRegion(), ScpOptions(gamma_ceiling=0.0))
    with pytest.raises(DomainError):
        design_lmi_problem(plants, DRegion(), ScpOptions(gamma_floor=-1e-9, gamma_ceiling=-1e-9))
    problem, layout = design_lmi_problem(plants, DRegion(), ScpOptions(gamma_floor=GAMMA_MIN))
    assert problem.lb[layout.gamma_index] == GAMMA_MIN


def test_norm_bounds_are_enforced():
    rng = np.random.default_rng(8)
    A = rng.normal(size=(3, 3))
    B = np.eye(3)
    mu = 50.0
    problem, layout = design_lmi_problem([(A, B)], DRegion(), ScpOptions(mu=mu))
    solution = solve(problem, solver="clarabel")
    assert solution.ok
    vars = layout.unpack(solution.x)
    assert np.linalg.norm(vars.P, 2) <= mu * (1.0 + 1e-6)
    assert np.linalg.norm(vars.Y, 2) <= mu * (1.0 + 1e-6)


def test_controller_serialization_and_flip():
    controller = Controller(
        gain=np.ones((3, 6)), P=np.eye(6), Y=np.ones((3, 6)), gamma=-0.5, region=DRegion(), seed=4,
        provenance={"config_hash": "abc"},
    )
    restored = Controller.from_dict(controller.to_dict())
    np.testing.assert_array_equal(restored.gain, controller.gain)
    assert restored.region.radius == 7.0 and restored.seed == 4
    assert restored.provenance == {"config_hash": "abc"}
    flipped = controller.flipped()
    np.testing.assert_array_equal(flipped.gain, -controller.gain)
    assert flipped.designer == "feasibility-flipped"
