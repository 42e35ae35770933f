import numpy as np
import pytest

from src.control.lmi import DRegion
from src.errors import DomainError
from src.sim.poles import PoleTrace, pole_trace
from src.sim.simulator import SimConfig, Trajectory, simulate

from tests.conftest import IC1, REFERENCE_OFFSET, as_controller, pd_gain


@pytest.fixture(scope="module")
def run(params):
    cfg = SimConfig(x0=IC1, x_ref=IC1 + REFERENCE_OFFSET, dt=2e-3, horizon=0.4, min_normal_force=0.02, name="IC1")
    gain = pd_gain(params, cfg.x_ref)
    return as_controller(gain, DRegion(alpha=0.5, radius=40.0)), simulate(gain, cfg, params)


def test_trace_layout(run, params):
    controller, trajectory = run
    trace = pole_trace(trajectory, controller, params=params, stride=50)
    # 201 logged steps: indices 0, 50, ..., 200
    assert len(trace) == 5
    assert trace.poles.shape == (5, 6)
    assert trace.margins.shape == (5, 6, 3)
    assert np.all(np.diff(trace.times) > 0.0)
    assert trace.times[-1] == pytest.approx(trajectory.t[-1])
    assert 0.0 <= trace.in_region_fraction <= 1.0
    assert trace.dispersion() >= 0.0
    frame = trace.to_frame()
    assert len(frame) == 30
    assert list(frame.columns[:4]) == ["t", "pole", "re", "im"]


def test_last_step_is_always_traced(run, params):
    controller, trajectory = run
    trace = pole_trace(trajectory, controller, params=params, stride=60)
    assert len(trace) == 5
    assert trace.times[-1] == pytest.approx(trajectory.t[-1])


def test_poles_are_sorted_by_real_part(run, params):
    controller, trajectory = run
    trace = pole_trace(trajectory, controller, params=params, stride=100)
    for poles in trace.poles:
        assert np.all(np.diff(poles.real) >= 0.0)


def test_bare_gain_needs_a_region(run, params):
    controller, trajectory = run
    with pytest.raises(DomainError):
        pole_trace(trajectory, controller.gain, params=params)
    trace = pole_trace(trajectory, controller.gain, region=DRegion(), params=params, stride=200)
    assert len(trace) == 2


def test_invalid_inputs(run, params):
    controller, trajectory = run
    with pytest.raises(DomainError):
        pole_trace(trajectory, controller, params=params, stride=0)
    empty = Trajectory(config=trajectory.config)
    with pytest.raises(DomainError):
        pole_trace(empty, controller, params=params)


def test_dispersion_of_a_moving_pole():
    poles = np.tile(np.array([-1.0, -2.0, -3.0, -4.0, -5.0, -6.0], dtype=complex), (3, 1))
    poles[2, 0] = -1.0 + 3.0j
    trace = PoleTrace(
        times=np.array([0.0, 1.0, 2.0]), poles=poles, inside=np.ones(3, dtype=bool), margins=-np.ones((3, 6, 3)),
    )
    assert trace.dispersion() == pytest.approx(3.0)
    assert trace.in_region_fraction == 1.0
    assert trace.worst_margin == -1.0
