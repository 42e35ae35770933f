import math

import numpy as np
import pytest

from src.control.linearization import OperatingPoint
from src.control.lmi import Controller, DRegion
from src.model.dynamics import coupled_terms
from src.model.kinematics import inverse_kinematics
from src.model.params import HandObjectParams
from src.scenario.box import operating_region_box
from src.scenario.design import DesignOptions, solve_grid_baseline

NOMINAL_POSE = np.array([0.0, 0.035, 0.0])
IC1 = np.array([-0.020, 0.050, 0.0])
REFERENCE_OFFSET = np.array([0.040, 0.0, math.radians(11.0)])


@pytest.fixture(scope="session")
def params():
    return HandObjectParams()


@pytest.fixture(scope="session")
def region():
    return DRegion()


@pytest.fixture
def nominal_pose():
    return NOMINAL_POSE.copy()


@pytest.fixture
def nominal_op(params):
    return OperatingPoint.from_pose(NOMINAL_POSE, 0.0, params)


def pd_gain(params, x_o, kp=100.0, kd=20.0, delta=0.0):
    """Gain M(x_o) [kp I, kd I]: at x_o with a matched grasp map the closed loop is kp/kd per axis."""
    q = inverse_kinematics(x_o, delta, params).q
    M = coupled_terms(q, x_o, np.zeros(4), np.zeros(3), delta, params).M
    return M @ np.hstack([kp * np.eye(3), kd * np.eye(3)])


def as_controller(gain, region=None, designer="pd"):
    return Controller(
        gain=np.asarray(gain, dtype=float), P=np.eye(6), Y=np.asarray(gain, dtype=float), gamma=-1.0,
        region=region or DRegion(), designer=designer,
    )


@pytest.fixture(scope="session")
def box(params):
    return operating_region_box(params, NOMINAL_POSE)


@pytest.fixture(scope="session")
def grid_design(params, region, box):
    """Common design over three offsets at the nominal pose."""
    return solve_grid_baseline([-0.004, 0.0, 0.005], region, params, box, DesignOptions(solver="clarabel"))
