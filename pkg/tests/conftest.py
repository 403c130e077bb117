"""for configuring tests for the LSTMPlanner package"""

from typing import Tuple

import pytest

from LSTMPlanner.config import DEFAULT_PROFILE, merge_profile
from LSTMPlanner.road import EgoState, PlanningProblem, RoadGeometry, SurroundingVehicle


@pytest.fixture(scope="package")
def road() -> RoadGeometry:
    """Three lanes of 3.75 m on 2 km"""
    return RoadGeometry(3)


@pytest.fixture(scope="package")
def profile() -> dict:
    return merge_profile(DEFAULT_PROFILE, None)


@pytest.fixture(scope="package")
def empty_problem(road) -> PlanningProblem:
    """Ego centered on lane 1 at the reference velocity, goal on its own lane"""
    return PlanningProblem(road, EgoState(100.0, 0.0, 25.0), (), 1, 25.0)


@pytest.fixture(scope="package")
def lane_change_problem() -> PlanningProblem:
    """Empty two-lane road with the goal on the other lane"""
    road = RoadGeometry(2)
    return PlanningProblem(road, EgoState(100.0, 0.0, 25.0), (), 2, 25.0)


@pytest.fixture(scope="package")
def busy_lane() -> Tuple[EgoState, Tuple[SurroundingVehicle, ...]]:
    """Ego at s = 200 on lane 1, seven well separated vehicles on lane 2"""
    ego = EgoState(200.0, 0.0, 25.0)
    traffic = tuple(
        SurroundingVehicle.nominal(i, 2, 100.0 + 40.0 * i, 20.0) for i in range(7)
    )
    return ego, traffic
