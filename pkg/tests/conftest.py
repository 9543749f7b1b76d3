"""Shared fixtures: a straight two-lane road and planner components."""

from pathlib import Path

import pytest

from urbansst.cost import CostWeights
from urbansst.objects import WorldModel
from urbansst.road import Lane, RoadNetwork, build_penalty_grid, compute_goal_region
from urbansst.sst import PlannerConfig
from urbansst.vehicle import VehicleParams, VehicleState

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

LANE_WIDTH = 3.75
LANE_SPACING = 3.5


def make_straight_net(n_lanes=2, x0=-10.0, x1=130.0):
    lanes = [
        Lane(
            id=f"lane{i}",
            width=LANE_WIDTH,
            centerline=[[x0, i * LANE_SPACING], [x1, i * LANE_SPACING]],
            successors=[],
        )
        for i in range(n_lanes)
    ]
    return RoadNetwork(lanes, ["lane0"])


@pytest.fixture(scope="session")
def straight_net():
    return make_straight_net()


@pytest.fixture(scope="session")
def straight_grid(straight_net):
    return build_penalty_grid(straight_net, (-10.0, -4.0, 130.0, 8.0))


@pytest.fixture(scope="session")
def empty_world():
    return WorldModel()


@pytest.fixture(scope="session")
def params():
    return VehicleParams()


@pytest.fixture(scope="session")
def weights():
    return CostWeights()


@pytest.fixture()
def ego_start():
    return VehicleState(0.0, 0.0, 0.0, 5.0)


def make_planner_config(budget=2000, **kw):
    cfg = PlannerConfig(iteration_budget=budget, **kw)
    return cfg.with_bounds((-15.0, 50.0), (-10.0, 12.0))


@pytest.fixture()
def straight_goal(straight_net, ego_start):
    return compute_goal_region(straight_net, ego_start, 30.0, 2.0)
