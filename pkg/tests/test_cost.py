import pytest

from urbansst.cost import (
    CostWeights,
    motion_cost,
    state_cost_components,
    trajectory_cost,
    weighted_state_cost,
)
from urbansst.objects import ObjectPrediction, WorldModel
from urbansst.vehicle import TimedState, Trajectory, VehicleState


@pytest.fixture(scope="module")
def world_one():
    return WorldModel([ObjectPrediction("o", 0.6, 0.6, [(0.0, 20.0, 0.0, 0.0)])])


class TestWeights:
    def test_defaults(self):
        w = CostWeights()
        assert w.path_length == 0.05
        assert w.desired_velocity == 0.5
        assert w.penalty_grid == 0.2
        assert w.target_clearance == 2.0
        assert w.v_desired == 5.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            CostWeights(path_length=-0.1)


class TestStateCost:
    def test_components(self, straight_grid, empty_world, weights):
        s = VehicleState(20.0, 0.01, 0.0, 3.48)
        c_dv, c_pg, c_tc = state_cost_components(s, 0.0, straight_grid, empty_world, weights)
        assert c_dv == pytest.approx(1.52)
        assert c_pg == straight_grid.lookup(20.0, 0.01)
        assert c_tc == 0.0

    def test_weighted_combination(self, straight_grid, world_one, weights):
        s = VehicleState(20.0, 0.01, 0.0, 3.0)
        c_dv, c_pg, c_tc = state_cost_components(s, 0.0, straight_grid, world_one, weights)
        want = 0.5 * c_dv + 0.2 * c_pg + 2.0 * c_tc
        assert weighted_state_cost(s, 0.0, straight_grid, world_one, weights) == pytest.approx(want)
        assert c_tc == pytest.approx(100.0, abs=0.01)  # essentially on top of the object


class TestMotionCost:
    def test_path_length_term(self, straight_grid, empty_world):
        # isolate the distance term: all state weights zero
        w = CostWeights(desired_velocity=0.0, penalty_grid=0.0, target_clearance=0.0)
        a = TimedState(VehicleState(0.0, 0.0, 0.0, 5.0), 0.0)
        b = TimedState(VehicleState(3.0, 4.0, 0.0, 5.0), 0.4)
        # 0.05 * 5 m
        assert motion_cost(a, b, straight_grid, empty_world, w) == pytest.approx(0.25)

    def test_trapezoid_term(self, straight_grid, empty_world):
        # isolate the state-cost integral: same position, speed error 2 then 4
        w = CostWeights(path_length=0.0, desired_velocity=1.0, penalty_grid=0.0, target_clearance=0.0)
        a = TimedState(VehicleState(20.0, 0.0, 0.0, 3.0), 0.0)
        b = TimedState(VehicleState(20.0, 0.0, 0.0, 1.0), 0.4)
        # 0.4 * (2 + 4) / 2
        assert motion_cost(a, b, straight_grid, empty_world, w) == pytest.approx(1.2)

    def test_rejects_nonincreasing_time(self, straight_grid, empty_world, weights):
        a = TimedState(VehicleState(0, 0, 0, 5), 1.0)
        b = TimedState(VehicleState(1, 0, 0, 5), 1.0)
        with pytest.raises(ValueError):
            motion_cost(a, b, straight_grid, empty_world, weights)


class TestTrajectoryCost:
    def _traj(self):
        return [
            TimedState(VehicleState(0.0, 0.0, 0.0, 5.0), 0.0),
            TimedState(VehicleState(2.0, 0.1, 0.0, 4.5), 0.4),
            TimedState(VehicleState(3.8, 0.3, 0.1, 4.0), 0.8),
        ]

    def test_sum_of_edges(self, straight_grid, empty_world, weights):
        samples = self._traj()
        want = motion_cost(samples[0], samples[1], straight_grid, empty_world, weights) + motion_cost(
            samples[1], samples[2], straight_grid, empty_world, weights
        )
        got = trajectory_cost(Trajectory(samples), straight_grid, empty_world, weights)
        assert got == pytest.approx(want)

    def test_concatenation_additive(self, straight_grid, empty_world, weights):
        samples = self._traj()
        whole = trajectory_cost(Trajectory(samples), straight_grid, empty_world, weights)
        first = trajectory_cost(Trajectory(samples[:2]), straight_grid, empty_world, weights)
        second = trajectory_cost(Trajectory(samples[1:]), straight_grid, empty_world, weights)
        assert whole == pytest.approx(first + second)

    def test_single_sample_zero(self, straight_grid, empty_world, weights):
        traj = Trajectory(self._traj()[:1])
        assert trajectory_cost(traj, straight_grid, empty_world, weights) == 0.0

    def test_empty_rejected(self, straight_grid, empty_world, weights):
        with pytest.raises(ValueError):
            trajectory_cost(Trajectory([]), straight_grid, empty_world, weights)
