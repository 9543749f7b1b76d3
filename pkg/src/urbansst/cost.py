"""Multi-objective motion costs.

Path length is an intrinsic per-edge cost; desired-velocity deviation,
penalty-grid and target-clearance terms are state costs integrated over
time with the trapezoid rule between edge endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .objects import WorldModel, clearance_cost_xy
from .road import PenaltyGrid
from .vehicle import TimedState, Trajectory, VehicleState


@dataclass(frozen=True)
class CostWeights:
    path_length: float = 0.05
    desired_velocity: float = 0.5
    penalty_grid: float = 0.2
    target_clearance: float = 2.0
    v_desired: float = 5.0

    def __post_init__(self) -> None:
        if min(self.path_length, self.desired_velocity, self.penalty_grid, self.target_clearance) < 0.0:
            raise ValueError("cost weights must be non-negative")


def state_cost_components(
    s: VehicleState, t: float, grid: PenaltyGrid, world: WorldModel, w: CostWeights
):
    """Unweighted (desired-velocity, penalty-grid, target-clearance) components."""
    c_dv = abs(s.v - w.v_desired)
    c_pg = grid.lookup(s.x, s.y)
    c_tc = clearance_cost_xy(s.x, s.y, t, world)
    return c_dv, c_pg, c_tc


def weighted_state_cost(
    s: VehicleState, t: float, grid: PenaltyGrid, world: WorldModel, w: CostWeights
) -> float:
    c_dv, c_pg, c_tc = state_cost_components(s, t, grid, world, w)
    return w.desired_velocity * c_dv + w.penalty_grid * c_pg + w.target_clearance * c_tc


def motion_cost(
    s_n: TimedState, s_next: TimedState, grid: PenaltyGrid, world: WorldModel, w: CostWeights
) -> float:
    dt = s_next.t - s_n.t
    if dt <= 0.0:
        raise ValueError("motion cost requires strictly increasing timestamps")
    dist = math.hypot(s_next.state.x - s_n.state.x, s_next.state.y - s_n.state.y)
    c0 = weighted_state_cost(s_n.state, s_n.t, grid, world, w)
    c1 = weighted_state_cost(s_next.state, s_next.t, grid, world, w)
    return w.path_length * dist + dt * (c0 + c1) / 2.0


def trajectory_cost(traj: Trajectory, grid: PenaltyGrid, world: WorldModel, w: CostWeights) -> float:
    if not traj.samples:
        raise ValueError("trajectory must have at least one sample")
    total = 0.0
    for a, b in zip(traj.samples, traj.samples[1:]):
        total += motion_cost(a, b, grid, world, w)
    return total
