"""Domain-knowledge seeding for the sparse-tree planner.

Two exploration branches are grown before the main sampling loop: one that
follows the route's lane center with a rolling lookahead target, and one
that replays the previous query's solution when the new start state is
close enough to it. Both insert nodes through the standard witness path
and validate every integration substate, so seeded nodes obey the same
contracts as sampled ones. Seeding work is charged against the query
budget (propagation count in iteration mode, elapsed time in wall mode).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cost import CostWeights
from .objects import WorldModel
from .road import GoalRegion, PenaltyGrid, RoadNetwork
from .sst import PlannerConfig, PlannerTree, PlanResult, sample_input
from .vehicle import (
    Trajectory,
    VehicleParams,
    VehicleState,
    normalize_angle,
)


@dataclass(frozen=True)
class DkiConfig:
    d_lookahead: float = 3.0
    d_branch_max: float = 40.0
    n_candidates: int = 100
    d_reuse: float = 1.0

    def __post_init__(self) -> None:
        if min(self.d_lookahead, self.n_candidates, self.d_reuse) <= 0 or self.d_branch_max < 0:
            raise ValueError("seeding parameters must be positive")


def seed_lane_branch(
    tree: PlannerTree,
    net: RoadNetwork,
    dki: DkiConfig,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Grow a branch that chases the lane center ahead of the branch tip.

    Each extension draws n_candidates inputs, keeps the fully-valid
    propagation whose endpoint is closest to the lane-center point
    d_lookahead ahead of the tip, and stops at the goal, when no valid
    candidate exists, or once the branch strays d_branch_max from the root.
    """
    rng = rng if rng is not None else tree.rng
    route = net.route_path
    root = tree.root.state
    tip = tree.root
    s_tip, _ = route.project(root.x, root.y)
    # The rolling target sits at most one propagation step ahead: with a
    # farther target every candidate undershoots and the argmin rewards
    # maximum acceleration until the branch pins at v_max. Closing only a
    # fraction of the speed error per edge keeps the desired speed the
    # fixed point of the selection without bang-bang hunting around it.
    v_des = tree.weights.v_desired
    t_prop = tree.config.t_prop
    gain = 0.25
    added = 0
    visited = {id(tip)}
    while True:
        if tree.goal.contains_xy(tip.state.x, tip.state.y):
            break
        if math.hypot(tip.state.x - root.x, tip.state.y - root.y) >= dki.d_branch_max:
            break
        s_tip, _ = route.project(
            tip.state.x, tip.state.y, s_window=(s_tip - 2.0, s_tip + 10.0)
        )
        v_cmd = tip.state.v + gain * (v_des - tip.state.v)
        d_target = min(dki.d_lookahead, v_cmd * t_prop)
        target = route.point_at(min(s_tip + d_target, route.length))
        best_end = None
        best_u = None
        best_d = math.inf
        for _ in range(dki.n_candidates):
            tree.iterations_used += 1
            u = sample_input(tree.config, rng, tree.params)
            end = tree.propagate_checked(tip, u)
            if end is None:
                continue
            d = math.hypot(end[0] - target.x, end[1] - target.y)
            if d < best_d:
                best_end = end
                best_u = u
                best_d = d
        if best_end is None:
            break
        node = tree.try_insert(tip, best_end, best_u)
        if node is None:
            # The corridor is already held by a cheaper node (typically the
            # previous-solution branch); continue the march from that
            # representative instead of abandoning the branch.
            state = VehicleState(best_end[0], best_end[1], best_end[2], best_end[3])
            witness = tree._nearest_witness(tree._norm_state(state))
            node = witness.rep if witness is not None else None
            if node is None or not node.active or id(node) in visited:
                break
        else:
            added += 1
        tip = node
        visited.add(id(tip))
    return added


def _interpolated_states(prev: Trajectory, t_step: float):
    """Linear state-space interpolation of a solution at integration granularity.

    Yields (state, index of the first original sample at or after it).
    """
    out = []
    for i in range(1, len(prev.samples)):
        a = prev.samples[i - 1]
        b = prev.samples[i]
        n = max(1, round((b.t - a.t) / t_step))
        dth = normalize_angle(b.state.theta - a.state.theta)
        for k in range(n):
            w = k / n
            out.append(
                (
                    VehicleState(
                        a.state.x + w * (b.state.x - a.state.x),
                        a.state.y + w * (b.state.y - a.state.y),
                        normalize_angle(a.state.theta + w * dth),
                        a.state.v + w * (b.state.v - a.state.v),
                    ),
                    i,
                )
            )
    out.append((prev.samples[-1].state, len(prev.samples)))
    return out


def seed_previous_branch(tree: PlannerTree, prev: Trajectory, dki: DkiConfig) -> int:
    """Replay the previous solution's inputs from the new root.

    The branch is only grown when the root is within d_reuse (planner
    metric) of the interpolated previous solution; replaying the stored
    inputs keeps the reused segment propagation-exact from the new root.
    Growth aborts at the first invalid state.
    """
    if prev is None or len(prev.samples) < 2:
        return 0
    root_norm = tree.root.norm
    best_d = math.inf
    best_next = None
    for state, next_idx in _interpolated_states(prev, tree.config.t_step):
        d = tree._dist_n(tree._norm_state(state), root_norm)
        if d < best_d:
            best_d = d
            best_next = next_idx
    if best_d > dki.d_reuse:
        return 0
    tip = tree.root
    added = 0
    for j in range(max(1, best_next), len(prev.samples)):
        u = prev.samples[j].input
        if u is None:
            break
        tree.iterations_used += 1
        end = tree.propagate_checked(tip, u)
        if end is None:
            break
        node = tree.try_insert(tip, end, u)
        if node is None:
            break
        tip = node
        added += 1
    return added


def plan_dki(
    start: VehicleState,
    start_time: float,
    goal: GoalRegion,
    grid: PenaltyGrid,
    world: WorldModel,
    net: RoadNetwork,
    prev: Optional[Trajectory],
    config: PlannerConfig,
    dki: DkiConfig,
    weights: CostWeights,
    params: VehicleParams,
    rng: Optional[np.random.Generator] = None,
) -> PlanResult:
    """Seeded query: previous-solution branch, lane branch, then the base loop."""
    t0 = time.perf_counter()
    tree = PlannerTree(start, start_time, goal, grid, world, config, weights, params, rng)
    if prev is not None:
        seed_previous_branch(tree, prev, dki)
    seed_lane_branch(tree, net, dki)
    return tree.run(already_elapsed=time.perf_counter() - t0)
