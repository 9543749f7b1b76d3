"""Anytime stable-sparse tree planner over the kinematic bicycle model.

The search loop is the classic selection-propagation-pruning scheme:
uniform state sampling, best-cost selection within a radius, truncated
Gaussian control sampling, fixed-time propagation with per-substep
validity checks, and witness-based sparsification of the tree.

The state-space metric is Euclidean over components normalized by the
sampling-bound extents (wrap-aware in heading), so that the unitless
selection and pruning radii are meaningful across heterogeneous units.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cost import CostWeights
from .geometry import obb_overlap
from .objects import WorldModel, clearance_cost_xy
from .road import GoalRegion, PenaltyGrid
from .vehicle import (
    ControlInput,
    TimedState,
    Trajectory,
    VehicleParams,
    VehicleState,
    normalize_angle,
    substep_count,
)

_TWO_PI = 2.0 * math.pi


class InvalidStartError(ValueError):
    """The query's start state fails validity checking."""


@dataclass(frozen=True)
class PlannerConfig:
    iteration_budget: Optional[int] = None
    query_time: Optional[float] = None
    d_near: float = 0.2
    d_prune: float = 0.1
    t_prop: float = 0.4
    t_step: float = 0.04
    sigma_a: float = 0.8
    sigma_delta: float = 0.2
    x_bounds: Optional[tuple] = None
    y_bounds: Optional[tuple] = None
    theta_bounds: tuple = (-math.pi, math.pi)
    v_bounds: tuple = (0.0, 6.0)
    # Characteristic length normalizing x/y in the planner metric. Dividing
    # by the sampling extents instead would shrink a full propagation step
    # below d_prune and freeze the tree at its root.
    metric_xy_scale: float = 10.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.d_prune > self.d_near:
            raise ValueError("d_prune must not exceed d_near")
        if self.sigma_a <= 0.0 or self.sigma_delta <= 0.0:
            raise ValueError("input sampling sigmas must be positive")
        if self.metric_xy_scale <= 0.0:
            raise ValueError("metric_xy_scale must be positive")
        substep_count(self.t_prop, self.t_step)

    def with_bounds(self, x_bounds, y_bounds) -> "PlannerConfig":
        return replace(self, x_bounds=tuple(x_bounds), y_bounds=tuple(y_bounds))


def planner_metric(a: VehicleState, b: VehicleState, config: PlannerConfig) -> float:
    """Normalized, wrap-aware distance between two states."""
    dx = (a.x - b.x) / config.metric_xy_scale
    dy = (a.y - b.y) / config.metric_xy_scale
    dth = abs(normalize_angle(a.theta) - normalize_angle(b.theta)) / _TWO_PI
    if dth > 0.5:
        dth = 1.0 - dth
    dv = (a.v - b.v) / (config.v_bounds[1] - config.v_bounds[0])
    return math.sqrt(dx * dx + dy * dy + dth * dth + dv * dv)


def sample_state(config: PlannerConfig, rng: np.random.Generator) -> VehicleState:
    return VehicleState(
        rng.uniform(config.x_bounds[0], config.x_bounds[1]),
        rng.uniform(config.y_bounds[0], config.y_bounds[1]),
        rng.uniform(config.theta_bounds[0], config.theta_bounds[1]),
        rng.uniform(config.v_bounds[0], config.v_bounds[1]),
    )


def sample_input(config: PlannerConfig, rng: np.random.Generator, params: VehicleParams) -> ControlInput:
    """Zero-mean Gaussian input, jointly redrawn until both components are in bounds."""
    a_lo, a_hi = params.a_bounds
    d_lo, d_hi = params.delta_bounds
    while True:
        a = rng.normal(0.0, config.sigma_a)
        d = rng.normal(0.0, config.sigma_delta)
        if a_lo <= a <= a_hi and d_lo <= d <= d_hi:
            return ControlInput(a, d)


def is_state_valid(
    s: VehicleState,
    t: float,
    grid: PenaltyGrid,
    world: WorldModel,
    config: PlannerConfig,
    params: VehicleParams,
) -> bool:
    if not (config.x_bounds[0] <= s.x <= config.x_bounds[1]):
        return False
    if not (config.y_bounds[0] <= s.y <= config.y_bounds[1]):
        return False
    if not (config.v_bounds[0] - 1e-9 <= s.v <= config.v_bounds[1] + 1e-9):
        return False
    if grid.lookup(s.x, s.y) >= grid.p_invalid:
        return False
    for obj in world.objects:
        ox, oy, oth = obj.pose_at(t)
        if obb_overlap(s.x, s.y, s.theta, params.length, params.width, ox, oy, oth, obj.length, obj.width):
            return False
    return True


class _Witness:
    __slots__ = ("norm", "rep")

    def __init__(self, norm, rep) -> None:
        self.norm = norm
        self.rep = rep


class TreeNode:
    __slots__ = (
        "state", "t", "input", "parent", "children",
        "cost", "state_cost_w", "active", "norm", "slot",
    )

    def __init__(self, state, t, u, parent, cost, state_cost_w, norm) -> None:
        self.state = state
        self.t = t
        self.input = u
        self.parent = parent
        self.children = []
        self.cost = cost
        self.state_cost_w = state_cost_w
        self.active = True
        self.norm = norm
        self.slot = -1


@dataclass
class PlanResult:
    solved: bool
    trajectory: Optional[Trajectory]
    cost: float
    iterations: int
    wall_time: float
    n_nodes: int
    n_witnesses: int
    cost_history: list = field(default_factory=list)


class PlannerTree:
    """Single-query search tree with active/witness bookkeeping.

    Not shared between queries; one instance per call to plan().
    """

    def __init__(
        self,
        start: VehicleState,
        start_time: float,
        goal: GoalRegion,
        grid: PenaltyGrid,
        world: WorldModel,
        config: PlannerConfig,
        weights: CostWeights,
        params: VehicleParams,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        if config.x_bounds is None or config.y_bounds is None:
            raise ValueError("planner config needs x_bounds and y_bounds")
        self.goal = goal
        self.grid = grid
        self.world = world
        self.config = config
        self.weights = weights
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
        self.iterations_used = 0
        self.n_nodes = 0
        self.best_cost = math.inf
        self.best_trajectory: Optional[Trajectory] = None
        self.cost_history: list = []

        self._inv_x = 1.0 / config.metric_xy_scale
        self._inv_y = 1.0 / config.metric_xy_scale
        self._inv_v = 1.0 / (config.v_bounds[1] - config.v_bounds[0])
        self._n_sub = substep_count(config.t_prop, config.t_step)

        # Uniform-cell bucket indices over the normalized state space. The
        # heading dimension wraps, so its cell count is fixed per cell size.
        self._near_cells: dict = {}
        self._near_kth = max(1, int(math.ceil(1.0 / config.d_near - 1e-9)))
        self._wit_cells: dict = {}
        self._wit_kth = max(1, int(math.ceil(1.0 / config.d_prune - 1e-9)))
        self.n_witnesses = 0

        # Flat arrays over active nodes for exact nearest-node fallback.
        cap = 1024
        self._arr = np.empty((cap, 4))
        self._slot_nodes: list = []

        if not is_state_valid(start, start_time, grid, world, config, params):
            raise InvalidStartError("start state is invalid")
        scw = self._state_cost_w(start.x, start.y, start.v, start_time)
        self.root = TreeNode(start, start_time, None, None, 0.0, scw, self._norm_state(start))
        self._add_active(self.root)
        self.n_nodes = 1
        w = _Witness(self.root.norm, self.root)
        self._wit_cells.setdefault(self._wit_key(self.root.norm), []).append(w)
        self.n_witnesses = 1
        if goal.contains_xy(start.x, start.y):
            self._record_solution(self.root)

    # -- normalized-space helpers ------------------------------------------

    def _norm_state(self, s: VehicleState):
        return (
            (s.x - self.config.x_bounds[0]) * self._inv_x,
            (s.y - self.config.y_bounds[0]) * self._inv_y,
            (normalize_angle(s.theta) + math.pi) / _TWO_PI,
            (s.v - self.config.v_bounds[0]) * self._inv_v,
        )

    @staticmethod
    def _dist_n(a, b) -> float:
        dx = a[0] - b[0]
        dy = a[1] - b[1]
        dth = abs(a[2] - b[2])
        if dth > 0.5:
            dth = 1.0 - dth
        dv = a[3] - b[3]
        return math.sqrt(dx * dx + dy * dy + dth * dth + dv * dv)

    def _near_key(self, n):
        cell = self.config.d_near
        it = int(n[2] / cell)
        if it >= self._near_kth:
            it = self._near_kth - 1
        return (math.floor(n[0] / cell), math.floor(n[1] / cell), it, math.floor(n[3] / cell))

    def _wit_key(self, n):
        cell = self.config.d_prune
        it = int(n[2] / cell)
        if it >= self._wit_kth:
            it = self._wit_kth - 1
        return (math.floor(n[0] / cell), math.floor(n[1] / cell), it, math.floor(n[3] / cell))

    def _add_active(self, node: TreeNode) -> None:
        self._near_cells.setdefault(self._near_key(node.norm), []).append(node)
        slot = len(self._slot_nodes)
        if slot >= len(self._arr):
            grown = np.empty((2 * len(self._arr), 4))
            grown[: len(self._arr)] = self._arr
            self._arr = grown
        self._arr[slot] = node.norm
        self._slot_nodes.append(node)
        node.slot = slot

    def _deactivate(self, node: TreeNode) -> None:
        node.active = False
        self._near_cells[self._near_key(node.norm)].remove(node)
        self._arr[node.slot] = (1e9, 1e9, 0.0, 1e9)

    # -- spec operations ----------------------------------------------------

    def select(self, x_rand: VehicleState) -> TreeNode:
        """Lowest-cost active node within d_near of the sample, else the nearest."""
        n = self._norm_state(x_rand)
        d_near = self.config.d_near
        ix, iy, it, iv = self._near_key(n)
        kth = self._near_kth
        best = None
        best_cost = math.inf
        for ax in (ix - 1, ix, ix + 1):
            for ay in (iy - 1, iy, iy + 1):
                for at in ((it - 1) % kth, it, (it + 1) % kth):
                    for av in (iv - 1, iv, iv + 1):
                        bucket = self._near_cells.get((ax, ay, at, av))
                        if not bucket:
                            continue
                        for node in bucket:
                            if self._dist_n(node.norm, n) <= d_near and node.cost < best_cost:
                                best = node
                                best_cost = node.cost
        if best is not None:
            return best
        # No active node in range: exact nearest via the flat arrays.
        m = len(self._slot_nodes)
        arr = self._arr[:m]
        dx = arr[:, 0] - n[0]
        dy = arr[:, 1] - n[1]
        dth = np.abs(arr[:, 2] - n[2])
        dth = np.minimum(dth, 1.0 - dth)
        dv = arr[:, 3] - n[3]
        i = int(np.argmin(dx * dx + dy * dy + dth * dth + dv * dv))
        return self._slot_nodes[i]

    def _state_cost_w(self, x: float, y: float, v: float, t: float) -> float:
        w = self.weights
        c = w.desired_velocity * abs(v - w.v_desired) + w.penalty_grid * self.grid.lookup(x, y)
        if self.world.objects:
            c += w.target_clearance * clearance_cost_xy(x, y, t, self.world)
        return c

    def propagate_checked(self, node: TreeNode, u: ControlInput):
        """Propagate a constant input from a node, validating every substate.

        Returns the endpoint (x, y, theta, v) or None if any substate is
        invalid at its own absolute timestamp.
        """
        cfg = self.config
        p = self.params
        grid = self.grid
        cells = grid.cells
        gx0 = grid.origin.x
        gy0 = grid.origin.y
        inv_res = 1.0 / grid.resolution
        n_cols = grid.n_cols
        n_rows = grid.n_rows
        p_invalid = grid.p_invalid
        x_lo, x_hi = cfg.x_bounds
        y_lo, y_hi = cfg.y_bounds
        v_lo, v_hi = p.v_bounds
        wheelbase = p.wheelbase
        ts = cfg.t_step
        a = u.a
        tan_d = math.tan(u.delta)
        objs = self.world.objects
        ego_l = p.length
        ego_w = p.width

        s = node.state
        x = s.x
        y = s.y
        th = s.theta
        v = s.v
        t0 = node.t
        for k in range(1, self._n_sub + 1):
            x = x + ts * v * math.cos(th)
            y = y + ts * v * math.sin(th)
            th = normalize_angle(th + ts * (v / wheelbase) * tan_d)
            v = v + ts * a
            if v < v_lo:
                v = v_lo
            elif v > v_hi:
                v = v_hi
            if x < x_lo or x > x_hi or y < y_lo or y > y_hi:
                return None
            col = int((x - gx0) * inv_res)
            row = int((y - gy0) * inv_res)
            if x < gx0 or y < gy0 or col >= n_cols or row >= n_rows:
                return None
            if cells[row, col] >= p_invalid:
                return None
            if objs:
                t = t0 + k * ts
                for obj in objs:
                    ox, oy, oth = obj.pose_at(t)
                    if obb_overlap(x, y, th, ego_l, ego_w, ox, oy, oth, obj.length, obj.width):
                        return None
        return (x, y, th, v)

    def _nearest_witness(self, n):
        ix, iy, it, iv = self._wit_key(n)
        kth = self._wit_kth
        d_prune = self.config.d_prune
        best = None
        best_d = math.inf
        for ax in (ix - 1, ix, ix + 1):
            for ay in (iy - 1, iy, iy + 1):
                for at in ((it - 1) % kth, it, (it + 1) % kth):
                    for av in (iv - 1, iv, iv + 1):
                        bucket = self._wit_cells.get((ax, ay, at, av))
                        if not bucket:
                            continue
                        for w in bucket:
                            d = self._dist_n(w.norm, n)
                            if d < best_d:
                                best = w
                                best_d = d
        if best is not None and best_d <= d_prune:
            return best
        return None

    def try_insert(self, parent: TreeNode, endpoint, u: ControlInput) -> Optional[TreeNode]:
        """Witness-gated insertion of a propagation endpoint."""
        x, y, th, v = endpoint
        t_new = parent.t + self.config.t_prop
        scw = self._state_cost_w(x, y, v, t_new)
        dist = math.hypot(x - parent.state.x, y - parent.state.y)
        edge = (
            self.weights.path_length * dist
            + self.config.t_prop * (parent.state_cost_w + scw) / 2.0
        )
        cost = parent.cost + edge
        state = VehicleState(x, y, th, v)
        norm = self._norm_state(state)
        witness = self._nearest_witness(norm)
        if witness is not None and cost >= witness.rep.cost:
            return None
        node = TreeNode(state, t_new, u, parent, cost, scw, norm)
        parent.children.append(node)
        self.n_nodes += 1
        self._add_active(node)
        if witness is None:
            self._wit_cells.setdefault(self._wit_key(norm), []).append(_Witness(norm, node))
            self.n_witnesses += 1
        else:
            old = witness.rep
            witness.rep = node
            self._deactivate(old)
            self._prune_inactive_chain(old)
        if cost < self.best_cost and self.goal.contains_xy(x, y):
            self._record_solution(node)
        return node

    def _prune_inactive_chain(self, node: TreeNode) -> None:
        while (
            node is not None
            and not node.active
            and not node.children
            and node.parent is not None
        ):
            parent = node.parent
            parent.children.remove(node)
            node.parent = None
            self.n_nodes -= 1
            node = parent

    def _record_solution(self, node: TreeNode) -> None:
        self.best_cost = node.cost
        self.best_trajectory = _chain_trajectory(node)
        self.cost_history.append((self.iterations_used, node.cost))

    # -- main loop ----------------------------------------------------------

    def run_iteration(self) -> None:
        self.iterations_used += 1
        x_rand = sample_state(self.config, self.rng)
        node = self.select(x_rand)
        u = sample_input(self.config, self.rng, self.params)
        endpoint = self.propagate_checked(node, u)
        if endpoint is not None:
            self.try_insert(node, endpoint, u)

    def run(self, already_elapsed: float = 0.0) -> PlanResult:
        """Exhaust the remaining budget; seeding work done beforehand counts
        through iterations_used (iteration mode) or already_elapsed (wall mode)."""
        cfg = self.config
        if (cfg.iteration_budget is None) == (cfg.query_time is None):
            raise ValueError("exactly one of iteration_budget and query_time must be set")
        t0 = time.perf_counter()
        if cfg.iteration_budget is not None:
            while self.iterations_used < cfg.iteration_budget:
                self.run_iteration()
        else:
            deadline = t0 + cfg.query_time - already_elapsed
            while time.perf_counter() < deadline:
                self.run_iteration()
        wall = already_elapsed + time.perf_counter() - t0
        solved = self.best_trajectory is not None
        return PlanResult(
            solved=solved,
            trajectory=self.best_trajectory,
            cost=self.best_cost if solved else math.inf,
            iterations=self.iterations_used,
            wall_time=wall,
            n_nodes=self.n_nodes,
            n_witnesses=self.n_witnesses,
            cost_history=list(self.cost_history),
        )

    def iter_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)


def _chain_trajectory(node: TreeNode) -> Trajectory:
    samples = []
    while node is not None:
        samples.append(TimedState(node.state, node.t, node.input))
        node = node.parent
    samples.reverse()
    return Trajectory(samples)


def select_node(tree: PlannerTree, x_rand: VehicleState, d_near: Optional[float] = None) -> TreeNode:
    if d_near is not None and d_near != tree.config.d_near:
        raise ValueError("selection radius must match the tree's configured d_near")
    return tree.select(x_rand)


def extract_best_trajectory(tree: PlannerTree, goal: GoalRegion) -> Trajectory:
    """Root chain of the minimum-cost in-goal node still present in the tree."""
    best = None
    for node in tree.iter_nodes():
        if goal.contains_xy(node.state.x, node.state.y):
            if best is None or node.cost < best.cost:
                best = node
    if best is None:
        raise ValueError("tree has no node inside the goal region")
    return _chain_trajectory(best)


def plan(
    start: VehicleState,
    start_time: float,
    goal: GoalRegion,
    grid: PenaltyGrid,
    world: WorldModel,
    config: PlannerConfig,
    weights: CostWeights,
    params: VehicleParams,
    rng: Optional[np.random.Generator] = None,
) -> PlanResult:
    tree = PlannerTree(start, start_time, goal, grid, world, config, weights, params, rng)
    return tree.run()
