"""Predicted traffic participants and the repulsive clearance cost.

Predictions are scenario inputs: timestamped pose samples per object,
interpolated linearly in position and shortest-arc in heading. The
clearance cost is an additive Gaussian-shaped repulsive field around each
object's time-dependent predicted position; squared offsets are divided
by the first power of the sigmas, matching the planner's tuned field
widths, so this is deliberately not a unit-normalized Gaussian.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .vehicle import VehicleState, normalize_angle


class ObjectPrediction:
    """Timestamped pose sequence with a rectangular footprint."""

    def __init__(self, obj_id, length: float, width: float, poses) -> None:
        poses = [(float(t), float(x), float(y), float(th)) for t, x, y, th in poses]
        if not poses:
            raise ValueError(f"object {obj_id}: needs at least one pose")
        times = [p[0] for p in poses]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError(f"object {obj_id}: pose times must be strictly increasing")
        if length <= 0.0 or width <= 0.0:
            raise ValueError(f"object {obj_id}: footprint must be positive")
        self.id = obj_id
        self.length = float(length)
        self.width = float(width)
        self.poses = poses
        self._times = times
        # Unwrapped headings make linear interpolation follow the shortest arc.
        self._thetas = np.unwrap([p[3] for p in poses]).tolist()
        self._static = len(poses) == 1 or all(
            p[1:] == poses[0][1:] for p in poses[1:]
        )

    def pose_at(self, t: float):
        """Interpolated (x, y, theta); clamped outside the sampled horizon."""
        poses = self.poses
        if self._static or t <= poses[0][0]:
            p = poses[0]
            return p[1], p[2], p[3]
        if t >= poses[-1][0]:
            p = poses[-1]
            return p[1], p[2], p[3]
        i = bisect_right(self._times, t)
        t0, x0, y0, _ = poses[i - 1]
        t1, x1, y1, _ = poses[i]
        w = (t - t0) / (t1 - t0)
        th0 = self._thetas[i - 1]
        th1 = self._thetas[i]
        return (
            x0 + w * (x1 - x0),
            y0 + w * (y1 - y0),
            normalize_angle(th0 + w * (th1 - th0)),
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ObjectPrediction)
            and self.id == other.id
            and self.length == other.length
            and self.width == other.width
            and self.poses == other.poses
        )


class FieldParams:
    """Repulsive field shape of one object: amplitude and axis spreads."""

    def __init__(self, amplitude: float = 100.0, sigma_x: float = 3.0, sigma_y: float = 2.0) -> None:
        if amplitude < 0.0 or sigma_x <= 0.0 or sigma_y <= 0.0:
            raise ValueError("field amplitude must be >= 0 and sigmas > 0")
        self.amplitude = float(amplitude)
        self.sigma_x = float(sigma_x)
        self.sigma_y = float(sigma_y)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FieldParams)
            and self.amplitude == other.amplitude
            and self.sigma_x == other.sigma_x
            and self.sigma_y == other.sigma_y
        )


class WorldModel:
    """The perceived object set with per-object field parameters."""

    def __init__(self, objects=(), fields=None) -> None:
        self.objects = list(objects)
        if fields is None:
            fields = [FieldParams() for _ in self.objects]
        self.fields = list(fields)
        if len(self.fields) != len(self.objects):
            raise ValueError("one field parameter set per object required")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, WorldModel)
            and self.objects == other.objects
            and self.fields == other.fields
        )


def predicted_pose_at(obj: ObjectPrediction, t: float):
    return obj.pose_at(t)


def clearance_cost_xy(x: float, y: float, t: float, world: WorldModel) -> float:
    total = 0.0
    for obj, fp in zip(world.objects, world.fields):
        ox, oy, _ = obj.pose_at(t)
        dx = x - ox
        dy = y - oy
        f = dx * dx / fp.sigma_x + dy * dy / fp.sigma_y
        total += fp.amplitude * math.exp(-f)
    return total


def clearance_cost(s: VehicleState, t: float, world: WorldModel) -> float:
    """Summed repulsive field of all objects at the state's position and time."""
    return clearance_cost_xy(s.x, s.y, t, world)
