"""Planar geometry primitives for collision checking.

Points, simple polygons and oriented boxes, plus point-in-polygon
(ray casting, boundary counts as inside) and polygon overlap tests.
Everything here is immutable and safe to share between planner instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple


class Point2(NamedTuple):
    x: float
    y: float


def _signed_area(vertices) -> float:
    area = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return 0.5 * area


class Polygon:
    """Simple polygon; vertex order is normalized to counter-clockwise."""

    __slots__ = ("vertices",)

    def __init__(self, vertices: Iterable) -> None:
        verts = tuple(Point2(float(x), float(y)) for x, y in vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if _signed_area(verts) < 0.0:
            verts = verts[::-1]
        self.vertices = verts

    def __repr__(self) -> str:
        return f"Polygon({list(self.vertices)!r})"


@dataclass(frozen=True)
class OrientedBox:
    center: Point2
    heading: float
    length: float
    width: float

    def __post_init__(self) -> None:
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError("box length and width must be positive")


def box_corners(cx: float, cy: float, heading: float, length: float, width: float):
    """Corner coordinates of an oriented box, counter-clockwise."""
    c = math.cos(heading)
    s = math.sin(heading)
    hl = 0.5 * length
    hw = 0.5 * width
    return [
        (cx + c * hl - s * hw, cy + s * hl + c * hw),
        (cx - c * hl - s * hw, cy - s * hl + c * hw),
        (cx - c * hl + s * hw, cy - s * hl - c * hw),
        (cx + c * hl + s * hw, cy + s * hl - c * hw),
    ]


def box_to_polygon(box: OrientedBox) -> Polygon:
    return Polygon(box_corners(box.center.x, box.center.y, box.heading, box.length, box.width))


_EPS = 1e-12


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    scale = max(abs(bx - ax), abs(by - ay), 1.0)
    if abs(cross) > 1e-9 * scale:
        return False
    dot = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
    return -_EPS <= dot <= (bx - ax) ** 2 + (by - ay) ** 2 + _EPS


def point_in_polygon(p: Point2, poly: Polygon) -> bool:
    """Ray-casting containment test; boundary points count as inside."""
    px, py = p
    verts = poly.vertices
    n = len(verts)
    inside = False
    ax, ay = verts[-1]
    for i in range(n):
        bx, by = verts[i]
        if _on_segment(px, py, ax, ay, bx, by):
            return True
        # Half-open rule on y avoids double-counting vertex crossings.
        if (ay > py) != (by > py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
        ax, ay = bx, by
    return inside


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segments_intersect(a1, a2, b1, b2) -> bool:
    """True iff closed segments a1-a2 and b1-b2 share at least one point."""
    d1 = _orient(b1[0], b1[1], b2[0], b2[1], a1[0], a1[1])
    d2 = _orient(b1[0], b1[1], b2[0], b2[1], a2[0], a2[1])
    d3 = _orient(a1[0], a1[1], a2[0], a2[1], b1[0], b1[1])
    d4 = _orient(a1[0], a1[1], a2[0], a2[1], b2[0], b2[1])
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(a1[0], a1[1], b1[0], b1[1], b2[0], b2[1]):
        return True
    if d2 == 0 and _on_segment(a2[0], a2[1], b1[0], b1[1], b2[0], b2[1]):
        return True
    if d3 == 0 and _on_segment(b1[0], b1[1], a1[0], a1[1], a2[0], a2[1]):
        return True
    if d4 == 0 and _on_segment(b2[0], b2[1], a1[0], a1[1], a2[0], a2[1]):
        return True
    return False


def polygons_overlap(a: Polygon, b: Polygon) -> bool:
    """True iff the two simple polygons share any point.

    Vertex containment alone misses cross-shaped configurations, so edge
    pairs are tested explicitly as well.
    """
    for v in a.vertices:
        if point_in_polygon(v, b):
            return True
    for v in b.vertices:
        if point_in_polygon(v, a):
            return True
    na = len(a.vertices)
    nb = len(b.vertices)
    for i in range(na):
        p1 = a.vertices[i]
        p2 = a.vertices[(i + 1) % na]
        for j in range(nb):
            q1 = b.vertices[j]
            q2 = b.vertices[(j + 1) % nb]
            if segments_intersect(p1, p2, q1, q2):
                return True
    return False


def obb_overlap(
    cx1, cy1, h1, l1, w1,
    cx2, cy2, h2, l2, w2,
) -> bool:
    """Separating-axis overlap test for two oriented boxes.

    Touching boundaries count as overlap (collision-conservative).
    Scalar arguments keep this cheap enough for per-substate checks.
    """
    dx = cx2 - cx1
    dy = cy2 - cy1
    # Quick reject: circumscribed circles.
    r1 = 0.5 * math.hypot(l1, w1)
    r2 = 0.5 * math.hypot(l2, w2)
    if dx * dx + dy * dy > (r1 + r2) ** 2:
        return False
    c1 = math.cos(h1)
    s1 = math.sin(h1)
    c2 = math.cos(h2)
    s2 = math.sin(h2)
    hl1 = 0.5 * l1
    hw1 = 0.5 * w1
    hl2 = 0.5 * l2
    hw2 = 0.5 * w2
    for ax, ay in ((c1, s1), (-s1, c1), (c2, s2), (-s2, c2)):
        ra = hl1 * abs(ax * c1 + ay * s1) + hw1 * abs(-ax * s1 + ay * c1)
        rb = hl2 * abs(ax * c2 + ay * s2) + hw2 * abs(-ax * s2 + ay * c2)
        if abs(ax * dx + ay * dy) > ra + rb:
            return False
    return True
