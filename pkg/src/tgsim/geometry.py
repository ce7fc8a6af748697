"""Planar geometry helpers for containment, clearance, and footprint checks."""

from __future__ import annotations

import math

import numpy as np


def polygon_area_signed(poly: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise vertex order."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def normalize_polygon(poly) -> np.ndarray:
    """Drop a duplicated closing vertex and enforce CCW orientation."""
    p = np.asarray(poly, dtype=float).reshape(-1, 2)
    if len(p) >= 2 and np.allclose(p[0], p[-1]):
        p = p[:-1]
    if len(p) < 3:
        raise ValueError("polygon needs at least 3 distinct vertices")
    if polygon_area_signed(p) < 0:
        p = p[::-1].copy()
    return p


def point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    """Even-odd ray cast. Points on an edge count as inside."""
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            xi = x0 + (y - y0) / (y1 - y0) * (x1 - x0)
            if x < xi:
                inside = not inside
            elif x == xi:
                return True
    return inside


def dist_point_segment(px, py, ax, ay, bx, by) -> float:
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 <= 0.0:
        return math.hypot(px - ax, py - ay)
    u = ((px - ax) * dx + (py - ay) * dy) / L2
    u = min(1.0, max(0.0, u))
    return math.hypot(px - (ax + u * dx), py - (ay + u * dy))


def dist_point_polygon(x: float, y: float, poly: np.ndarray) -> float:
    """Distance to the polygon boundary, 0.0 if the point lies inside."""
    if point_in_polygon(x, y, poly):
        return 0.0
    n = len(poly)
    return min(
        dist_point_segment(x, y, poly[i, 0], poly[i, 1], poly[(i + 1) % n, 0], poly[(i + 1) % n, 1])
        for i in range(n)
    )


def polyline_clearance(xs: np.ndarray, ys: np.ndarray, poly: np.ndarray) -> float:
    """Minimum clearance of a sampled path to one polygon (0 if any point inside)."""
    best = math.inf
    for x, y in zip(xs, ys):
        d = dist_point_polygon(float(x), float(y), poly)
        if d < best:
            best = d
            if best == 0.0:
                break
    return best


def rectangle_corners(x: float, y: float, psi: float, length: float, width: float) -> np.ndarray:
    """Corners of a pose-centered, heading-aligned rectangle (CCW)."""
    c, s = math.cos(psi), math.sin(psi)
    hl, hw = length / 2.0, width / 2.0
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, p3):
        return True
    if o2 == 0 and on_seg(p1, p2, p4):
        return True
    if o3 == 0 and on_seg(p3, p4, p1):
        return True
    if o4 == 0 and on_seg(p3, p4, p2):
        return True
    return False


def polygons_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    """True if convex-or-concave polygons overlap (edge crossing or containment)."""
    na, nb = len(a), len(b)
    for i in range(na):
        for j in range(nb):
            if _segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]):
                return True
    if point_in_polygon(a[0, 0], a[0, 1], b) or point_in_polygon(b[0, 0], b[0, 1], a):
        return True
    return False


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))
