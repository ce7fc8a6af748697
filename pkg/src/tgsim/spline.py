"""Natural cubic spline interpolation of waypoint paths.

A path is modeled as two coupled one-dimensional cubic splines x(u), y(u)
over the chord-length parameter u, with natural boundary conditions
(zero second derivative at both ends). The interpolant is C2: position,
tangent, and second derivative are continuous across interior knots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Waypoints closer than this are treated as one click and merged.
MERGE_DISTANCE_M = 0.5


class TooFewWaypoints(ValueError):
    """Fewer than two distinct waypoints remain after merging."""


class NonFiniteInput(ValueError):
    """Waypoint coordinates contain NaN or infinity."""


def merge_waypoints(waypoints) -> np.ndarray:
    """Drop consecutive waypoints closer than ``MERGE_DISTANCE_M``.

    Parameters
    ----------
    waypoints : (N, 2) array-like
        Raw clicked coordinates in meters.

    Returns
    -------
    (M, 2) ndarray with consecutive spacing >= MERGE_DISTANCE_M.
    """
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if pts.size == 0:
        return pts
    if not np.isfinite(pts).all():
        raise NonFiniteInput("waypoints must have finite coordinates")
    kept = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - kept[-1])) >= MERGE_DISTANCE_M:
            kept.append(p)
    return np.asarray(kept)


def _natural_second_derivatives(u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Solve the tridiagonal system for knot second derivatives, M[0]=M[-1]=0."""
    n = len(u)
    m = np.zeros(n)
    if n < 3:
        return m
    h = np.diff(u)
    # interior equations: h[i-1]*M[i-1] + 2(h[i-1]+h[i])*M[i] + h[i]*M[i+1] = rhs[i]
    rhs = 6.0 * ((p[2:] - p[1:-1]) / h[1:] - (p[1:-1] - p[:-2]) / h[:-1])
    k = n - 2
    diag = 2.0 * (h[:-1] + h[1:]).copy()
    sub = h[:-1].copy()
    sup = h[1:].copy()
    # Thomas algorithm
    for i in range(1, k):
        w = sub[i] / diag[i - 1]
        diag[i] -= w * sup[i - 1]
        rhs[i] -= w * rhs[i - 1]
    sol = np.empty(k)
    sol[-1] = rhs[-1] / diag[-1]
    for i in range(k - 2, -1, -1):
        sol[i] = (rhs[i] - sup[i] * sol[i + 1]) / diag[i]
    m[1:-1] = sol
    return m


@dataclass(frozen=True)
class SplineModel:
    """C2 cubic spline path x(u), y(u) over the chord-length parameter."""

    u: np.ndarray
    x: np.ndarray
    y: np.ndarray
    mx: np.ndarray
    my: np.ndarray

    def __post_init__(self):
        for arr in (self.u, self.x, self.y, self.mx, self.my):
            arr.setflags(write=False)

    @property
    def u_end(self) -> float:
        return float(self.u[-1])

    def _segments(self, uq: np.ndarray) -> tuple:
        uq = np.clip(np.asarray(uq, dtype=float), self.u[0], self.u[-1])
        idx = np.clip(np.searchsorted(self.u, uq, side="right") - 1, 0, len(self.u) - 2)
        h = self.u[idx + 1] - self.u[idx]
        a = (self.u[idx + 1] - uq) / h
        b = (uq - self.u[idx]) / h
        return idx, h, a, b

    def eval(self, uq) -> tuple[np.ndarray, np.ndarray]:
        """Position (x, y) at parameter values uq."""
        idx, h, a, b = self._segments(uq)
        out = []
        for p, m in ((self.x, self.mx), (self.y, self.my)):
            val = (
                a * p[idx]
                + b * p[idx + 1]
                + ((a**3 - a) * m[idx] + (b**3 - b) * m[idx + 1]) * h**2 / 6.0
            )
            out.append(val)
        return out[0], out[1]

    def deriv(self, uq, order: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """First or second derivative (dx, dy) w.r.t. the parameter."""
        idx, h, a, b = self._segments(uq)
        out = []
        for p, m in ((self.x, self.mx), (self.y, self.my)):
            if order == 1:
                val = (p[idx + 1] - p[idx]) / h + (
                    -(3 * a**2 - 1) * m[idx] + (3 * b**2 - 1) * m[idx + 1]
                ) * h / 6.0
            elif order == 2:
                val = a * m[idx] + b * m[idx + 1]
            else:
                raise ValueError("order must be 1 or 2")
            out.append(val)
        return out[0], out[1]

    def curvature(self, uq) -> np.ndarray:
        """Signed curvature kappa = (x'y'' - y'x'') / (x'^2 + y'^2)^(3/2)."""
        dx, dy = self.deriv(uq, 1)
        ddx, ddy = self.deriv(uq, 2)
        speed2 = dx**2 + dy**2
        return (dx * ddy - dy * ddx) / np.maximum(speed2, 1e-12) ** 1.5

    def heading(self, uq) -> np.ndarray:
        dx, dy = self.deriv(uq, 1)
        return np.arctan2(dy, dx)

    def arc_length_table(self, max_du: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
        """Dense (u, s) table from chordal integration for s(u) inversion."""
        us = [np.array([self.u[0]])]
        for i in range(len(self.u) - 1):
            h = self.u[i + 1] - self.u[i]
            steps = max(16, int(np.ceil(h / max_du)))
            us.append(np.linspace(self.u[i], self.u[i + 1], steps + 1)[1:])
        u_dense = np.concatenate(us)
        xs, ys = self.eval(u_dense)
        seg = np.hypot(np.diff(xs), np.diff(ys))
        s_dense = np.concatenate([[0.0], np.cumsum(seg)])
        return u_dense, s_dense


def fit_spline(waypoints) -> SplineModel:
    """Fit a natural C2 cubic spline through the given waypoints.

    Near-duplicate waypoints (closer than 0.5 m) are merged first. Raises
    ``TooFewWaypoints`` if fewer than two distinct points remain and
    ``NonFiniteInput`` on NaN/inf coordinates.
    """
    pts = merge_waypoints(waypoints)
    if len(pts) < 2:
        raise TooFewWaypoints(f"need >= 2 distinct waypoints, got {len(pts)}")
    chords = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    u = np.concatenate([[0.0], np.cumsum(chords)])
    mx = _natural_second_derivatives(u, pts[:, 0])
    my = _natural_second_derivatives(u, pts[:, 1])
    return SplineModel(u=u, x=pts[:, 0].copy(), y=pts[:, 1].copy(), mx=mx, my=my)
