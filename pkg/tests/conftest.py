"""Shared test helpers: random geometry generators and profile oracles."""

from __future__ import annotations

import numpy as np
import pytest

from tgsim import LimitSet

#: Seven-waypoint solve of the bundled construction-site course (start -> goal).
COURSE_WP = [(63.5, 0.0), (53.0, -1.8), (43.5, -3.8), (33.0, -4.2),
             (23.0, -2.8), (12.0, 1.2), (2.0, 3.2)]


def random_waypoints(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Random waypoint chain with consecutive spacing in [0.8, 8] m."""
    if n is None:
        n = int(rng.integers(3, 16))
    heading = rng.uniform(0, 2 * np.pi)
    pts = [np.array([rng.uniform(-20, 20), rng.uniform(-20, 20)])]
    for _ in range(n - 1):
        heading += rng.uniform(-1.0, 1.0)
        step = rng.uniform(0.8, 8.0)
        pts.append(pts[-1] + step * np.array([np.cos(heading), np.sin(heading)]))
    return np.array(pts)


def random_limits(rng: np.random.Generator) -> LimitSet:
    a_max = rng.uniform(0.3, 2.0)
    d_max = rng.uniform(a_max, 2.5)
    return LimitSet(
        v_max=rng.uniform(0.8, 9.5),
        a_max=a_max,
        d_max=d_max,
        a_lat_max=rng.uniform(0.5, 3.0),
        j_max=rng.uniform(0.4, 3.0),
        kappa_max=rng.uniform(0.1, 1.0),
        d_mrm=rng.uniform(d_max, 4.0),
    )


def central_derivative(y, t) -> np.ndarray:
    """Three-point central finite difference on an unequally spaced grid."""
    y, t = np.asarray(y, float), np.asarray(t, float)
    d = np.empty_like(y)
    d0 = t[1:-1] - t[:-2]
    d1 = t[2:] - t[1:-1]
    d[1:-1] = (y[2:] * d0**2 - y[:-2] * d1**2 + y[1:-1] * (d1**2 - d0**2)) \
        / (d0 * d1 * (d0 + d1))
    d[0] = (y[1] - y[0]) / (t[1] - t[0])
    d[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])
    return d


def profile_violations(s, v, t, limits: LimitSet, tol: float = 0.05) -> list[str]:
    """Independent finite-difference feasibility oracle over (s, v, t)."""
    out = []
    v, t = np.asarray(v), np.asarray(t)
    a = central_derivative(v, t)
    if np.any(a > limits.a_max * (1 + tol) + 1e-9):
        out.append(f"accel {a.max():.4f} > {limits.a_max}")
    if np.any(-a > limits.d_max * (1 + tol) + 1e-9):
        out.append(f"decel {-a.min():.4f} > {limits.d_max}")
    if len(a) >= 3:
        j = central_derivative(a, t)
        if np.any(np.abs(j) > limits.j_max * (1 + tol) + 1e-9):
            out.append(f"jerk {np.abs(j).max():.4f} > {limits.j_max}")
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of a run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                name = nodeid.split("::")[-1].replace("test_acceptance_", "")
                lines.append((name, outcome))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in sorted(set(lines)):
            mark = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"[{mark}] {name.replace('_', ' ')}")
