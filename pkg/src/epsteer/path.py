"""Closed parameter loops: construction, discretization, orientation.

A loop is a closed polyline of n_intervals + 1 points (first == last
exactly) with normalized arc coordinates built from chord lengths:
dC_j = |chord_j| / L with L the total length, so the arc coordinate runs
from 0 to 1 and rho = L**2 relates squared parameter increments to dC**2.
The default loop is the unit circle about the exceptional point (0, 1)
starting on the degenerate axis at (0, 0), discretized into 100 intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .hamiltonian import EP_EXCLUSION_RADIUS, ParameterPoint, as_point

__all__ = [
    "LoopSpec",
    "ParameterLoop",
    "OrientedLoop",
    "build_loop",
    "default_loop_spec",
    "orient",
    "min_ep_distance",
    "winding_number",
    "CCW",
    "CW",
]

CCW = "ccw"
CW = "cw"


def _direction(value: str) -> str:
    d = str(value).strip().lower()
    if d not in (CCW, CW):
        raise InputError(f"direction must be 'ccw' or 'cw', got {value!r}")
    return d


@dataclass(frozen=True)
class LoopSpec:
    """Recipe for a closed discretized loop in the parameter plane."""

    kind: str = "circle"  # circle | ellipse | polyline
    center: ParameterPoint = ParameterPoint(0.0, 1.0)
    radii: tuple[float, float] = (1.0, 1.0)
    start_angle: float = -math.pi / 2
    n_intervals: int = 100
    polyline: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("circle", "ellipse", "polyline"):
            raise InputError(f"loop kind must be circle|ellipse|polyline, got {self.kind!r}")


def default_loop_spec(n_intervals: int = 100) -> LoopSpec:
    """Unit circle about the EP at (0, 1), starting at (0, 0)."""
    return LoopSpec(n_intervals=n_intervals)


@dataclass(frozen=True, eq=False)
class ParameterLoop:
    """Closed discretized loop with normalized arc coordinates.

    ``points`` has shape (n_intervals + 1, 2) with points[0] == points[-1]
    exactly; ``arc_coords`` runs 0 -> 1 strictly increasing; ``rho`` is the
    squared total chord length.
    """

    points: np.ndarray
    arc_coords: np.ndarray
    rho: float
    spec: Optional[LoopSpec] = None

    @property
    def n_intervals(self) -> int:
        return self.points.shape[0] - 1

    @property
    def dc(self) -> np.ndarray:
        """Arc increments per interval; sums to 1."""
        return np.diff(self.arc_coords)

    def point(self, j: int) -> ParameterPoint:
        return ParameterPoint(float(self.points[j, 0]), float(self.points[j, 1]))


@dataclass(frozen=True, eq=False)
class OrientedLoop:
    """A traversal of a ParameterLoop in a definite direction."""

    points: np.ndarray
    dc: np.ndarray
    direction: str
    loop: ParameterLoop

    @property
    def n_intervals(self) -> int:
        return self.points.shape[0] - 1

    def point(self, j: int) -> ParameterPoint:
        return ParameterPoint(float(self.points[j, 0]), float(self.points[j, 1]))


def _finish_loop(points: np.ndarray, spec: Optional[LoopSpec]) -> ParameterLoop:
    if points.shape[0] < 3:
        raise InputError("a closed loop needs at least 3 points")
    if not np.array_equal(points[0], points[-1]):
        raise InputError("loop is not closed: first and last point differ")
    distinct = np.unique(points[:-1], axis=0).shape[0]
    if distinct < 3:
        raise InputError(f"loop has only {distinct} distinct points, need >= 3")
    chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if np.any(chords == 0.0):
        raise InputError("loop has a zero-length interval")
    total = float(chords.sum())
    if total == 0.0:
        raise InputError("degenerate loop of zero length")
    arc = np.concatenate([[0.0], np.cumsum(chords / total)])
    arc[-1] = 1.0
    return ParameterLoop(points=points, arc_coords=arc, rho=total**2, spec=spec)


def build_loop(spec: LoopSpec) -> ParameterLoop:
    """Discretize a LoopSpec into a closed ParameterLoop.

    Circles and ellipses are sampled at n_intervals equal angles starting
    at ``start_angle`` and traversed counterclockwise; the closing point is
    an exact copy of the first. Polylines are taken as given and must be
    closed exactly.
    """
    if spec.kind == "polyline":
        if spec.polyline is None:
            raise InputError("polyline loop spec has no points")
        pts = np.asarray([as_point(p).as_array() for p in spec.polyline], dtype=float)
        return _finish_loop(pts, spec)

    a, b = (float(r) for r in spec.radii)
    if spec.kind == "circle":
        if a != b:
            raise InputError(f"circle radii must be equal, got {spec.radii}")
    if a <= 0.0 or b <= 0.0:
        raise InputError(f"radii must be positive, got {spec.radii}")
    if spec.n_intervals < 2:
        raise InputError(f"n_intervals must be >= 2, got {spec.n_intervals}")
    n = spec.n_intervals
    phi = spec.start_angle + 2.0 * math.pi * np.arange(n + 1) / n
    pts = np.empty((n + 1, 2), dtype=float)
    pts[:, 0] = spec.center.x + a * np.cos(phi)
    pts[:, 1] = spec.center.y + b * np.sin(phi)
    pts[-1] = pts[0]
    return _finish_loop(pts, spec)


def orient(loop, direction) -> OrientedLoop:
    """Traverse a loop counterclockwise (stored order) or clockwise.

    Clockwise traversal reverses the point sequence; by closure the start
    point is unchanged. Applying a clockwise orientation to an already
    clockwise traversal restores the original order (reversal is an
    involution).
    """
    d = _direction(direction)
    if isinstance(loop, OrientedLoop):
        if d == CCW:
            return loop
        flipped = CCW if loop.direction == CW else CW
        return OrientedLoop(
            points=loop.points[::-1].copy(),
            dc=loop.dc[::-1].copy(),
            direction=flipped,
            loop=loop.loop,
        )
    if not isinstance(loop, ParameterLoop):
        raise InputError(f"cannot orient a {type(loop).__name__}")
    dc = loop.dc
    if d == CCW:
        return OrientedLoop(points=loop.points.copy(), dc=dc.copy(), direction=CCW, loop=loop)
    return OrientedLoop(
        points=loop.points[::-1].copy(), dc=dc[::-1].copy(), direction=CW, loop=loop
    )


def _loop_points(loop) -> np.ndarray:
    if isinstance(loop, (ParameterLoop, OrientedLoop)):
        return loop.points
    return np.asarray(loop, dtype=float)


def min_ep_distance(loop, eps: Sequence) -> float:
    """Smallest Euclidean distance from any loop point to any EP; inf if none."""
    pts = _loop_points(loop)
    best = math.inf
    for ep in eps:
        p = as_point(ep)
        d = np.hypot(pts[:, 0] - p.x, pts[:, 1] - p.y).min()
        best = min(best, float(d))
    return best


def winding_number(loop, ep) -> int:
    """Signed number of turns of the loop about ``ep`` (+1 per CCW turn)."""
    p = as_point(ep)
    pts = _loop_points(loop)
    if min_ep_distance(pts, [p]) < EP_EXCLUSION_RADIUS:
        raise InputError(
            f"loop passes within {EP_EXCLUSION_RADIUS} of ({p.x}, {p.y})"
        )
    ang = np.arctan2(pts[:, 1] - p.y, pts[:, 0] - p.x)
    dang = np.diff(ang)
    dang = (dang + math.pi) % (2.0 * math.pi) - math.pi
    return int(round(float(dang.sum()) / (2.0 * math.pi)))
