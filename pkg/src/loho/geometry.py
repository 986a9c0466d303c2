"""Polyline helpers shared by the manager, executor, curator and metrics."""

from __future__ import annotations

import math
from bisect import bisect_right
from typing import Sequence

Point = tuple[float, float]


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def dist(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def cumulative_lengths(points: Sequence[Sequence[float]]) -> list[float]:
    cum = [0.0]
    for i in range(1, len(points)):
        cum.append(cum[-1] + dist(points[i - 1], points[i]))
    return cum


def point_at(points: Sequence[Sequence[float]], cum: Sequence[float], s: float) -> Point:
    """Point at arc length ``s`` along the polyline (clamped to its ends)."""
    if s <= 0.0:
        return (float(points[0][0]), float(points[0][1]))
    if s >= cum[-1]:
        return (float(points[-1][0]), float(points[-1][1]))
    i = bisect_right(cum, s) - 1
    i = min(i, len(points) - 2)
    seg = cum[i + 1] - cum[i]
    if seg == 0.0:
        return (float(points[i][0]), float(points[i][1]))
    a = (s - cum[i]) / seg
    p0, p1 = points[i], points[i + 1]
    return (p0[0] + a * (p1[0] - p0[0]), p0[1] + a * (p1[1] - p0[1]))


def resample(points: Sequence[Sequence[float]], n: int) -> list[Point]:
    """Arc-length resample a polyline to exactly ``n`` points.

    The first and last points are copied verbatim. A single point or a
    zero-length path yields ``n`` copies of the first point.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not points:
        raise ValueError("cannot resample an empty polyline")
    first = (float(points[0][0]), float(points[0][1]))
    last = (float(points[-1][0]), float(points[-1][1]))
    cum = cumulative_lengths(points)
    total = cum[-1]
    if total == 0.0:
        return [first] * n
    out = [first]
    for i in range(1, n - 1):
        out.append(point_at(points, cum, i * total / (n - 1)))
    out.append(last)
    return out


def project(point: Sequence[float], points: Sequence[Sequence[float]], cum: Sequence[float]) -> tuple[float, float]:
    """Nearest point on the polyline to ``point``.

    Returns ``(arc_length, distance)``; ties go to the earliest segment.
    """
    best_s, best_d = 0.0, dist(point, points[0])
    px, py = point[0], point[1]
    for i in range(len(points) - 1):
        ax, ay = points[i]
        bx, by = points[i + 1]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            continue
        u = ((px - ax) * dx + (py - ay) * dy) / seg2
        u = 0.0 if u < 0.0 else 1.0 if u > 1.0 else u
        d = math.hypot(ax + u * dx - px, ay + u * dy - py)
        if d < best_d:
            best_d = d
            best_s = cum[i] + u * (cum[i + 1] - cum[i])
    return best_s, best_d
