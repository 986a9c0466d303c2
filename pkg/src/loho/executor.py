"""Trace-following short-horizon controller."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

from .core import Observation, PixelPoint, Primitive, Trace, Verb, Workspace
from .geometry import cumulative_lengths, dist, point_at, project
from .sim import GRASP_RADIUS, PLACE_TOLERANCE, V_MAX, Action, GripperCommand

# worst-case gap between pixel and metric distance: both endpoints round by
# up to half a pixel per axis
ROUNDING_SLACK_PX = 2.0


@dataclass(frozen=True)
class ExecutorConfig:
    lookahead_px: float = 50.0
    gain: float = 0.0005  # (m/step) per pixel of error
    horizon_h: int = 100
    v_max: float = V_MAX
    grasp_radius: float = GRASP_RADIUS
    place_tolerance: float = PLACE_TOLERANCE
    workspace: Workspace = field(default_factory=Workspace)

    def __post_init__(self) -> None:
        if self.lookahead_px <= 0:
            raise ValueError("lookahead_px must be > 0")
        if self.gain <= 0:
            raise ValueError("gain must be > 0")
        if self.horizon_h < 1:
            raise ValueError("horizon_h must be >= 1")

    @property
    def grasp_trigger_px(self) -> float:
        return self.workspace.length_to_px(self.grasp_radius) - ROUNDING_SLACK_PX

    @property
    def place_trigger_px(self) -> float:
        return self.workspace.length_to_px(self.place_tolerance) - ROUNDING_SLACK_PX


class Executor(Protocol):
    def act(self, obs: Observation, subtask: Primitive, trace: Trace) -> Action: ...


def goal_px(obs: Observation, subtask: Primitive, workspace: Workspace) -> PixelPoint:
    if subtask.destination is not None:
        return workspace.to_px(subtask.destination)
    return obs.objects[subtask.target].px


def _farthest_in_disc(points, cum, center: PixelPoint, r: float) -> float | None:
    """Largest arc length at which the polyline lies within ``r`` of ``center``."""
    cx, cy = center
    for i in range(len(points) - 2, -1, -1):
        (ax, ay), (bx, by) = points[i], points[i + 1]
        dx, dy = bx - ax, by - ay
        fx, fy = ax - cx, ay - cy
        qa = dx * dx + dy * dy
        qb = 2.0 * (fx * dx + fy * dy)
        qc = fx * fx + fy * fy - r * r
        if qa == 0.0:
            if qc <= 0.0:
                return cum[i + 1]
            continue
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            continue
        root = math.sqrt(disc)
        t0, t1 = (-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)
        if t1 < 0.0 or t0 > 1.0:
            continue
        return cum[i] + min(t1, 1.0) * (cum[i + 1] - cum[i])
    return None


def pursuit_target(gripper: PixelPoint, goal: PixelPoint, trace: Trace, lookahead: float) -> PixelPoint:
    """First waypoint one lookahead past the gripper's place on the trace.

    The trace is cut at the point nearest the goal. The gripper's place is
    read off the lookahead circle: the farthest trace point inside it, which
    on the trace sits exactly one lookahead past the nearest point. A trace
    that doubles back near the gripper therefore resolves to its later
    branch. Off the trace, the nearest point plus the lookahead is used.
    A trace that does not pass within ``lookahead`` of the goal gives no
    useful guidance, so the goal itself is returned.
    """
    if dist(gripper, goal) <= lookahead:
        return goal
    wps = trace.waypoints
    cum = cumulative_lengths(wps)
    s_goal, d_goal = project(goal, wps, cum)
    if d_goal > lookahead:
        return goal
    k = next((i for i, s in enumerate(cum) if s >= s_goal), len(cum) - 1)
    head = list(wps[:k]) + [point_at(wps, cum, s_goal)]
    if len(head) < 2:
        return goal
    head_cum = cum[:k] + [s_goal]
    want = _farthest_in_disc(head, head_cum, gripper, lookahead)
    if want is None:
        want = project(gripper, head, head_cum)[0] + lookahead
    for i in range(k):
        if cum[i] >= want:
            return wps[i]
    return goal


def act(obs: Observation, subtask: Primitive, trace: Trace, cfg: ExecutorConfig = ExecutorConfig()) -> Action:
    g = goal_px(obs, subtask, cfg.workspace)
    gx, gy = obs.gripper_px
    d_goal = dist(obs.gripper_px, g)

    cmd = GripperCommand.HOLD
    if subtask.verb is Verb.GRASP and d_goal <= cfg.grasp_trigger_px:
        cmd = GripperCommand.CLOSE_GRASP
    elif subtask.verb in (Verb.PLACE, Verb.DROP) and d_goal <= cfg.place_trigger_px:
        cmd = GripperCommand.OPEN_RELEASE

    tx, ty = pursuit_target(obs.gripper_px, g, trace, cfg.lookahead_px)
    vx, vy = cfg.gain * (tx - gx), cfg.gain * (ty - gy)
    speed = math.hypot(vx, vy)
    if speed > cfg.v_max:
        vx, vy = vx * cfg.v_max / speed, vy * cfg.v_max / speed
    return Action((vx, vy), cmd)


class PurePursuitExecutor:
    def __init__(self, cfg: ExecutorConfig = ExecutorConfig()):
        self.cfg = cfg

    def act(self, obs: Observation, subtask: Primitive, trace: Trace) -> Action:
        return act(obs, subtask, trace, self.cfg)


EXECUTORS = {"pure_pursuit": PurePursuitExecutor}


def make_executor(name: str, **kwargs) -> Executor:
    try:
        return EXECUTORS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown executor {name!r}; known: {sorted(EXECUTORS)}") from None
