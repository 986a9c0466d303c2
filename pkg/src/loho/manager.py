"""Task managers: predict the completed/remaining split and the remaining trace.

A manager sees the instruction, the current observation and the memory text
from its previous call. Nothing else: no simulator state, no older frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .core import (
    EmptyPlan,
    Observation,
    PixelPoint,
    PlanState,
    Primitive,
    Trace,
    Verb,
    Workspace,
    parse_memory,
    recovery_drop,
)
from .geometry import resample, round_half_up

DEFAULT_K_WP = 8


@dataclass(frozen=True)
class Instruction:
    """The task ``x``: the full ordered plan plus the scene's object ids and pixel frame."""

    plan: tuple[Primitive, ...]
    objects: tuple[str, ...]
    workspace: Workspace = Workspace()


@dataclass(frozen=True)
class ManagerOutput:
    plan: PlanState
    trace: Optional[Trace]
    subtask_text: Optional[str]

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "trace": self.trace.to_list() if self.trace is not None else None,
            "subtask_text": self.subtask_text,
        }

    @classmethod
    def from_dict(cls, d) -> "ManagerOutput":
        return cls(
            PlanState.from_dict(d["plan"]),
            Trace(tuple(map(tuple, d["trace"]))) if d["trace"] is not None else None,
            d["subtask_text"],
        )


class TaskManager(Protocol):
    def plan(self, instruction: Instruction, obs: Observation, memory: str) -> ManagerOutput: ...


def describe(p: Primitive) -> str:
    if p.verb is Verb.PLACE or p.verb is Verb.PUSH:
        return f"{p.verb.value} the {p.target} at ({p.destination[0]:g}, {p.destination[1]:g})"
    return f"{p.verb.value} the {p.target}"


def _grasp_evidence(p: Primitive, obs: Observation) -> bool:
    return obs.held == p.target or obs.objects[p.target].at_destination


def _evidence(p: Primitive, obs: Observation) -> bool:
    if p.verb is Verb.GRASP:
        return _grasp_evidence(p, obs)
    if p.verb is Verb.PLACE or p.verb is Verb.PUSH:
        return obs.objects[p.target].at_destination and obs.held != p.target
    # open/close leave no trace in an Observation
    return False


def detect_progress(obs: Observation, prior: PlanState) -> PlanState:
    """Move the split according to what the observation shows.

    Recovery drops from the prior are discarded and re-derived. A completed
    grasp whose object is neither held nor at its destination is revoked,
    together with everything after it; then the split advances over every
    primitive whose evidence holds.
    """
    plan = [p for p in prior.primitives if p.verb is not Verb.DROP]
    k = sum(1 for p in prior.completed if p.verb is not Verb.DROP)
    for i in range(k):
        p = plan[i]
        if p.verb is Verb.GRASP and not _grasp_evidence(p, obs):
            k = i
            break
    while k < len(plan) and _evidence(plan[k], obs):
        k += 1
    completed, remaining = plan[:k], plan[k:]
    if obs.held is not None and (not remaining or remaining[0].target != obs.held):
        remaining = [recovery_drop(obs.held, plan)] + remaining
    return PlanState(tuple(completed), tuple(remaining))


def trace_path(obs: Observation, remaining: Sequence[Primitive], workspace: Workspace) -> list[PixelPoint]:
    """Unresampled path: gripper, then each primitive's target and destination."""
    path = [obs.gripper_px]
    for p in remaining:
        path.append(obs.objects[p.target].px)
        if p.destination is not None:
            path.append(workspace.to_px(p.destination))
    return path


def resample_trace(path: Sequence[PixelPoint], k_wp: int) -> Trace:
    pts = resample(path, k_wp)
    wps = [tuple(path[0])]
    wps += [(round_half_up(x), round_half_up(y)) for x, y in pts[1:-1]]
    wps.append(tuple(path[-1]))
    return Trace(tuple(wps))


def build_trace(
    obs: Observation,
    remaining: Sequence[Primitive],
    k_wp: int = DEFAULT_K_WP,
    workspace: Workspace = Workspace(),
) -> Trace:
    if not remaining:
        raise EmptyPlan("no remaining primitives, nothing to trace")
    return resample_trace(trace_path(obs, remaining, workspace), k_wp)


class ScriptedManager:
    """Rule-based manager built on :func:`detect_progress` and :func:`build_trace`."""

    def __init__(self, k_wp: int = DEFAULT_K_WP):
        if k_wp < 2:
            raise ValueError("k_wp must be >= 2")
        self.k_wp = k_wp

    def plan(self, instruction: Instruction, obs: Observation, memory: str) -> ManagerOutput:
        prior = parse_memory(memory, instruction.objects, instruction.plan)
        state = detect_progress(obs, prior)
        if not state.remaining:
            return ManagerOutput(state, None, None)
        trace = build_trace(obs, state.remaining, self.k_wp, instruction.workspace)
        return ManagerOutput(state, trace, describe(state.remaining[0]))


MANAGERS = {"scripted": ScriptedManager}


def make_manager(name: str, **kwargs) -> TaskManager:
    try:
        return MANAGERS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown manager {name!r}; known: {sorted(MANAGERS)}") from None
