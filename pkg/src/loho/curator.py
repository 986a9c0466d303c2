"""Turn episode logs into manager supervision.

Spans come from the simulator's attachment events: a grasp event closes a
Grasp span and a release at the destination closes a Place span. Frames of
pure motion belong to the span that follows them.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .core import (
    LohoError,
    ObjectView,
    Observation,
    PlanState,
    Primitive,
    Trace,
    Verb,
    recovery_drop,
    render_memory,
)
from .manager import DEFAULT_K_WP, resample_trace, trace_path
from .orchestrator import EpisodeLog
from .sim import PLACE_TOLERANCE

SAMPLE_SCHEMA = 1
DEFAULT_STRIDE = 10


class EventPlanMismatch(LohoError, ValueError):
    pass


class NoAlternativeObject(LohoError, ValueError):
    pass


class NoGraspPlacePair(LohoError, ValueError):
    pass


@dataclass(frozen=True)
class PrimitiveSpan:
    primitive: Primitive
    t_start: int
    t_end: int

    def __post_init__(self) -> None:
        if self.t_start > self.t_end:
            raise ValueError(f"span starts after it ends: {self.t_start} > {self.t_end}")


@dataclass(frozen=True)
class SupervisionSample:
    frame: int
    observation: Observation
    memory_text: str
    target_plan: PlanState
    target_trace: Optional[Trace]
    recovery: bool = False
    terminal: bool = False

    def to_dict(self) -> dict:
        return {
            "schema": SAMPLE_SCHEMA,
            "frame": self.frame,
            "observation": self.observation.to_dict(),
            "memory_text": self.memory_text,
            "target_plan": self.target_plan.to_dict(),
            "target_trace": self.target_trace.to_list() if self.target_trace is not None else None,
            "recovery": self.recovery,
            "terminal": self.terminal,
        }

    @classmethod
    def from_dict(cls, d) -> "SupervisionSample":
        if d.get("schema") != SAMPLE_SCHEMA:
            raise ValueError(f"unsupported sample schema {d.get('schema')!r}")
        tr = d["target_trace"]
        return cls(
            int(d["frame"]),
            Observation.from_dict(d["observation"]),
            d["memory_text"],
            PlanState.from_dict(d["target_plan"]),
            Trace(tuple(map(tuple, tr))) if tr is not None else None,
            bool(d["recovery"]),
            bool(d["terminal"]),
        )


def segment(log: EpisodeLog) -> list[PrimitiveSpan]:
    """Map the attachment event stream onto the plan, in order.

    Slips are not spans. A grasp of an object other than the expected one
    followed by its release is a recovery excursion and is skipped. A release
    away from the destination undoes the grasp span before it.
    """
    plan = log.config.plan
    obs = log.observations()
    events = [e for e in log.events if e.kind != "slip"]
    spans: list[PrimitiveSpan] = []
    start = 0
    i = 0
    while i < len(events):
        e = events[i]
        k = len(spans)
        if k >= len(plan):
            raise EventPlanMismatch(f"event {e.kind} {e.object} at frame {e.frame} after the plan ended")
        p = plan[k]
        if p.verb is Verb.GRASP:
            if e.kind == "grasp" and e.object == p.target:
                spans.append(PrimitiveSpan(p, start, e.frame))
                start = e.frame + 1
            elif (
                e.kind == "grasp"
                and i + 1 < len(events)
                and events[i + 1].kind == "release"
                and events[i + 1].object == e.object
            ):
                i += 1  # wrong object picked up and put down again
            else:
                raise EventPlanMismatch(f"expected grasp {p.target}, got {e.kind} {e.object} at frame {e.frame}")
        elif p.verb is Verb.PLACE:
            if e.kind != "release" or e.object != p.target:
                raise EventPlanMismatch(f"expected release of {p.target}, got {e.kind} {e.object} at frame {e.frame}")
            if obs[e.frame].objects[p.target].at_destination:
                spans.append(PrimitiveSpan(p, start, e.frame))
                start = e.frame + 1
            else:
                # dropped short of the destination: the grasp did not stick
                start = spans.pop().t_start
        else:
            raise EventPlanMismatch(f"cannot segment verb {p.verb.value!r}")
        i += 1
    return spans


def _split_at(plan: Sequence[Primitive], spans: Sequence[PrimitiveSpan], t: int) -> PlanState:
    k = sum(1 for s in spans if s.t_end <= t)
    return PlanState(tuple(plan[:k]), tuple(plan[k:]))


def _trace_from_track(track: Sequence[tuple[int, int]], k_wp: int) -> Trace:
    if len(track) == 1:
        track = [track[0], track[0]]
    return resample_trace(track, k_wp)


def extract_samples(
    log: EpisodeLog,
    spans: Sequence[PrimitiveSpan],
    stride: int = DEFAULT_STRIDE,
    k_wp: int = DEFAULT_K_WP,
) -> list[SupervisionSample]:
    """One sample every ``stride`` frames up to the end of the last primitive.

    The trace label is the logged gripper track from the sample frame to the
    end of the final primitive (or of the log, if the plan never finished).
    A finished plan also yields a terminal sample at its last frame.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    plan = log.config.plan
    obs = log.observations()
    complete = len(spans) == len(plan) and len(plan) > 0
    t_end = spans[-1].t_end if complete else len(obs) - 1
    frames = list(range(0, t_end + 1, stride))
    if complete and frames[-1] != t_end:
        frames.append(t_end)
    track = [o.gripper_px for o in obs]

    out = []
    for t in frames:
        target = _split_at(plan, spans, t)
        memory = render_memory(_split_at(plan, spans, t - 1) if t > 0 else PlanState((), tuple(plan)))
        if not target.remaining:
            out.append(SupervisionSample(t, obs[t], memory, target, None, terminal=True))
            continue
        trace = _trace_from_track(track[t : t_end + 1], k_wp)
        out.append(SupervisionSample(t, obs[t], memory, target, trace))
    return out


def synthesize_failure(
    log: EpisodeLog,
    spans: Sequence[PrimitiveSpan],
    rng: random.Random,
    k_wp: int = DEFAULT_K_WP,
) -> SupervisionSample:
    """Fake a wrong-object grasp right after a real grasp.

    The held object is swapped for another graspable item; the original one
    is put back where it was picked from. The label prepends ``Drop <wrong>``
    and routes the trace to the wrong object's original spot, then on to the
    intended target and the rest of the plan.
    """
    plan = log.config.plan
    pairs = [
        i for i in range(len(spans) - 1)
        if spans[i].primitive.verb is Verb.GRASP
        and spans[i + 1].primitive.verb is Verb.PLACE
        and spans[i + 1].primitive.target == spans[i].primitive.target
    ]
    if not pairs:
        raise NoGraspPlacePair("log has no grasp-and-place span pair")
    i = rng.choice(pairs)
    grasp = spans[i].primitive
    intended = grasp.target
    alternatives = sorted(o.id for o in log.scene.objects if o.graspable and o.id != intended)
    if not alternatives:
        raise NoAlternativeObject(f"no graspable object other than {intended!r}")
    wrong = rng.choice(alternatives)

    obs = log.observations()
    frame = spans[i].t_end
    now, before = obs[frame], obs[spans[i].t_start]
    ws = log.scene.workspace
    dest = log.scene.destinations().get(wrong)
    wrong_at_dest = False
    if dest is not None:
        gx, gy = ws.to_world(now.gripper_px)
        wrong_at_dest = math.hypot(gx - dest[0], gy - dest[1]) <= PLACE_TOLERANCE

    objects = dict(now.objects)
    objects[intended] = before.objects[intended]
    objects[wrong] = ObjectView(now.gripper_px, True, wrong_at_dest)
    fake = Observation(frame, now.gripper_px, objects, wrong)

    completed, rest = tuple(plan[: plan.index(grasp)]), tuple(plan[plan.index(grasp):])
    drop = recovery_drop(wrong, plan)
    target_plan = PlanState(completed, (drop,) + rest)
    memory = render_memory(PlanState(completed, rest))

    drop_spot = before.objects[wrong].px
    path = [now.gripper_px, drop_spot] + trace_path(fake, rest, ws)[1:]
    return SupervisionSample(frame, fake, memory, target_plan, resample_trace(path, k_wp), recovery=True)


def curate(
    log: EpisodeLog,
    stride: int = DEFAULT_STRIDE,
    k_wp: int = DEFAULT_K_WP,
    failure_samples: int = 0,
    rng: Optional[random.Random] = None,
) -> list[SupervisionSample]:
    spans = segment(log)
    samples = extract_samples(log, spans, stride, k_wp)
    if failure_samples:
        rng = rng or random.Random(log.config.seed)
        for _ in range(failure_samples):
            try:
                samples.append(synthesize_failure(log, spans, rng, k_wp))
            except (NoGraspPlacePair, NoAlternativeObject):
                break
    return samples


def write_samples(samples: Iterable[SupervisionSample], path: Union[str, Path]) -> int:
    n = 0
    with open(path, "w") as f:
        for s in samples:
            f.write(json.dumps(s.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
            n += 1
    return n


def read_samples(path: Union[str, Path]) -> list[SupervisionSample]:
    with open(path) as f:
        return [SupervisionSample.from_dict(json.loads(line)) for line in f if line.strip()]
