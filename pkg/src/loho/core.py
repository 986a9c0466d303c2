"""Domain types and the textual plan memory.

Pixel coordinates everywhere are integers on a normalized 1000x1000 image
grid. Workspace coordinates are meters.
"""

from __future__ import annotations

import enum
import operator
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .geometry import round_half_up

PX_MAX = 1000

PixelPoint = tuple[int, int]
WorldPoint = tuple[float, float]


class LohoError(Exception):
    """Base class for errors raised by this package."""


class MalformedMemory(LohoError, ValueError):
    pass


class UnknownObject(LohoError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class EmptyPlan(LohoError, ValueError):
    pass


class Verb(str, enum.Enum):
    GRASP = "grasp"
    PLACE = "place"
    PUSH = "push"
    OPEN = "open"
    CLOSE = "close"
    DROP = "drop"

    @property
    def needs_destination(self) -> bool:
        return self in (Verb.PLACE, Verb.PUSH)


_OBJECT_ID = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_-]*")


def check_object_id(obj_id: str) -> str:
    if not isinstance(obj_id, str) or not _OBJECT_ID.fullmatch(obj_id):
        raise ValueError(f"invalid object id {obj_id!r}")
    return obj_id


def quantize(v: float) -> float:
    # 3 decimals is what the memory text can carry; +0.0 folds -0.0 away
    return round(float(v), 3) + 0.0


@dataclass(frozen=True)
class Primitive:
    id: int
    verb: Verb
    target: str
    destination: Optional[WorldPoint] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "verb", Verb(self.verb))
        check_object_id(self.target)
        if self.verb.needs_destination != (self.destination is not None):
            raise ValueError(f"{self.verb.value} {'requires' if self.verb.needs_destination else 'forbids'} a destination")
        if self.destination is not None:
            x, y = self.destination
            object.__setattr__(self, "destination", (quantize(x), quantize(y)))

    def to_dict(self) -> dict:
        d = {"id": self.id, "verb": self.verb.value, "target": self.target}
        if self.destination is not None:
            d["destination"] = list(self.destination)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Primitive":
        dest = d.get("destination")
        return cls(int(d["id"]), Verb(d["verb"]), d["target"], tuple(dest) if dest is not None else None)


def recovery_drop(held: str, plan: Sequence[Primitive]) -> Primitive:
    """The ``Drop <held>`` primitive used to undo a wrong-object grasp.

    Its id is one past the largest plan id so it never collides with the plan.
    """
    return Primitive(max((p.id for p in plan), default=-1) + 1, Verb.DROP, held)


@dataclass(frozen=True)
class PlanState:
    completed: tuple[Primitive, ...] = ()
    remaining: tuple[Primitive, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "completed", tuple(self.completed))
        object.__setattr__(self, "remaining", tuple(self.remaining))
        ids = [p.id for p in self.completed + self.remaining]
        if len(set(ids)) != len(ids):
            raise ValueError(f"primitive ids are not unique: {ids}")

    @property
    def split_index(self) -> int:
        return len(self.completed)

    @property
    def primitives(self) -> tuple[Primitive, ...]:
        return self.completed + self.remaining

    def is_split_of(self, plan: Sequence[Primitive]) -> bool:
        """True if completed ++ remaining equals ``plan`` once recovery drops are removed."""
        plan_ids = {p.id for p in plan}
        kept = [p for p in self.primitives if not (p.verb is Verb.DROP and p.id not in plan_ids)]
        return kept == list(plan)

    def to_dict(self) -> dict:
        return {
            "completed": [p.to_dict() for p in self.completed],
            "remaining": [p.to_dict() for p in self.remaining],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlanState":
        return cls(
            tuple(Primitive.from_dict(p) for p in d["completed"]),
            tuple(Primitive.from_dict(p) for p in d["remaining"]),
        )


def _as_px(v) -> int:
    if isinstance(v, bool):
        raise TypeError("pixel coordinate must be an integer, got bool")
    i = operator.index(v)
    if not 0 <= i <= PX_MAX:
        raise ValueError(f"pixel coordinate {i} outside [0, {PX_MAX}]")
    return i


def as_pixel(p: Sequence) -> PixelPoint:
    if len(p) != 2:
        raise ValueError(f"expected a 2D point, got {p!r}")
    return (_as_px(p[0]), _as_px(p[1]))


@dataclass(frozen=True)
class Trace:
    waypoints: tuple[PixelPoint, ...]

    def __post_init__(self) -> None:
        wps = tuple(as_pixel(p) for p in self.waypoints)
        if len(wps) < 2:
            raise ValueError("a trace needs at least 2 waypoints")
        object.__setattr__(self, "waypoints", wps)

    def __len__(self) -> int:
        return len(self.waypoints)

    def to_list(self) -> list[list[int]]:
        return [list(p) for p in self.waypoints]


@dataclass(frozen=True)
class ObjectView:
    px: PixelPoint
    graspable: bool = True
    at_destination: bool = False

    def to_dict(self) -> dict:
        return {"px": list(self.px), "graspable": self.graspable, "at_destination": self.at_destination}


@dataclass(frozen=True)
class Observation:
    frame: int
    gripper_px: PixelPoint
    objects: Mapping[str, ObjectView] = field(default_factory=dict)
    held: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gripper_px", as_pixel(self.gripper_px))
        for view in self.objects.values():
            as_pixel(view.px)
        if self.held is not None and self.held not in self.objects:
            raise ValueError(f"held object {self.held!r} not in observation")

    def to_dict(self) -> dict:
        return {
            "frame": self.frame,
            "gripper_px": list(self.gripper_px),
            "objects": {k: v.to_dict() for k, v in self.objects.items()},
            "held": self.held,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Observation":
        objects = {
            k: ObjectView(tuple(v["px"]), bool(v["graspable"]), bool(v["at_destination"]))
            for k, v in d["objects"].items()
        }
        return cls(int(d["frame"]), tuple(d["gripper_px"]), objects, d.get("held"))


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned workspace bounds in meters and the pixel projection."""

    lo: WorldPoint = (0.0, 0.0)
    hi: WorldPoint = (1.0, 1.0)

    def __post_init__(self) -> None:
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise ValueError(f"degenerate workspace {self.lo} .. {self.hi}")

    @property
    def size(self) -> WorldPoint:
        return (self.hi[0] - self.lo[0], self.hi[1] - self.lo[1])

    def contains(self, p: Sequence[float]) -> bool:
        return self.lo[0] <= p[0] <= self.hi[0] and self.lo[1] <= p[1] <= self.hi[1]

    def clamp(self, p: Sequence[float]) -> WorldPoint:
        return (
            min(max(p[0], self.lo[0]), self.hi[0]),
            min(max(p[1], self.lo[1]), self.hi[1]),
        )

    def to_px(self, p: Sequence[float]) -> PixelPoint:
        w, h = self.size
        x = round_half_up((p[0] - self.lo[0]) / w * PX_MAX)
        y = round_half_up((p[1] - self.lo[1]) / h * PX_MAX)
        return (min(max(x, 0), PX_MAX), min(max(y, 0), PX_MAX))

    def to_world(self, px: Sequence[float]) -> WorldPoint:
        w, h = self.size
        return (self.lo[0] + px[0] / PX_MAX * w, self.lo[1] + px[1] / PX_MAX * h)

    def length_to_px(self, meters: float) -> float:
        """Conservative (smaller-axis) projection of a length to pixels."""
        return meters * PX_MAX / max(self.size)

    def to_dict(self) -> dict:
        return {"min": list(self.lo), "max": list(self.hi)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Workspace":
        return cls(tuple(map(float, d["min"])), tuple(map(float, d["max"])))


# -- language memory ---------------------------------------------------------

def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def render_entry(p: Primitive) -> str:
    s = f"{p.verb.value} {p.target}"
    if p.destination is not None:
        s += f" -> ({_fmt(p.destination[0])},{_fmt(p.destination[1])})"
    return s


def _render_side(prims: Sequence[Primitive]) -> str:
    return "; ".join(render_entry(p) for p in prims) if prims else "-"


def render_memory(plan: PlanState) -> str:
    """Serialize a plan split as ``done: ... | remaining: ...``."""
    return f"done: {_render_side(plan.completed)} | remaining: {_render_side(plan.remaining)}"


_LINE = re.compile(r"done: (?P<done>.+?) \| remaining: (?P<rem>.+)")
_NUM = r"-?\d+(?:\.\d+)?"
_ENTRY = re.compile(
    rf"(?P<verb>[a-z]+) (?P<target>{_OBJECT_ID.pattern})(?: -> \((?P<x>{_NUM}),(?P<y>{_NUM})\))?"
)


def _parse_side(text: str) -> list[tuple[Verb, str, Optional[WorldPoint]]]:
    if text == "-":
        return []
    out = []
    for chunk in text.split("; "):
        m = _ENTRY.fullmatch(chunk)
        if m is None:
            raise MalformedMemory(f"bad memory entry {chunk!r}")
        try:
            verb = Verb(m["verb"])
        except ValueError:
            raise MalformedMemory(f"unknown verb {m['verb']!r}") from None
        dest = (float(m["x"]), float(m["y"])) if m["x"] is not None else None
        if verb.needs_destination != (dest is not None):
            raise MalformedMemory(f"destination mismatch for {chunk!r}")
        out.append((verb, m["target"], dest))
    return out


def parse_memory(
    text: str,
    scene_objects: Iterable[str],
    plan: Optional[Sequence[Primitive]] = None,
) -> PlanState:
    """Inverse of :func:`render_memory`.

    Without ``plan``, ids are assigned by position. With ``plan``, entries are
    matched to the plan in order and take its ids; the only entries allowed
    outside the plan are recovery drops, which get :func:`recovery_drop` ids.
    """
    m = _LINE.fullmatch(text.strip())
    if m is None:
        raise MalformedMemory(f"memory does not match 'done: ... | remaining: ...': {text!r}")
    done, rem = _parse_side(m["done"]), _parse_side(m["rem"])
    known = set(scene_objects)
    for _, target, _ in done + rem:
        if target not in known:
            raise UnknownObject(f"object {target!r} not in scene")

    entries = done + rem
    if plan is None:
        prims = [Primitive(i, v, t, d) for i, (v, t, d) in enumerate(entries)]
    else:
        prims = []
        ptr = 0
        extra_id = max((p.id for p in plan), default=-1) + 1
        for v, t, d in entries:
            if ptr < len(plan):
                exp = plan[ptr]
                if exp.verb is v and exp.target == t and exp.destination == (None if d is None else (quantize(d[0]), quantize(d[1]))):
                    prims.append(exp)
                    ptr += 1
                    continue
            if v is not Verb.DROP:
                raise MalformedMemory(f"entry '{v.value} {t}' does not follow the plan")
            prims.append(Primitive(extra_id, v, t))
            extra_id += 1
        if ptr != len(plan):
            raise MalformedMemory("memory does not cover the full plan")
    try:
        return PlanState(tuple(prims[: len(done)]), tuple(prims[len(done):]))
    except ValueError as e:
        raise MalformedMemory(str(e)) from None
