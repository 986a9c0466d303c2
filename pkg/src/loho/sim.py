"""Deterministic 2D tabletop simulator with grasp-slip injection.

The gripper is a point that moves by a clipped velocity each step. Objects
are points. A grasp attaches the nearest graspable object inside
``grasp_radius`` and snaps it onto the gripper; a slip instead displaces that
object uniformly inside a disc of ``drop_radius``.

Random draws happen only on in-range grasp attempts, always three per
attempt, so attempt number i sees the same outcome whatever happened before.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .core import (
    LohoError,
    ObjectView,
    Observation,
    Primitive,
    Verb,
    Workspace,
    WorldPoint,
    check_object_id,
)

GRASP_RADIUS = 0.02
PLACE_TOLERANCE = 0.03
V_MAX = 0.05
SCENE_SCHEMA = 1

# verbs the simulator gives physical meaning to
SUPPORTED_VERBS = frozenset({Verb.GRASP, Verb.PLACE})


class SceneMismatch(LohoError, ValueError):
    pass


class GripperCommand(str, enum.Enum):
    HOLD = "hold"
    CLOSE_GRASP = "close_grasp"
    OPEN_RELEASE = "open_release"


@dataclass(frozen=True)
class Action:
    velocity: WorldPoint = (0.0, 0.0)
    gripper_cmd: GripperCommand = GripperCommand.HOLD

    def clipped(self, v_max: float) -> "Action":
        vx, vy = self.velocity
        vx = min(max(vx, -v_max), v_max)
        vy = min(max(vy, -v_max), v_max)
        return Action((vx, vy), self.gripper_cmd)

    def to_dict(self) -> dict:
        return {"velocity": list(self.velocity), "gripper_cmd": self.gripper_cmd.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Action":
        return cls(tuple(d["velocity"]), GripperCommand(d["gripper_cmd"]))


HOLD = Action()


@dataclass(frozen=True)
class FailureConfig:
    p_slip: float = 0.0
    drop_radius: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_slip <= 1.0:
            raise ValueError(f"p_slip must be in [0, 1], got {self.p_slip}")
        if self.drop_radius < 0.0:
            raise ValueError(f"drop_radius must be >= 0, got {self.drop_radius}")

    def to_dict(self) -> dict:
        return {"p_slip": self.p_slip, "drop_radius": self.drop_radius}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FailureConfig":
        return cls(float(d.get("p_slip", 0.0)), float(d.get("drop_radius", 0.05)))


@dataclass(frozen=True)
class SimParams:
    grasp_radius: float = GRASP_RADIUS
    place_tolerance: float = PLACE_TOLERANCE
    v_max: float = V_MAX


@dataclass(frozen=True)
class SceneObject:
    id: str
    position: WorldPoint
    graspable: bool = True


@dataclass(frozen=True)
class Scene:
    """Everything a scene file describes: layout, plan, seed and failure model."""

    objects: tuple[SceneObject, ...]
    plan: tuple[Primitive, ...]
    workspace: Workspace = Workspace()
    gripper: WorldPoint = (0.5, 0.5)
    seed: int = 0
    failure: FailureConfig = FailureConfig()

    @property
    def object_ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects)

    def destinations(self) -> dict[str, WorldPoint]:
        """Final plan destination per object (later placements win)."""
        out: dict[str, WorldPoint] = {}
        for p in self.plan:
            if p.destination is not None:
                out[p.target] = p.destination
        return out

    def validate(self) -> None:
        ids = self.object_ids
        if len(set(ids)) != len(ids):
            raise SceneMismatch(f"duplicate object ids in {ids}")
        for o in self.objects:
            check_object_id(o.id)
            if not self.workspace.contains(o.position):
                raise SceneMismatch(f"object {o.id!r} outside workspace")
        if not self.workspace.contains(self.gripper):
            raise SceneMismatch("gripper start outside workspace")
        graspable = {o.id for o in self.objects if o.graspable}
        pids = [p.id for p in self.plan]
        if len(set(pids)) != len(pids):
            raise SceneMismatch(f"duplicate primitive ids in plan: {pids}")
        for p in self.plan:
            if p.target not in ids:
                raise SceneMismatch(f"plan references unknown object {p.target!r}")
            if p.verb not in SUPPORTED_VERBS:
                raise SceneMismatch(f"verb {p.verb.value!r} is not supported in scene plans")
            if p.target not in graspable:
                raise SceneMismatch(f"{p.verb.value} targets non-graspable object {p.target!r}")
            if p.destination is not None and not self.workspace.contains(p.destination):
                raise SceneMismatch(f"destination of {p.target!r} outside workspace")

    def to_dict(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "workspace": self.workspace.to_dict(),
            "gripper": list(self.gripper),
            "objects": [
                {"id": o.id, "position": list(o.position), "graspable": o.graspable} for o in self.objects
            ],
            "plan": [p.to_dict() for p in self.plan],
            "seed": self.seed,
            "failure": self.failure.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scene":
        if d.get("schema") != SCENE_SCHEMA:
            raise SceneMismatch(f"unsupported scene schema {d.get('schema')!r}")
        objects = tuple(
            SceneObject(o["id"], tuple(map(float, o["position"])), bool(o.get("graspable", True)))
            for o in d["objects"]
        )
        plan = []
        for i, p in enumerate(d["plan"]):
            dest = p.get("destination")
            plan.append(Primitive(int(p.get("id", i)), Verb(p["verb"]), p["target"],
                                  tuple(map(float, dest)) if dest is not None else None))
        scene = cls(
            objects=objects,
            plan=tuple(plan),
            workspace=Workspace.from_dict(d["workspace"]) if "workspace" in d else Workspace(),
            gripper=tuple(map(float, d.get("gripper", (0.5, 0.5)))),
            seed=int(d.get("seed", 0)),
            failure=FailureConfig.from_dict(d.get("failure", {})),
        )
        scene.validate()
        return scene


def load_scene(path: str | Path) -> Scene:
    with open(path) as f:
        return Scene.from_dict(json.load(f))


def save_scene(scene: Scene, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(scene.to_dict(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True)
class ObjectState:
    pos: WorldPoint
    graspable: bool = True


@dataclass(frozen=True)
class WorldState:
    """Simulator state.

    ``rng`` is a stream: stepping a state advances the generator it shares
    with its successor, so a state should be stepped at most once.
    """

    frame: int
    gripper: WorldPoint
    gripper_closed: bool
    objects: Mapping[str, ObjectState]
    attachment: Optional[str]
    rng: random.Random
    workspace: Workspace = Workspace()
    destinations: Mapping[str, WorldPoint] = field(default_factory=dict)
    params: SimParams = SimParams()
    # (object, "grasp" | "release" | "slip") produced by the step into this state
    event: Optional[tuple[str, str]] = None

    def __post_init__(self) -> None:
        if self.attachment is not None:
            obj = self.objects.get(self.attachment)
            if obj is None or not obj.graspable:
                raise ValueError(f"attachment {self.attachment!r} is not a graspable object")


def reset(scene: Scene, seed: Optional[int] = None, params: SimParams = SimParams()) -> WorldState:
    scene.validate()
    return WorldState(
        frame=0,
        gripper=scene.gripper,
        gripper_closed=False,
        objects={o.id: ObjectState(o.position, o.graspable) for o in scene.objects},
        attachment=None,
        rng=random.Random(scene.seed if seed is None else seed),
        workspace=scene.workspace,
        destinations=scene.destinations(),
        params=params,
    )


def _nearest_graspable(world: WorldState, pos: WorldPoint) -> Optional[str]:
    best, best_d = None, world.params.grasp_radius
    for oid in sorted(world.objects):
        obj = world.objects[oid]
        if not obj.graspable:
            continue
        d = math.hypot(obj.pos[0] - pos[0], obj.pos[1] - pos[1])
        if d <= best_d:
            best, best_d = oid, d
    return best


def step(world: WorldState, action: Action, failure: FailureConfig = FailureConfig()) -> tuple[WorldState, Observation]:
    """Advance one frame and return the new state with its observation."""
    ws = world.workspace
    action = action.clipped(world.params.v_max)
    gx, gy = world.gripper
    new_gripper = ws.clamp((gx + action.velocity[0], gy + action.velocity[1]))

    objects = dict(world.objects)
    attachment = world.attachment
    closed = world.gripper_closed
    event = None

    if attachment is not None:
        objects[attachment] = replace(objects[attachment], pos=new_gripper)

    cmd = action.gripper_cmd
    if cmd is GripperCommand.CLOSE_GRASP:
        closed = True
        if attachment is None:
            oid = _nearest_graspable(world, new_gripper)
            if oid is not None:
                u, r, theta = world.rng.random(), world.rng.random(), world.rng.random()
                if u < failure.p_slip:
                    rad = failure.drop_radius * math.sqrt(r)
                    ang = 2.0 * math.pi * theta
                    ox, oy = objects[oid].pos
                    objects[oid] = replace(objects[oid], pos=ws.clamp((ox + rad * math.cos(ang), oy + rad * math.sin(ang))))
                    closed = False
                    event = (oid, "slip")
                else:
                    attachment = oid
                    objects[oid] = replace(objects[oid], pos=new_gripper)
                    event = (oid, "grasp")
    elif cmd is GripperCommand.OPEN_RELEASE:
        closed = False
        if attachment is not None:
            event = (attachment, "release")
            attachment = None

    new = WorldState(
        frame=world.frame + 1,
        gripper=new_gripper,
        gripper_closed=closed,
        objects=objects,
        attachment=attachment,
        rng=world.rng,
        workspace=ws,
        destinations=world.destinations,
        params=world.params,
        event=event,
    )
    return new, observe(new)


def observe(world: WorldState) -> Observation:
    ws = world.workspace
    tol = world.params.place_tolerance
    views = {}
    for oid, obj in world.objects.items():
        dest = world.destinations.get(oid)
        at_dest = dest is not None and math.hypot(obj.pos[0] - dest[0], obj.pos[1] - dest[1]) <= tol
        views[oid] = ObjectView(ws.to_px(obj.pos), obj.graspable, at_dest)
    return Observation(world.frame, ws.to_px(world.gripper), views, world.attachment)


def random_scene(
    seed: int,
    n_objects: int = 3,
    failure: FailureConfig = FailureConfig(),
    min_separation: float = 0.16,
    margin: float = 0.08,
) -> Scene:
    """Random pick-and-place scene in the unit workspace.

    Object starts, destinations and the gripper start are pairwise at least
    ``min_separation`` apart so slips and carries never reach a second object.
    """
    rng = random.Random(seed)
    pts: list[WorldPoint] = []
    while len(pts) < 2 * n_objects + 1:
        p = (round(rng.uniform(margin, 1 - margin), 3), round(rng.uniform(margin, 1 - margin), 3))
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) >= min_separation for q in pts):
            pts.append(p)
    names = [f"obj{i}" for i in range(n_objects)]
    objects = tuple(SceneObject(n, pts[i]) for i, n in enumerate(names))
    plan: list[Primitive] = []
    for i, n in enumerate(names):
        plan.append(Primitive(len(plan), Verb.GRASP, n))
        plan.append(Primitive(len(plan), Verb.PLACE, n, pts[n_objects + i]))
    return Scene(objects, tuple(plan), Workspace(), pts[-1], seed, failure)
