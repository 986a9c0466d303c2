"""Receding-horizon episode loop, the plan-once baseline, and episode logs."""

from __future__ import annotations

import enum
import gzip
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

from .core import Observation, PlanState, Primitive, render_memory
from .executor import Executor, ExecutorConfig, PurePursuitExecutor, make_executor
from .manager import Instruction, ManagerOutput, TaskManager, detect_progress, make_manager
from .sim import (
    HOLD,
    Action,
    FailureConfig,
    GripperCommand,
    Scene,
    SceneMismatch,
    observe,
    reset,
    step,
)

log = logging.getLogger(__name__)

LOG_SCHEMA = 1
DEFAULT_INTERVAL = 100
DEFAULT_BUDGET = 5000


class Mode(str, enum.Enum):
    CLOSED_LOOP = "closed"
    OPEN_LOOP = "open"


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    BUDGET_EXHAUSTED = "budget_exhausted"
    # open loop only: every planned primitive was attempted, the task is not done
    PLAN_EXHAUSTED = "plan_exhausted"


@dataclass(frozen=True)
class EpisodeConfig:
    plan: tuple[Primitive, ...]
    manager_interval: int = DEFAULT_INTERVAL
    step_budget: int = DEFAULT_BUDGET
    seed: int = 0
    failure: FailureConfig = FailureConfig()
    mode: Mode = Mode.CLOSED_LOOP

    def __post_init__(self) -> None:
        object.__setattr__(self, "plan", tuple(self.plan))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.manager_interval < 1:
            raise ValueError("manager_interval must be >= 1")
        if self.step_budget < 1:
            raise ValueError("step_budget must be >= 1")

    @classmethod
    def from_scene(cls, scene: Scene, **overrides) -> "EpisodeConfig":
        base = dict(plan=scene.plan, seed=scene.seed, failure=scene.failure)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return {
            "plan": [p.to_dict() for p in self.plan],
            "manager_interval": self.manager_interval,
            "step_budget": self.step_budget,
            "seed": self.seed,
            "failure": self.failure.to_dict(),
            "mode": self.mode.value,
        }

    @classmethod
    def from_dict(cls, d) -> "EpisodeConfig":
        return cls(
            plan=tuple(Primitive.from_dict(p) for p in d["plan"]),
            manager_interval=int(d["manager_interval"]),
            step_budget=int(d["step_budget"]),
            seed=int(d["seed"]),
            failure=FailureConfig.from_dict(d["failure"]),
            mode=Mode(d["mode"]),
        )


@dataclass(frozen=True)
class StepRecord:
    frame: int
    observation: Observation
    action: Action
    subtask: Optional[Primitive]


@dataclass(frozen=True)
class InvocationRecord:
    frame: int
    memory_in: str
    output: ManagerOutput


@dataclass(frozen=True)
class AttachmentEvent:
    """``frame`` is the first frame whose observation shows the change."""

    frame: int
    object: str
    kind: str  # grasp | release | slip


@dataclass
class EpisodeLog:
    config: EpisodeConfig
    scene: Scene
    steps: list[StepRecord] = field(default_factory=list)
    invocations: list[InvocationRecord] = field(default_factory=list)
    events: list[AttachmentEvent] = field(default_factory=list)
    outcome: Optional[Outcome] = None
    final_observation: Optional[Observation] = None

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def observations(self) -> list[Observation]:
        """Observations for frames 0..n_steps inclusive."""
        return [s.observation for s in self.steps] + [self.final_observation]

    def records(self) -> Iterator[dict]:
        yield {"type": "header", "schema": LOG_SCHEMA, "config": self.config.to_dict(), "scene": self.scene.to_dict()}
        inv = {r.frame: r for r in self.invocations}
        ev: dict[int, list[AttachmentEvent]] = {}
        for e in self.events:
            ev.setdefault(e.frame, []).append(e)

        def emit_frame(t: int) -> Iterator[dict]:
            for e in ev.get(t, ()):
                yield {"type": "event", "frame": e.frame, "object": e.object, "kind": e.kind}
            if t in inv:
                r = inv[t]
                yield {"type": "invocation", "frame": r.frame, "memory_in": r.memory_in, "output": r.output.to_dict()}

        for s in self.steps:
            yield from emit_frame(s.frame)
            yield {
                "type": "step",
                "frame": s.frame,
                "observation": s.observation.to_dict(),
                "action": s.action.to_dict(),
                "subtask": s.subtask.to_dict() if s.subtask is not None else None,
            }
        yield from emit_frame(self.n_steps)
        yield {
            "type": "summary",
            "outcome": self.outcome.value if self.outcome else None,
            "steps": self.n_steps,
            "invocations": len(self.invocations),
            "final_observation": self.final_observation.to_dict() if self.final_observation else None,
        }

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records())

    @classmethod
    def from_records(cls, records) -> "EpisodeLog":
        it = iter(records)
        head = next(it)
        if head.get("type") != "header" or head.get("schema") != LOG_SCHEMA:
            raise ValueError("not an episode log (missing or unsupported header)")
        lg = cls(EpisodeConfig.from_dict(head["config"]), Scene.from_dict(head["scene"]))
        for r in it:
            kind = r["type"]
            if kind == "step":
                sub = r["subtask"]
                lg.steps.append(StepRecord(
                    r["frame"], Observation.from_dict(r["observation"]), Action.from_dict(r["action"]),
                    Primitive.from_dict(sub) if sub is not None else None,
                ))
            elif kind == "invocation":
                lg.invocations.append(InvocationRecord(r["frame"], r["memory_in"], ManagerOutput.from_dict(r["output"])))
            elif kind == "event":
                lg.events.append(AttachmentEvent(r["frame"], r["object"], r["kind"]))
            elif kind == "summary":
                lg.outcome = Outcome(r["outcome"]) if r["outcome"] else None
                fo = r["final_observation"]
                lg.final_observation = Observation.from_dict(fo) if fo else None
            else:
                raise ValueError(f"unknown record type {kind!r}")
        return lg

    def write(self, path: Union[str, Path]) -> None:
        data = self.to_jsonl().encode()
        path = Path(path)
        if path.suffix == ".gz":
            # mtime pinned so gzipped logs stay byte-identical
            with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as f:
                f.write(data)
        else:
            path.write_bytes(data)

    @classmethod
    def read(cls, path: Union[str, Path]) -> "EpisodeLog":
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt") as f:
            return cls.from_records(json.loads(line) for line in f if line.strip())


def log_filename(seed: int) -> str:
    return f"episode_{seed}.jsonl"


def _check_scene(cfg: EpisodeConfig, scene: Scene) -> None:
    ids = set(scene.object_ids)
    for p in cfg.plan:
        if p.target not in ids:
            raise SceneMismatch(f"plan references unknown object {p.target!r}")
    scene.validate()


def _attempted(subtask: Primitive, action: Action) -> bool:
    return action.gripper_cmd is not GripperCommand.HOLD


def ground_truth_complete(obs: Observation, plan: Sequence[Primitive]) -> int:
    """Length of the plan prefix the observation shows as done."""
    state = detect_progress(obs, PlanState((), tuple(plan)))
    return state.split_index


def run_episode(
    cfg: EpisodeConfig,
    scene: Scene,
    manager: Optional[TaskManager] = None,
    executor: Optional[Executor] = None,
) -> EpisodeLog:
    """Roll out one episode.

    Closed loop: the manager runs at frames 0, N, 2N, ... and its split becomes
    the next memory. The executor follows ``remaining[0]`` along the trace;
    once it has issued that primitive's gripper command it holds still until
    the next manager call.

    Open loop: the manager runs once at frame 0 and the executor walks through
    that remaining list, moving on after each gripper command.
    """
    _check_scene(cfg, scene)
    manager = manager or make_manager("scripted")
    executor = executor or PurePursuitExecutor(ExecutorConfig(workspace=scene.workspace))
    instruction = Instruction(cfg.plan, scene.object_ids, scene.workspace)

    world = reset(scene, cfg.seed)
    obs = observe(world)
    memory = render_memory(PlanState((), cfg.plan))
    lg = EpisodeLog(cfg, scene)

    def advance(action: Action, subtask: Optional[Primitive]) -> None:
        nonlocal world, obs
        lg.steps.append(StepRecord(obs.frame, obs, action, subtask))
        world, obs = step(world, action, cfg.failure)
        if world.event is not None:
            lg.events.append(AttachmentEvent(world.frame, *world.event))

    def invoke() -> ManagerOutput:
        nonlocal memory
        out = manager.plan(instruction, obs, memory)
        lg.invocations.append(InvocationRecord(obs.frame, memory, out))
        memory = render_memory(out.plan)
        log.debug("frame %d: %s", obs.frame, memory)
        return out

    if cfg.mode is Mode.CLOSED_LOOP:
        t = 0
        subtask = trace = None
        attempted = False
        while True:
            if t % cfg.manager_interval == 0:
                out = invoke()
                if not out.plan.remaining:
                    lg.outcome = Outcome.SUCCESS
                    break
                subtask, trace, attempted = out.plan.remaining[0], out.trace, False
            if t >= cfg.step_budget:
                lg.outcome = Outcome.BUDGET_EXHAUSTED
                break
            if attempted:
                action = HOLD
            else:
                action = executor.act(obs, subtask, trace)
                attempted = _attempted(subtask, action)
            advance(action, subtask)
            t += 1
    else:
        out = invoke()
        queue = list(out.plan.remaining)
        trace = out.trace
        cursor = 0
        while cursor < len(queue) and obs.frame < cfg.step_budget:
            subtask = queue[cursor]
            action = executor.act(obs, subtask, trace)
            advance(action, subtask)
            if _attempted(subtask, action):
                cursor += 1
        if ground_truth_complete(obs, cfg.plan) == len(cfg.plan) and obs.held is None:
            lg.outcome = Outcome.SUCCESS
        elif cursor < len(queue):
            lg.outcome = Outcome.BUDGET_EXHAUSTED
        else:
            lg.outcome = Outcome.PLAN_EXHAUSTED

    lg.final_observation = obs
    return lg


@dataclass(frozen=True)
class EpisodeFailure:
    """Stands in for a log when an episode raised instead of finishing."""

    seed: int
    error: str


BatchResult = Union[EpisodeLog, EpisodeFailure]


def _run_job(job: tuple[EpisodeConfig, Scene, str, str]) -> BatchResult:
    cfg, scene, manager_name, executor_name = job
    try:
        manager = make_manager(manager_name)
        executor = make_executor(executor_name, cfg=ExecutorConfig(workspace=scene.workspace))
        return run_episode(cfg, scene, manager, executor)
    except Exception as e:  # collected, not fatal to the batch
        return EpisodeFailure(cfg.seed, f"{type(e).__name__}: {e}")


def run_batch(
    jobs: Sequence[tuple[EpisodeConfig, Scene]],
    parallelism: int = 1,
    manager: str = "scripted",
    executor: str = "pure_pursuit",
) -> list[BatchResult]:
    """Run episodes, in input order, optionally across worker processes."""
    seeds = [cfg.seed for cfg, _ in jobs]
    if len(set(seeds)) != len(seeds):
        raise ValueError("batch configs must have distinct seeds")
    payload = [(cfg, scene, manager, executor) for cfg, scene in jobs]
    if parallelism <= 1 or len(payload) <= 1:
        return [_run_job(j) for j in payload]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_job, payload, chunksize=max(1, len(payload) // (4 * parallelism))))


def seeded_jobs(scene: Scene, seeds: Sequence[int], **overrides) -> list[tuple[EpisodeConfig, Scene]]:
    return [(EpisodeConfig.from_scene(scene, seed=s, **overrides), replace(scene, seed=s)) for s in seeds]
