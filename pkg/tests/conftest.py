from __future__ import annotations

from pathlib import Path

import pytest

from loho.core import ObjectView, Observation
from loho.sim import load_scene

ROOT = Path(__file__).resolve().parent.parent
THREE_SCENE = ROOT / "scenes" / "three_pick_place.json"

ACCEPTANCE_LINES: list[str] = []


def make_obs(gripper=(500, 500), objects=None, held=None, frame=0) -> Observation:
    """objects: id -> (px, at_destination) or id -> ObjectView."""
    views = {}
    for k, v in (objects or {}).items():
        views[k] = v if isinstance(v, ObjectView) else ObjectView(tuple(v[0]), True, bool(v[1]))
    return Observation(frame, gripper, views, held)


@pytest.fixture
def three_scene():
    return load_scene(THREE_SCENE)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
