import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loho.core import (
    MalformedMemory,
    PlanState,
    Primitive,
    Trace,
    UnknownObject,
    Verb,
    Workspace,
    parse_memory,
    recovery_drop,
    render_memory,
)

CUP_GRASP = Primitive(0, Verb.GRASP, "cup")
CUP_PLACE = Primitive(1, Verb.PLACE, "cup", (0.4, 0.2))
OBJECTS = ["cup", "sponge", "block", "red_bowl", "lid-2"]


def test_render_empty_prefix():
    assert render_memory(PlanState((), (CUP_GRASP,))) == "done: - | remaining: grasp cup"


def test_render_with_destination():
    text = render_memory(PlanState((CUP_GRASP,), (CUP_PLACE,)))
    assert text == "done: grasp cup | remaining: place cup -> (0.4,0.2)"


def test_render_all_done():
    assert render_memory(PlanState((CUP_GRASP, CUP_PLACE), ())).endswith("| remaining: -")


def test_parse_example():
    assert parse_memory("done: - | remaining: grasp cup", ["cup"]) == PlanState((), (CUP_GRASP,))


@pytest.mark.parametrize("text", [
    "done - remaining",
    "done: | remaining: grasp cup",
    "done: - | remaining: grab cup",
    "done: - | remaining: place cup",
    "done: - | remaining: grasp cup -> (0.1,0.2)",
    "done: - | remaining: grasp cup;grasp cup",
    "remaining: grasp cup",
    "",
])
def test_parse_malformed(text):
    with pytest.raises(MalformedMemory):
        parse_memory(text, ["cup"])


def test_parse_unknown_object():
    with pytest.raises(UnknownObject):
        parse_memory("done: - | remaining: grasp mug", ["cup"])


def test_parse_against_plan_takes_plan_ids():
    plan = (Primitive(10, Verb.GRASP, "cup"), Primitive(11, Verb.PLACE, "cup", (0.4, 0.2)))
    got = parse_memory("done: grasp cup | remaining: place cup -> (0.4,0.2)", ["cup"], plan)
    assert got == PlanState(plan[:1], plan[1:])


def test_parse_against_plan_rejects_deviation():
    plan = (CUP_GRASP, CUP_PLACE)
    with pytest.raises(MalformedMemory):
        parse_memory("done: - | remaining: grasp cup", ["cup"], plan)
    with pytest.raises(MalformedMemory):
        parse_memory("done: - | remaining: place cup -> (0.4,0.2); grasp cup", ["cup"], plan)


def test_parse_against_plan_accepts_recovery_drop():
    plan = (CUP_GRASP, CUP_PLACE)
    got = parse_memory("done: - | remaining: drop sponge; grasp cup; place cup -> (0.4,0.2)", ["cup", "sponge"], plan)
    assert got.remaining[0] == recovery_drop("sponge", plan)
    assert got.is_split_of(plan)


def test_primitive_destination_iff_place_or_push():
    with pytest.raises(ValueError):
        Primitive(0, Verb.PLACE, "cup")
    with pytest.raises(ValueError):
        Primitive(0, Verb.GRASP, "cup", (0.1, 0.1))
    Primitive(0, Verb.PUSH, "cup", (0.1, 0.1))


def test_primitive_destination_quantized():
    assert Primitive(0, Verb.PLACE, "cup", (0.12345, 0.6789)).destination == (0.123, 0.679)


def test_planstate_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        PlanState((CUP_GRASP,), (CUP_GRASP,))


def test_is_split_of():
    plan = (CUP_GRASP, CUP_PLACE)
    assert PlanState((CUP_GRASP,), (CUP_PLACE,)).is_split_of(plan)
    assert not PlanState((), (CUP_PLACE, CUP_GRASP)).is_split_of(plan)


@pytest.mark.parametrize("wps", [[(0, 0)], [(0, 0), (1001, 5)], [(-1, 0), (3, 3)], [(0.5, 0), (1, 1)]])
def test_trace_rejects_invalid(wps):
    with pytest.raises((ValueError, TypeError)):
        Trace(tuple(wps))


def test_workspace_projection_endpoints():
    ws = Workspace((-0.5, 0.0), (0.5, 2.0))
    assert ws.to_px((-0.5, 0.0)) == (0, 0)
    assert ws.to_px((0.5, 2.0)) == (1000, 1000)
    assert ws.to_px((0.0, 1.0)) == (500, 500)


# -- round-trip property ------------------------------------------------------

coords = st.floats(min_value=-5, max_value=5, allow_nan=False).map(lambda v: round(v, 3))


@st.composite
def plan_states(draw):
    n = draw(st.integers(0, 8))
    prims = []
    for i in range(n):
        verb = draw(st.sampled_from(list(Verb)))
        target = draw(st.sampled_from(OBJECTS))
        dest = (draw(coords), draw(coords)) if verb.needs_destination else None
        prims.append(Primitive(i, verb, target, dest))
    k = draw(st.integers(0, n))
    return PlanState(tuple(prims[:k]), tuple(prims[k:]))


@settings(max_examples=500)
@given(plan_states())
def test_memory_round_trip(state):
    assert parse_memory(render_memory(state), OBJECTS) == state


@settings(max_examples=200)
@given(plan_states(), st.sampled_from(OBJECTS))
def test_memory_round_trip_with_plan_and_recovery(state, held):
    plan = [p for p in state.primitives if p.verb is not Verb.DROP]
    plan = [Primitive(i, p.verb, p.target, p.destination) for i, p in enumerate(plan)]
    k = min(state.split_index, len(plan))
    with_drop = PlanState(tuple(plan[:k]), (recovery_drop(held, plan),) + tuple(plan[k:]))
    for s in (PlanState(tuple(plan[:k]), tuple(plan[k:])), with_drop):
        assert parse_memory(render_memory(s), OBJECTS, plan) == s
