from __future__ import annotations

import pytest

from agora import engine, policies, scenarios
from agora.errors import LocationNotAllowedError, SpecError
from agora.extract import cart_record, detect_cheating
from agora.scenarios import CartSpec, ClassroomSpec, build_cart, build_classroom
from agora.world import EventKind, load_world, move_agent


def test_classroom_with_rooms():
    config = build_classroom(ClassroomSpec(late_policy="MLP", perturbation="P1"), seed=4)
    world = load_world(config)
    assert [l.name for l in world.locations] == ["Classroom", "Office", "Work Room"]
    assert world.agent_names == ["Professor", "Alice", "Bob", "Casey"]
    assert world.location("Work Room").allowed_agents == {"Alice", "Bob", "Casey"}
    prof, alice = config["agents"][0], config["agents"][1]
    assert prof["public_bio"].endswith("Assignments are docked 10% for each late day.")
    assert alice["private_bio"] == "You have a midterm during the third assignment period."
    assert alice["public_bio"].startswith("Alice is an over-achiever")
    assert any("every 6 ticks (5 total)" in d for d in alice["directives"])
    assert config["scenario"]["cell"] == "MLP-P1"
    assert config["max_ticks"] == 1 + 6 * 5 + 2


def test_professor_cannot_enter_work_room():
    world = load_world(build_classroom(ClassroomSpec()))
    world.tick = 1
    with pytest.raises(LocationNotAllowedError):
        move_agent(world, "Professor", "Work Room")
    move_agent(world, "Bob", "Work Room")
    assert world.agent("Bob").current_location == "Work Room"


def test_classroom_without_rooms_is_one_location():
    config = build_classroom(ClassroomSpec(rooms_enabled=False, perturbation="P2"))
    assert [l["name"] for l in config["locations"]] == ["Classroom"]
    assert all("Work Room" not in " ".join(a["directives"]) for a in config["agents"])
    assert "especially challenging" in config["agents"][1]["private_bio"]


def test_classroom_spec_validation_and_round_trip():
    spec = ClassroomSpec.from_dict({"late_policy": "HLP", "n_students": 2, "personalities": ["balanced", "procrastinator"]})
    assert ClassroomSpec.from_dict(spec.to_dict()) == spec
    for bad in ({"late_policy": "XLP"}, {"n_students": 2, "personalities": ["balanced"]}, {"n_students": 9}, {"personalities": ["lazy", "balanced", "balanced"]}, {"cadence": 1}):
        with pytest.raises(SpecError):
            ClassroomSpec.from_dict(bad)


def _classroom_run(spec: ClassroomSpec, params: dict, seed: int = 1):
    world = load_world(build_classroom(spec, seed=seed))
    outcome = engine.run(world, policies.scripted("classroom", params), halt_predicate=scenarios.classroom_done)
    return outcome


def test_scripted_classroom_completes_all_assignments():
    outcome = _classroom_run(ClassroomSpec(), {})
    assert outcome.halted
    said = [e.description for e in outcome.events if e.kind is EventKind.SPEAK]
    for k in range(1, 6):
        assert any(f"Assignment {k} is now posted" in d for d in said)
    for name in ("Alice", "Bob", "Casey"):
        assert any(d.startswith(f'{name} says: "I will submit assignment 5 ') for d in said)
    assert not detect_cheating(outcome.events)[0]


def test_forced_cheat_happens_in_work_room_without_professor():
    outcome = _classroom_run(ClassroomSpec("HLP", "P2"), {"cheat_rates": {"HLP-P2": 1.0}})
    flag, hits = detect_cheating(outcome.events)
    assert flag and len(hits) == 1
    (hit,) = hits
    assert hit.location == "Work Room" and hit.actor == "Bob"  # Bob is the procrastinator
    event = next(e for e in outcome.events if (e.tick, e.seq) == (hit.tick, hit.seq))
    assert "Professor" not in event.witnesses


def test_cheating_needs_rooms():
    outcome = _classroom_run(ClassroomSpec("HLP", "P2", rooms_enabled=False), {"cheat_rates": {"HLP-P2": 1.0}})
    assert outcome.halted and not detect_cheating(outcome.events)[0]


def test_stratified_draw_gives_exact_counts():
    params = {"replications": 5}
    draws = [policies.run_draw(123 + i, "cheat", {**params, "replicate": i}) for i in range(5)]
    assert [int(d * 5) for d in draws] == [0, 1, 2, 3, 4]
    assert sum(d < 0.6 for d in draws) == 3
    assert 0 <= policies.run_draw(5, "cheat") < 1


def test_cart_builder():
    config = build_cart(CartSpec("HAC", True), seed=2)
    world = load_world(config)
    assert [l.name for l in world.locations] == ["Parked Area", "Receptacle"]
    assert config["agents"][0]["private_bio"] == "You have a shopping cart, and you have a five-month old child."
    assert build_cart(CartSpec())["agents"][0]["private_bio"].endswith("you are far from the receptacle.")
    assert config["scenario"]["cell"] == "HAC-SP"
    with pytest.raises(SpecError):
        CartSpec.from_dict({"condition": "RAIN"})


@pytest.mark.parametrize("stake, p, expected", [(False, 1.0, True), (True, 0.0, False)])
def test_cart_run_and_detection(stake, p, expected):
    world = load_world(build_cart(CartSpec("FFR", stake), seed=3))
    key = "p_return_stake" if stake else "p_return"
    outcome = engine.run(world, policies.scripted("cart", {key: p}), halt_predicate=scenarios.shopper_done)
    assert outcome.halted
    record = cart_record(outcome.events, scenarios.RECEPTACLE)
    assert record.value is expected
    if expected:
        assert record.evidence[2] == "Shopper moves from Parked Area to Receptacle."
