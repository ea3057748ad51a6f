from __future__ import annotations

import pytest

from agora import engine
from agora.backends import ScriptedBackend
from agora.errors import BackendError
from agora.world import EventKind, load_world


def scripted(replies: dict[str, list[str]]) -> ScriptedBackend:
    """Per-agent reply queues indexed by tick (1-based); 'WAIT' once exhausted."""

    def policy(obs, rng, params):
        queue = replies.get(obs.owner, [])
        return queue[obs.tick - 1] if obs.tick - 1 < len(queue) else "WAIT"

    return ScriptedBackend(policy)


def test_tick_increments_before_agents_act(config):
    world = load_world(config)
    engine.advance_tick(world, scripted({}))
    assert world.tick == 1
    assert [(e.tick, e.seq, e.actor) for e in world.event_log] == [(1, 0, "Ann"), (1, 1, "Ben"), (1, 2, "Cal")]
    assert world.event_log[0].description == "Ann waits in the Hall."


def test_say_and_move(config):
    world = load_world(config)
    backend = scripted({"Ann": ["SAY: hello", "MOVE: Den"], "Ben": ["WAIT", "SAY: where did Ann go?"]})
    engine.run(world, backend, max_ticks=2)
    descs = [e.description for e in world.event_log]
    assert 'Ann says: "hello"' in descs
    assert "Ann moves from Hall to Den." in descs
    ben_q = next(e for e in world.event_log if e.actor == "Ben" and e.kind is EventKind.SPEAK)
    assert "Ann" not in ben_q.witnesses


def test_new_plan_acts_on_a_later_tick(config):
    world = load_world(config)
    backend = scripted({"Ann": ["PLAN: nap @ Den UNTIL rested", "CONTINUE", "CONTINUE"]})
    engine.run(world, backend, max_ticks=3)
    ann = [e for e in world.event_log if e.actor == "Ann"]
    assert ann[0].description == "Ann pauses to think."
    assert ann[1].description == "Ann moves from Hall to Den."
    assert ann[2].description == "Ann waits in the Den."
    assert world.agent_scratch["Ann"].plan.location == "Den"


def test_observation_builds_memories(config):
    world = load_world(config)
    engine.run(world, scripted({"Ben": ["SAY: hi"]}), max_ticks=2)
    ann_mems = [m.description for m in world.agent_scratch["Ann"].memories]
    # Ann acts first, so Ben's tick-1 speech is observed on tick 2
    assert 'Ben says: "hi"' in ann_mems
    assert all(1 <= m.importance <= 10 for m in world.agent_scratch["Ann"].memories)


def test_run_halts_on_predicate_or_budget(config):
    world = load_world(config)
    outcome = engine.run(world, scripted({"Cal": ["WAIT", "SAY: stop"]}), halt_predicate=lambda w: any(e.kind is EventKind.SPEAK for e in w.event_log))
    assert outcome.halted and outcome.ticks == 2 and outcome.reason == "halt"
    world = load_world(config)
    outcome = engine.run(world, scripted({}), max_ticks=3)
    assert not outcome.halted and outcome.ticks == 3 and world.tick == 3
    world = load_world(config)
    assert engine.run(world, scripted({})).ticks == config["max_ticks"]
    with pytest.raises(ValueError):
        engine.run(load_world(config), scripted({}), max_ticks=0)


def test_backend_errors_carry_agent_and_tick(config):
    class Boom:
        def complete(self, bundle, sampling=None):
            if bundle.owner == "Ben":
                raise BackendError("endpoint down")
            return "3" if bundle.observation is None else "WAIT"

    world = load_world(config)
    with pytest.raises(BackendError) as info:
        engine.run(world, Boom(), max_ticks=2)
    assert info.value.agent == "Ben" and info.value.tick == 1
    assert "agent=Ben" in str(info.value) and "tick=1" in str(info.value)
