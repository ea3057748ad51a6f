"""Deterministic scheduler: one agent loop per agent per tick, in config order."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from agora import cognition
from agora.cognition import CognitionBackend, Decision, DecisionKind
from agora.errors import BackendError
from agora.world import AgentProfile, Event, EventKind, Memory, WorldState, emit_event, move_agent

HaltPredicate = Callable[[WorldState], bool]


def speak_description(agent: str, text: str) -> str:
    return f'{agent} says: "{text}"'


def wait_description(agent: str, location: str) -> str:
    return f"{agent} waits in the {location}."


def act(world: WorldState, agent: AgentProfile, decision: Decision) -> None:
    scratch = world.agent_scratch[agent.name]
    here = agent.current_location
    if decision.kind is DecisionKind.SAY:
        emit_event(world, agent.name, EventKind.SPEAK, here, speak_description(agent.name, decision.text))
    elif decision.kind is DecisionKind.MOVE:
        move_agent(world, agent.name, decision.destination)
    elif decision.kind is DecisionKind.NEW_PLAN:
        # adopting a plan is private; execution starts on a later turn
        scratch.plan = decision.plan
        emit_event(world, agent.name, EventKind.WAIT, here, f"{agent.name} pauses to think.")
    elif decision.kind is DecisionKind.CONTINUE:
        target = scratch.plan.location
        if target != here and world.location(target).allows(agent.name):
            move_agent(world, agent.name, target)
        else:
            emit_event(world, agent.name, EventKind.WAIT, here, wait_description(agent.name, here))
    else:
        emit_event(world, agent.name, EventKind.WAIT, here, wait_description(agent.name, here))


def agent_loop(world: WorldState, agent: AgentProfile, backend: CognitionBackend) -> Decision:
    """observe -> memorize -> plan -> react -> act for a single agent."""
    scratch = world.agent_scratch[agent.name]
    observed = [e for e in world.event_log[scratch.cursor:] if agent.name in e.witnesses]
    scratch.cursor = len(world.event_log)
    for e in observed:
        scratch.memories.append(Memory(e.description, e.tick, cognition.score_importance(backend, e.description)))
    # plans change only through react; the current plan is the starting point
    query = " ".join([scratch.plan.description] + [e.description for e in observed[-3:]])
    retrieved = cognition.retrieve_relevant(scratch.memories, query, cognition.RETRIEVAL_K, world.tick)
    decision = cognition.react(agent, world, backend, retrieved)
    act(world, agent, decision)
    return decision


def advance_tick(world: WorldState, backend: CognitionBackend) -> WorldState:
    """Advance ``world`` in place by one tick and return it."""
    world.tick += 1
    for agent in world.agents:
        try:
            agent_loop(world, agent, backend)
        except BackendError as exc:
            exc.agent = exc.agent or agent.name
            exc.tick = world.tick
            raise
    return world


@dataclass
class RunOutcome:
    world: WorldState
    halted: bool
    ticks: int

    @property
    def events(self) -> list[Event]:
        return self.world.event_log

    @property
    def reason(self) -> str:
        return "halt" if self.halted else "max_ticks"


def run(
    world: WorldState,
    backend: CognitionBackend,
    max_ticks: int | None = None,
    halt_predicate: HaltPredicate | None = None,
) -> RunOutcome:
    """Tick until ``halt_predicate`` holds or ``max_ticks`` ticks have run.

    ``halted`` is False when the tick budget ran out first; callers that need
    the halt condition turn that into :class:`~agora.errors.TimeoutHalt`.
    """
    max_ticks = world.max_ticks if max_ticks is None else max_ticks
    if max_ticks < 1:
        raise ValueError("max_ticks must be >= 1")
    for n in range(1, max_ticks + 1):
        advance_tick(world, backend)
        if halt_predicate is not None and halt_predicate(world):
            return RunOutcome(world, True, n)
    return RunOutcome(world, False, max_ticks)
