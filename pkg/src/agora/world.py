"""World model: locations, agents, and the append-only, witnessed event log.

An event is visible only to the agents standing in its location at the moment
it is emitted. That witness set is the sole channel through which one agent
learns about another's actions, so everything downstream (prompts, memories,
extraction) is driven off of it.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema

from agora.errors import (
    ActorNotPresentError,
    ConfigReferenceError,
    DuplicateNameError,
    LocationNotAllowedError,
    SchemaError,
    UnknownLocationError,
)

SCHEMA_VERSION = "1"
DEFAULT_MAX_TICKS = 50


class EventKind(str, Enum):
    SPEAK = "speak"
    MOVE = "move"
    WAIT = "wait"
    SYSTEM = "system"


@dataclass(frozen=True)
class Location:
    name: str
    description: str = ""
    # empty means open to everyone
    allowed_agents: frozenset[str] = frozenset()

    def allows(self, agent: str) -> bool:
        return not self.allowed_agents or agent in self.allowed_agents


@dataclass(frozen=True)
class Event:
    tick: int
    seq: int
    actor: str
    location: str
    kind: EventKind
    description: str
    witnesses: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "seq": self.seq,
            "actor": self.actor,
            "location": self.location,
            "kind": self.kind.value,
            "description": self.description,
            "witnesses": list(self.witnesses),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Event:
        return cls(
            tick=int(d["tick"]),
            seq=int(d["seq"]),
            actor=d["actor"],
            location=d["location"],
            kind=EventKind(d["kind"]),
            description=d["description"],
            witnesses=tuple(d["witnesses"]),
        )

    @property
    def position(self) -> tuple[int, int]:
        return (self.tick, self.seq)

    def witnessed_by(self, agent: str) -> bool:
        return agent in self.witnesses


@dataclass(frozen=True)
class Plan:
    description: str
    location: str
    stop_condition: str
    created_tick: int = 0


@dataclass(frozen=True)
class Memory:
    description: str
    created_tick: int
    importance: int

    def __post_init__(self):
        object.__setattr__(self, "importance", max(1, min(10, int(self.importance))))


@dataclass
class AgentProfile:
    name: str
    public_bio: str
    private_bio: str
    directives: tuple[str, ...]
    initial_plan: Plan
    current_location: str


@dataclass
class AgentScratch:
    """Mutable per-agent state that is not part of the config."""

    plan: Plan
    memories: list[Memory] = field(default_factory=list)
    # index into the world's event log of the first event not yet observed
    cursor: int = 0


@dataclass
class WorldState:
    tick: int
    locations: list[Location]
    agents: list[AgentProfile]
    event_log: list[Event]
    rng_seed: int
    agent_scratch: dict[str, AgentScratch]
    max_ticks: int = DEFAULT_MAX_TICKS
    scenario: dict[str, Any] = field(default_factory=dict)

    # -- lookups ---------------------------------------------------------

    def location(self, name: str) -> Location:
        for loc in self.locations:
            if loc.name == name:
                return loc
        raise UnknownLocationError(f"no location named {name!r}")

    def has_location(self, name: str) -> bool:
        return any(loc.name == name for loc in self.locations)

    def agent(self, name: str) -> AgentProfile:
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def agent_names(self) -> list[str]:
        return [a.name for a in self.agents]

    def occupants(self, location: str) -> tuple[str, ...]:
        return tuple(sorted(a.name for a in self.agents if a.current_location == location))

    def witnessed_events(self, agent: str) -> list[Event]:
        return [e for e in self.event_log if agent in e.witnesses]

    def copy(self) -> WorldState:
        return copy.deepcopy(self)


# -- config loading -------------------------------------------------------------


@lru_cache(maxsize=1)
def config_schema() -> dict[str, Any]:
    text = resources.files("agora.data").joinpath("world_schema_v1.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_config(config: Mapping[str, Any]) -> None:
    """Structural + referential validation of a scenario config document."""
    try:
        jsonschema.validate(instance=config, schema=config_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None

    loc_names = [loc["name"] for loc in config["locations"]]
    agent_names = [a["name"] for a in config["agents"]]
    for kind, names in (("location", loc_names), ("agent", agent_names)):
        seen = set()
        for n in names:
            if n in seen:
                raise DuplicateNameError(f"duplicate {kind} name {n!r}")
            seen.add(n)

    known_agents = set(agent_names)
    allowed = {}
    for loc in config["locations"]:
        names = set(loc.get("allowed_agents", []))
        unknown = sorted(names - known_agents)
        if unknown:
            raise ConfigReferenceError(f"location {loc['name']!r} allows unknown agent(s) {unknown}")
        allowed[loc["name"]] = names

    for a in config["agents"]:
        where = a["initial_plan"]["location"]
        if where not in allowed:
            raise ConfigReferenceError(f"agent {a['name']!r} plan cites unknown location {where!r}")
        if allowed[where] and a["name"] not in allowed[where]:
            raise ConfigReferenceError(f"agent {a['name']!r} starts in {where!r}, which does not allow it")


def load_world(config: Mapping[str, Any]) -> WorldState:
    """Build a tick-0 world from a validated config document."""
    validate_config(config)
    locations = [
        Location(loc["name"], loc.get("description", ""), frozenset(loc.get("allowed_agents", [])))
        for loc in config["locations"]
    ]
    agents = []
    scratch = {}
    for a in config["agents"]:
        p = a["initial_plan"]
        plan = Plan(p["description"], p["location"], p["stop_condition"], 0)
        agents.append(
            AgentProfile(
                name=a["name"],
                public_bio=a["public_bio"],
                private_bio=a.get("private_bio", ""),
                directives=tuple(a.get("directives", [])),
                initial_plan=plan,
                current_location=plan.location,
            )
        )
        scratch[a["name"]] = AgentScratch(plan=plan)
    return WorldState(
        tick=0,
        locations=locations,
        agents=agents,
        event_log=[],
        rng_seed=int(config.get("seed", 0)),
        agent_scratch=scratch,
        max_ticks=int(config.get("max_ticks", DEFAULT_MAX_TICKS)),
        scenario=copy.deepcopy(dict(config.get("scenario", {}))),
    )


def load_world_file(path: str | Path) -> WorldState:
    return load_world(json.loads(Path(path).read_text(encoding="utf-8")))


# -- mutation -------------------------------------------------------------------


def emit_event(world: WorldState, actor: str, kind: EventKind, location: str, description: str) -> Event:
    if world.agent(actor).current_location != location:
        raise ActorNotPresentError(f"{actor} is not in {location!r}")
    last = world.event_log[-1] if world.event_log else None
    seq = last.seq + 1 if last is not None and last.tick == world.tick else 0
    event = Event(
        tick=world.tick,
        seq=seq,
        actor=actor,
        location=location,
        kind=EventKind(kind),
        description=description,
        witnesses=world.occupants(location),
    )
    world.event_log.append(event)
    return event


def move_description(agent: str, source: str, destination: str) -> str:
    return f"{agent} moves from {source} to {destination}."


def arrival_description(agent: str, destination: str) -> str:
    return f"{agent} returns to {destination}."


def move_agent(world: WorldState, agent: str, destination: str) -> WorldState:
    """Move ``agent`` to ``destination``.

    The move event is witnessed where the agent departs. A move back into the
    agent's home location (where its initial plan started) additionally emits
    an arrival event witnessed by the destination's occupants, which is how
    turn-taking agents notice that their predecessor has come back.
    """
    dest = world.location(destination)
    if not dest.allows(agent):
        raise LocationNotAllowedError(f"{agent} may not enter {destination!r}")
    profile = world.agent(agent)
    source = profile.current_location
    emit_event(world, agent, EventKind.MOVE, source, move_description(agent, source, destination))
    if source == destination:
        return world
    profile.current_location = destination
    if destination == profile.initial_plan.location:
        emit_event(world, agent, EventKind.SYSTEM, destination, arrival_description(agent, destination))
    return world


# -- serialization --------------------------------------------------------------


def event_line(event: Event) -> str:
    return json.dumps(event.to_dict(), ensure_ascii=False, separators=(",", ":"))


def dump_events(events: Iterable[Event]) -> str:
    return "".join(event_line(e) + "\n" for e in events)


def parse_events(text: str) -> list[Event]:
    return [Event.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def write_event_logs(events: list[Event], agent_names: Iterable[str], directory: str | Path) -> None:
    """Write the global log plus one log per agent holding only what it witnessed."""
    directory = Path(directory)
    (directory / "agents").mkdir(parents=True, exist_ok=True)
    (directory / "events.jsonl").write_text(dump_events(events), encoding="utf-8")
    for name in agent_names:
        mine = [e for e in events if name in e.witnesses]
        (directory / "agents" / f"{name}.jsonl").write_text(dump_events(mine), encoding="utf-8")


def read_event_log(path: str | Path) -> list[Event]:
    return parse_events(Path(path).read_text(encoding="utf-8"))


# -- verification ---------------------------------------------------------------


def replay_occupancy(config: Mapping[str, Any], events: Iterable[Event]) -> list[str]:
    """Recompute who stood where for every event and report witness mismatches.

    Returns a list of human-readable violations; empty means the log satisfies
    witness closure and placement validity.
    """
    world = load_world(config)
    where = {a.name: a.current_location for a in world.agents}
    problems = []
    for e in events:
        expected = tuple(sorted(n for n, loc in where.items() if loc == e.location))
        if expected != e.witnesses:
            problems.append(f"({e.tick},{e.seq}) witnesses {e.witnesses} != occupants {expected}")
        if e.actor not in e.witnesses:
            problems.append(f"({e.tick},{e.seq}) actor {e.actor} not among witnesses")
        if e.kind is EventKind.MOVE:
            prefix = f"{e.actor} moves from {e.location} to "
            if not e.description.startswith(prefix):
                problems.append(f"({e.tick},{e.seq}) malformed move description")
                continue
            dest = e.description[len(prefix):].removesuffix(".")
            if not world.location(dest).allows(e.actor):
                problems.append(f"({e.tick},{e.seq}) {e.actor} entered disallowed {dest}")
            where[e.actor] = dest
    return problems
