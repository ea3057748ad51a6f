"""The thinking half of the agent loop.

Prompt assembly, importance scoring, memory retrieval and the ``react``
decision all live here. Backends (see :mod:`agora.backends`) only ever see a
:class:`PromptBundle`; the bundle's ``observation`` carries a structured copy
of the same information for scripted policies and is never rendered into text.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Protocol

from agora.world import AgentProfile, Event, Memory, Plan, WorldState

if TYPE_CHECKING:
    from agora.backends import SamplingParams

log = logging.getLogger(__name__)

DEFAULT_TOKEN_BUDGET = 4000
RECENT_EVENT_LIMIT = 25
RETRIEVAL_K = 5

# retrieval weights: importance, recency, lexical relevance
W_IMPORTANCE = 0.4
W_RECENCY = 0.3
W_RELEVANCE = 0.3
RECENCY_BASE = 0.99

IMPORTANCE_FALLBACK = 5

REPLY_GRAMMAR = """\
Reply with exactly one line in one of these forms:
CONTINUE
PLAN: <description> @ <location> UNTIL <stop condition>
SAY: <what you say out loud>
MOVE: <location>
WAIT"""

FORMAT_REMINDER = "Your previous reply did not follow the required format. " + REPLY_GRAMMAR


class RequestKind(str, Enum):
    REACT = "react"
    IMPORTANCE = "importance"


@dataclass(frozen=True)
class Observation:
    """What the owning agent can legitimately know, in structured form."""

    owner: str
    tick: int
    seed: int
    location: str
    location_names: tuple[str, ...]
    present: tuple[str, ...]
    public_bio: str
    private_bio: str
    directives: tuple[str, ...]
    plan: Plan | None
    others: tuple[tuple[str, str], ...]
    events: tuple[Event, ...]
    request: RequestKind


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    context_text: str
    request_text: str
    token_budget: int = DEFAULT_TOKEN_BUDGET
    observation: Observation | None = field(default=None, compare=False)

    @property
    def text(self) -> str:
        return f"{self.system_text}\n\n{self.context_text}\n\n{self.request_text}"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    @property
    def owner(self) -> str | None:
        return self.observation.owner if self.observation else None


class CognitionBackend(Protocol):
    def complete(self, bundle: PromptBundle, sampling: SamplingParams | None = None) -> str: ...


# -- prompt assembly --------------------------------------------------------------


def _count_tokens(text: str) -> int:
    return len(text.split())


def _system_text(agent: AgentProfile) -> str:
    lines = [f"You are {agent.name}.", agent.public_bio]
    if agent.private_bio:
        lines.append(f"Private information only you know: {agent.private_bio}")
    lines.append("")
    lines.append("Directives:")
    lines.extend(f"- {d}" for d in agent.directives)
    return "\n".join(lines)


def _presence_line(world: WorldState, agent: AgentProfile) -> str:
    here = [n for n in world.occupants(agent.current_location) if n != agent.name]
    return f"Also here: {', '.join(here)}." if here else "Nobody else is here."


def assemble_prompt(
    agent: AgentProfile,
    world: WorldState,
    retrieved: list[Memory],
    request: str,
    *,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    request_kind: RequestKind = RequestKind.REACT,
) -> PromptBundle:
    """Render one agent's view of the world in canonical section order.

    Sections: identity and directives (system text), then location, other
    agents' public bios, retrieved memories, recent witnessed events, and
    finally the request. If the rendering exceeds ``token_budget`` the oldest
    events are dropped first and a truncation marker is left in their place.
    """
    system_text = _system_text(agent)
    loc = world.location(agent.current_location)
    scratch = world.agent_scratch[agent.name]
    others = tuple((a.name, a.public_bio) for a in world.agents if a.name != agent.name)
    witnessed = tuple(world.witnessed_events(agent.name))

    head = [
        f"Current time: tick {world.tick}.",
        f"You are in the {loc.name}. {loc.description}".rstrip(),
        _presence_line(world, agent),
        "Locations: " + ", ".join(l.name for l in world.locations) + ".",
        "",
        "Other people:",
    ]
    head.extend(f"- {name}: {bio}" for name, bio in others)
    head.append("")
    head.append("Relevant memories:")
    head.extend(f"- {m.description}" for m in retrieved)
    head.append("")
    head.append("Recent events you witnessed:")

    recent = list(witnessed[-RECENT_EVENT_LIMIT:])
    dropped = len(witnessed) - len(recent)
    fixed = _count_tokens(system_text) + _count_tokens("\n".join(head)) + _count_tokens(request)

    def event_lines(evs: list[Event], n_dropped: int) -> list[str]:
        out = [f"[{n_dropped} earlier events truncated]"] if n_dropped else []
        out.extend(f"- (tick {e.tick}) {e.description}" for e in evs)
        return out

    while recent and fixed + _count_tokens("\n".join(event_lines(recent, dropped))) > token_budget:
        recent.pop(0)
        dropped += 1

    context_text = "\n".join(head + event_lines(recent, dropped))
    plan = scratch.plan
    obs = Observation(
        owner=agent.name,
        tick=world.tick,
        seed=world.rng_seed,
        location=agent.current_location,
        location_names=tuple(l.name for l in world.locations),
        present=tuple(n for n in world.occupants(agent.current_location) if n != agent.name),
        public_bio=agent.public_bio,
        private_bio=agent.private_bio,
        directives=agent.directives,
        plan=plan,
        others=others,
        events=witnessed,
        request=request_kind,
    )
    return PromptBundle(system_text, context_text, request, token_budget, obs)


def react_request(plan: Plan) -> str:
    return (
        f"Your current plan: {plan.description} (in the {plan.location}, until {plan.stop_condition}).\n"
        "Decide whether to continue your current plan, make a new plan, or act now.\n" + REPLY_GRAMMAR
    )


# -- memory -----------------------------------------------------------------------


_INT_RE = re.compile(r"-?\d+")


def importance_bundle(description: str) -> PromptBundle:
    request = (
        "On a scale of 1 to 10, where 1 is purely mundane and 10 is extremely important, "
        f"rate the importance of this memory:\n{description}\nReply with a single integer."
    )
    return PromptBundle("You rate the importance of memories.", "", request)


def parse_importance(reply: str) -> int | None:
    m = _INT_RE.search(reply)
    if m is None:
        return None
    return max(1, min(10, int(m.group())))


def score_importance(backend: CognitionBackend, description: str, sampling=None) -> int:
    reply = backend.complete(importance_bundle(description), sampling)
    score = parse_importance(reply)
    if score is None:
        log.warning("unparseable importance reply %r; using %d", reply, IMPORTANCE_FALLBACK)
        return IMPORTANCE_FALLBACK
    return score


_WORD_RE = re.compile(r"[a-z0-9']+")


def word_set(text: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(text.lower()))


def jaccard(a: str, b: str) -> float:
    wa, wb = word_set(a), word_set(b)
    union = wa | wb
    return len(wa & wb) / len(union) if union else 0.0


def memory_score(memory: Memory, query: str, now_tick: int) -> float:
    recency = RECENCY_BASE ** (now_tick - memory.created_tick)
    return (
        W_IMPORTANCE * (memory.importance / 10)
        + W_RECENCY * recency
        + W_RELEVANCE * jaccard(query, memory.description)
    )


def retrieve_relevant(memories: list[Memory], query: str, k: int, now_tick: int) -> list[Memory]:
    """Top-``k`` memories by weighted importance, recency and word overlap.

    Ties go to the newer memory, then to the one stored first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(
        enumerate(memories),
        key=lambda im: (-memory_score(im[1], query, now_tick), -im[1].created_tick, im[0]),
    )
    return [m for _, m in ranked[:k]]


# -- decisions --------------------------------------------------------------------


class DecisionKind(str, Enum):
    CONTINUE = "continue_plan"
    NEW_PLAN = "new_plan"
    SAY = "say"
    MOVE = "move"
    WAIT = "wait"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    text: str = ""
    destination: str = ""
    plan: Plan | None = None

    @classmethod
    def continue_plan(cls) -> Decision:
        return cls(DecisionKind.CONTINUE)


_PLAN_RE = re.compile(r"^PLAN:\s*(?P<desc>.+?)\s+@\s+(?P<loc>.+?)\s+UNTIL\s+(?P<until>.+)$")


def parse_decision(reply: str, agent: AgentProfile, world: WorldState) -> Decision | None:
    """Parse one reply line; ``None`` if it does not fit the grammar or names a bad location."""
    lines = [ln.strip() for ln in reply.strip().splitlines() if ln.strip()]
    if len(lines) != 1:
        return None
    line = lines[0]
    if line == "CONTINUE":
        return Decision.continue_plan()
    if line == "WAIT":
        return Decision(DecisionKind.WAIT)
    if line.startswith("SAY:"):
        text = line[4:].strip()
        return Decision(DecisionKind.SAY, text=text) if text else None
    if line.startswith("MOVE:"):
        dest = line[5:].strip()
        if not world.has_location(dest) or not world.location(dest).allows(agent.name):
            return None
        return Decision(DecisionKind.MOVE, destination=dest)
    m = _PLAN_RE.match(line)
    if m:
        loc = m.group("loc").strip()
        if not world.has_location(loc) or not world.location(loc).allows(agent.name):
            return None
        plan = Plan(m.group("desc").strip(), loc, m.group("until").strip(), world.tick)
        return Decision(DecisionKind.NEW_PLAN, plan=plan)
    return None


def react(agent: AgentProfile, world: WorldState, backend: CognitionBackend, retrieved: list[Memory], sampling=None) -> Decision:
    """Ask the backend what to do next; one retry on malformed output, then CONTINUE."""
    plan = world.agent_scratch[agent.name].plan
    request = react_request(plan)
    for attempt in range(2):
        bundle = assemble_prompt(agent, world, retrieved, request)
        reply = backend.complete(bundle, sampling)
        decision = parse_decision(reply, agent, world)
        if decision is not None:
            return decision
        log.info("malformed reply from %s at tick %d (attempt %d): %r", agent.name, world.tick, attempt + 1, reply)
        request = react_request(plan) + "\n\n" + FORMAT_REMINDER
    return Decision.continue_plan()
