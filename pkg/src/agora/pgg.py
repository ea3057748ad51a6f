"""Public goods game: payoff arithmetic, scenario construction and game runs.

Money is integer cents throughout. A player's payoff is what they kept plus
an equal share of the multiplied pool::

    payoff_i = (endowment_i - contribution_i) + round_half_even(M * pool / n)

so the group total equals ``sum(endowments) + (M - 1) * pool`` up to at most
``n/2`` cents of rounding, and exactly when ``M * pool`` divides evenly by ``n``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from agora import data, engine
from agora.backends import derive_seed
from agora.cognition import CognitionBackend
from agora.errors import (
    ContributionOutOfBounds,
    ExtractionError,
    LengthMismatch,
    SpecError,
    TimeoutHalt,
)
from agora.extract import ExtractionRecord, contribution_records
from agora.world import Event, EventKind, WorldState, load_world

GAME_ROOM = "Game Room"
MODERATION_ROOM = "Moderation Room"
MODERATOR = "Moderator"
DEFAULT_NAMES = ("Alice", "Bob", "Casey", "David", "Emma", "Frank", "Grace", "Henry")
DEFAULT_MULTIPLIER = Fraction(8, 5)
DEFAULT_MAX_TICKS = 60


# -- money ----------------------------------------------------------------------


def dollars(amount: Any) -> int:
    """Convert a dollar amount (int, str, Decimal or float) to integer cents."""
    d = Decimal(str(amount)) * 100
    return int(d.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def format_money(cents: int, unit: str = "$") -> str:
    sign = "-" if cents < 0 else ""
    whole, frac = divmod(abs(cents), 100)
    return f"{sign}{unit}{whole}" if frac == 0 else f"{sign}{unit}{whole}.{frac:02d}"


def as_multiplier(m: Any) -> Fraction:
    f = Fraction(str(m)) if not isinstance(m, Fraction) else m
    if f <= 0:
        raise SpecError(f"multiplier must be positive, got {m}")
    return f


def format_multiplier(m: Fraction) -> str:
    d = Decimal(m.numerator) / Decimal(m.denominator)
    return format(d.normalize(), "f")


# -- payoffs ----------------------------------------------------------------------


def _check_round(endowments: Sequence[int], contributions: Sequence[int]) -> None:
    if len(endowments) != len(contributions):
        raise LengthMismatch(f"{len(endowments)} endowments vs {len(contributions)} contributions")
    if len(endowments) < 3:
        raise SpecError("a public goods game needs at least 3 players")
    for i, (e, c) in enumerate(zip(endowments, contributions)):
        if c < 0 or c > e:
            raise ContributionOutOfBounds(f"player {i}: contribution {c} outside [0, {e}]")


def pool_share(pool: int, multiplier: Fraction, n: int) -> int:
    # round() on a Fraction rounds half to even
    return round(as_multiplier(multiplier) * pool / n)


def compute_payoffs(endowments: Sequence[int], contributions: Sequence[int], multiplier: Any = DEFAULT_MULTIPLIER) -> list[int]:
    _check_round(endowments, contributions)
    share = pool_share(sum(contributions), as_multiplier(multiplier), len(endowments))
    return [e - c + share for e, c in zip(endowments, contributions)]


@dataclass(frozen=True)
class RoundLedger:
    round: int
    players: tuple[str, ...]
    endowments: tuple[int, ...]
    contributions: tuple[int, ...]
    multiplier: Fraction
    pool: int
    payoffs: tuple[int, ...]

    @classmethod
    def compute(cls, round: int, players: Sequence[str], endowments: Sequence[int], contributions: Sequence[int], multiplier: Any) -> RoundLedger:
        m = as_multiplier(multiplier)
        payoffs = compute_payoffs(endowments, contributions, m)
        return cls(round, tuple(players), tuple(endowments), tuple(contributions), m, sum(contributions), tuple(payoffs))

    def fraction(self, i: int) -> float:
        e = self.endowments[i]
        return self.contributions[i] / e if e else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "players": list(self.players),
            "endowments": list(self.endowments),
            "contributions": list(self.contributions),
            "multiplier": str(self.multiplier),
            "pool": self.pool,
            "payoffs": list(self.payoffs),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RoundLedger:
        return cls(
            d["round"], tuple(d["players"]), tuple(d["endowments"]), tuple(d["contributions"]),
            Fraction(d["multiplier"]), d["pool"], tuple(d["payoffs"]),
        )


def carry_endowments(ledger: RoundLedger) -> list[int]:
    """Next round's endowments: kept money plus pool share, i.e. this round's payoffs."""
    return list(ledger.payoffs)


# -- priming ----------------------------------------------------------------------


class Priming(str, Enum):
    NONE = "none"
    TEAMWORK = "game_name:positive"
    TAXATION = "game_name:negative"
    UNITY = "sentences:unity"
    PROPORTIONALITY = "sentences:proportionality"


@dataclass(frozen=True)
class PrimingText:
    condition: Priming
    text: str


def priming_injection(condition: Priming | str) -> PrimingText:
    condition = Priming(condition)
    if condition is Priming.NONE:
        raise SpecError("no priming text for condition 'none'")
    return PrimingText(condition, data.strings()["priming"][condition.value])


# -- game spec ------------------------------------------------------------------


@dataclass(frozen=True)
class Player:
    name: str
    endowment: int  # cents
    priming: Priming | None = None
    group: str | None = None


@dataclass(frozen=True)
class GameSpec:
    players: tuple[Player, ...]
    multiplier: Fraction = DEFAULT_MULTIPLIER
    rounds: int = 1
    transparency: bool = False
    # applied to players that do not carry their own priming
    priming: Priming = Priming.NONE
    currency_unit: str = "$"
    max_ticks: int = DEFAULT_MAX_TICKS

    def validate(self) -> None:
        if len(self.players) < 3:
            raise SpecError("a public goods game needs at least 3 players")
        names = [p.name for p in self.players]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate player names in {names}")
        if MODERATOR in names:
            raise SpecError(f"{MODERATOR!r} is reserved")
        if any(p.endowment < 0 for p in self.players):
            raise SpecError("endowments must be >= 0")
        if as_multiplier(self.multiplier) <= 0:
            raise SpecError("multiplier must be positive")
        if self.rounds < 1:
            raise SpecError("rounds must be >= 1")

    def priming_of(self, player: Player) -> Priming:
        return player.priming if player.priming is not None else self.priming

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.players]

    @property
    def contribution_location(self) -> str:
        return GAME_ROOM if self.transparency else MODERATION_ROOM

    @classmethod
    def uniform(cls, n: int = 4, endowment: Any = 20, **kwargs) -> GameSpec:
        players = tuple(Player(DEFAULT_NAMES[i], dollars(endowment)) for i in range(n))
        return cls(players=players, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "players": [
                {
                    "name": p.name,
                    "endowment": format_money(p.endowment, "").lstrip(),
                    **({"priming": p.priming.value} if p.priming is not None else {}),
                    **({"group": p.group} if p.group is not None else {}),
                }
                for p in self.players
            ],
            "multiplier": format_multiplier(as_multiplier(self.multiplier)),
            "rounds": self.rounds,
            "transparency": self.transparency,
            "priming": self.priming.value,
            "currency_unit": self.currency_unit,
            "max_ticks": self.max_ticks,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> GameSpec:
        if "players" not in d:
            raise SpecError("game spec needs 'players'")
        players = []
        for i, p in enumerate(d["players"]):
            if isinstance(p, (int, float, str)):
                p = {"endowment": p}
            players.append(
                Player(
                    name=p.get("name", DEFAULT_NAMES[i] if i < len(DEFAULT_NAMES) else f"Player{i + 1}"),
                    endowment=dollars(p["endowment"]),
                    priming=Priming(p["priming"]) if p.get("priming") else None,
                    group=p.get("group"),
                )
            )
        try:
            spec = cls(
                players=tuple(players),
                multiplier=as_multiplier(d.get("multiplier", "1.6")),
                rounds=int(d.get("rounds", 1)),
                transparency=bool(d.get("transparency", False)),
                priming=Priming(d.get("priming", "none")),
                currency_unit=d.get("currency_unit", "$"),
                max_ticks=int(d.get("max_ticks", DEFAULT_MAX_TICKS)),
            )
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
        spec.validate()
        return spec


# -- world construction -----------------------------------------------------------


def player_public_bio(name: str, endowment: int, unit: str = "$") -> str:
    return f"{name} is playing a public goods game and has an endowment of {format_money(endowment, unit)}."


def payoff_rule_text(multiplier: Fraction, n: int) -> str:
    return (
        f"The public pool is multiplied by {format_multiplier(multiplier)} and split evenly among the {n} players. "
        "Each player's payoff is the amount they keep plus their share of the pool."
    )


def build_pgg_world(
    spec: GameSpec,
    *,
    round: int = 1,
    endowments: Sequence[int] | None = None,
    seed: int = 0,
) -> dict[str, Any]:
    """Scenario config for one round of ``spec``.

    Endowments go in public bios, priming in private bios. Without
    transparency players speak to the moderator one at a time in the
    Moderation Room; with it there is only the Game Room and contributions
    are announced to everyone.
    """
    spec.validate()
    if endowments is None:
        endowments = [p.endowment for p in spec.players]
    if len(endowments) != len(spec.players):
        raise SpecError("endowments do not match players")
    m = as_multiplier(spec.multiplier)
    n = len(spec.players)
    unit = spec.currency_unit
    rule = payoff_rule_text(m, n)
    round_note = (
        [f"This is round {round} of {spec.rounds}. The amount you keep plus your payoff becomes your endowment for the next round."]
        if spec.rounds > 1
        else []
    )

    locations = [{"name": GAME_ROOM, "description": "The room where the players wait and where payoffs are announced.", "allowed_agents": []}]
    if not spec.transparency:
        locations.append(
            {"name": MODERATION_ROOM, "description": "A private room where each player tells the Moderator their contribution.", "allowed_agents": []}
        )

    agents = []
    for i, (p, e) in enumerate(zip(spec.players, endowments)):
        prev = spec.players[i - 1].name if i > 0 else None
        order = "You are the first player." if prev is None else f"The player before you is {prev}."
        priming = spec.priming_of(p)
        if spec.transparency:
            directives = [
                order,
                "Wait in the Game Room until the player before you has announced their contribution (unless you are first), "
                "then announce your contribution publicly in the Game Room as a whole-dollar amount.",
                rule,
                "Do not discuss the game with other players until the Moderator announces payoffs.",
            ]
            plan = {
                "description": "wait for the player before you to announce their contribution, then announce yours",
                "location": GAME_ROOM,
                "stop_condition": "you have announced your contribution",
            }
        else:
            directives = [
                order,
                "Wait in the Game Room for the player before you to return from the Moderation Room (unless you are first), "
                "then move to the Moderation Room and tell the Moderator your contribution as a whole-dollar amount.",
                "After stating your contribution, return to the Game Room.",
                rule,
                "Do not engage with other players in the Game Room until the Moderator comes to the Game Room and announces payoffs.",
            ]
            plan = {
                "description": "wait for the player before you to return from the Moderation Room, then make your contribution",
                "location": GAME_ROOM,
                "stop_condition": "you have made your contribution and returned to the Game Room",
            }
        agents.append(
            {
                "name": p.name,
                "public_bio": player_public_bio(p.name, e, unit),
                "private_bio": priming_injection(priming).text if priming is not Priming.NONE else "",
                "directives": directives + round_note,
                "initial_plan": plan,
            }
        )

    if spec.transparency:
        mod_directives = [
            "Wait in the Game Room while every player announces their contribution.",
            "Once all players have contributed, announce the payoffs in the Game Room.",
            rule,
        ]
        mod_plan = {"description": "wait for all players to make their contribution", "location": GAME_ROOM, "stop_condition": "all players have contributed"}
    else:
        mod_directives = [
            "Wait in the Moderation Room for all players to make their contribution, and remember each contribution.",
            "Once all players have made their contribution, move to the Game Room and announce the payoffs.",
            rule,
        ]
        mod_plan = {
            "description": "wait for all players to make their contribution",
            "location": MODERATION_ROOM,
            "stop_condition": "all players have made their contribution",
        }
    agents.append(
        {
            "name": MODERATOR,
            "public_bio": "This agent plays the role of the moderator.",
            "private_bio": "",
            "directives": mod_directives,
            "initial_plan": mod_plan,
        }
    )

    return {
        "schema_version": "1",
        "seed": int(seed),
        "max_ticks": spec.max_ticks,
        "locations": locations,
        "agents": agents,
        "scenario": {
            "kind": "pgg",
            "round": round,
            "rounds": spec.rounds,
            "multiplier": str(m),
            "transparency": spec.transparency,
            "contribution_location": spec.contribution_location,
            "players": [
                {
                    "name": p.name,
                    "endowment": e,
                    "priming": spec.priming_of(p).value,
                    "group": p.group,
                }
                for p, e in zip(spec.players, endowments)
            ],
        },
    }


# -- running ----------------------------------------------------------------------


def is_payoff_announcement(event: Event) -> bool:
    return event.kind is EventKind.SPEAK and event.actor == MODERATOR and event.location == GAME_ROOM and "payoff" in event.description.lower()


def payoffs_announced(world: WorldState) -> bool:
    return any(is_payoff_announcement(e) for e in world.event_log)


@dataclass
class RoundRun:
    config: dict[str, Any]
    events: list[Event]
    records: list[ExtractionRecord]
    ledger: RoundLedger


@dataclass
class GameResult:
    spec: GameSpec
    seed: int
    rounds: list[RoundRun] = field(default_factory=list)

    @property
    def ledgers(self) -> list[RoundLedger]:
        return [r.ledger for r in self.rounds]

    def to_dict(self) -> dict[str, Any]:
        return {"spec": self.spec.to_dict(), "seed": self.seed, "ledgers": [l.to_dict() for l in self.ledgers]}


def round_seed(seed: int, round: int) -> int:
    return derive_seed(seed, "round", round)


def ledger_from_records(config: Mapping[str, Any], records: Sequence[ExtractionRecord]) -> RoundLedger:
    meta = config["scenario"]
    players = [p["name"] for p in meta["players"]]
    endowments = [p["endowment"] for p in meta["players"]]
    by_name = {r.agent: r for r in records}
    contributions = []
    for name in players:
        rec = by_name.get(name)
        if rec is None or rec.value is None:
            raise ExtractionError(f"no parsable contribution for {name} in round {meta['round']}")
        contributions.append(int(rec.value))
    return RoundLedger.compute(meta["round"], players, endowments, contributions, Fraction(meta["multiplier"]))


def play_round(config: Mapping[str, Any], backend: CognitionBackend, max_ticks: int | None = None, run_id: str = "") -> RoundRun:
    world = load_world(config)
    meta = config["scenario"]
    outcome = engine.run(world, backend, max_ticks, payoffs_announced)
    events = outcome.events
    players = [p["name"] for p in meta["players"]]
    records = contribution_records(events, players, meta["contribution_location"], meta["round"], run_id)
    if not outcome.halted:
        missing = [r.agent for r in records if r.value is None]
        exc = TimeoutHalt(
            f"round {meta['round']} hit max_ticks={outcome.ticks} before payoffs were announced; "
            f"missing contributions: {missing or 'none'}",
            tick=world.tick,
            missing=missing,
        )
        exc.events = list(events)
        raise exc
    return RoundRun(dict(config), list(events), records, ledger_from_records(config, records))


def run_game(spec: GameSpec, backend: CognitionBackend, seed: int, *, run_id: str = "") -> GameResult:
    """Play every round of ``spec``; each round's payoffs become the next round's endowments."""
    spec.validate()
    result = GameResult(spec, seed)
    endowments = [p.endowment for p in spec.players]
    for r in range(1, spec.rounds + 1):
        config = build_pgg_world(spec, round=r, endowments=endowments, seed=round_seed(seed, r))
        try:
            rr = play_round(config, backend, spec.max_ticks, run_id)
        except TimeoutHalt as exc:
            exc.completed = result
            raise
        result.rounds.append(rr)
        endowments = carry_endowments(rr.ledger)
    return result


# -- helpers for scripted policies and analysis ------------------------------------

_MULT_RE = re.compile(r"multiplied by (\d+(?:\.\d+)?)")
_ROUND_RE = re.compile(r"This is round (\d+) of (\d+)")
_PREV_RE = re.compile(r"The player before you is (.+?)\.$")


def directive_multiplier(directives: Iterable[str]) -> Fraction | None:
    for d in directives:
        m = _MULT_RE.search(d)
        if m:
            return Fraction(m.group(1))
    return None


def directive_round(directives: Iterable[str]) -> tuple[int, int]:
    for d in directives:
        m = _ROUND_RE.search(d)
        if m:
            return int(m.group(1)), int(m.group(2))
    return 1, 1


def directive_predecessor(directives: Iterable[str]) -> str | None:
    for d in directives:
        m = _PREV_RE.search(d)
        if m:
            return m.group(1)
    return None
