"""Classroom and parking-lot scenario builders."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from agora import data
from agora.errors import SpecError
from agora.world import EventKind, WorldState

PROFESSOR = "Professor"
CLASSROOM = "Classroom"
OFFICE = "Office"
WORK_ROOM = "Work Room"
SHOPPER = "Shopper"
PARKED_AREA = "Parked Area"
RECEPTACLE = "Receptacle"

STUDENT_NAMES = ("Alice", "Bob", "Casey", "David", "Emma", "Frank")
PERSONALITIES = ("overachiever", "procrastinator", "balanced")
DEFAULT_CADENCE = 6


class LatePolicy(str, Enum):
    LLP = "LLP"
    MLP = "MLP"
    HLP = "HLP"


class Perturbation(str, Enum):
    P0 = "P0"
    P1 = "P1"
    P2 = "P2"


class CartCondition(str, Enum):
    FFR = "FFR"
    HAC = "HAC"


def late_policy_text(policy: LatePolicy | str) -> str:
    return data.strings()["late_policy"][LatePolicy(policy).value]


def perturbation_text(p: Perturbation | str) -> str:
    return data.strings()["perturbation"][Perturbation(p).value]


def personality_text(kind: str) -> str:
    try:
        return data.strings()["personality"][kind]
    except KeyError:
        raise SpecError(f"unknown personality {kind!r}") from None


def stake_text(condition: CartCondition | str, stake_prompting: bool) -> str:
    key = f"{CartCondition(condition).value}:{'stake' if stake_prompting else 'plain'}"
    return data.strings()["stake"][key]


@dataclass(frozen=True)
class ClassroomSpec:
    late_policy: LatePolicy = LatePolicy.LLP
    perturbation: Perturbation = Perturbation.P0
    rooms_enabled: bool = True
    n_students: int = 3
    n_assignments: int = 5
    personalities: tuple[str, ...] = PERSONALITIES
    cadence: int = DEFAULT_CADENCE
    max_ticks: int | None = None

    def validate(self) -> None:
        if len(self.personalities) != self.n_students:
            raise SpecError(f"{len(self.personalities)} personalities for {self.n_students} students")
        if not 1 <= self.n_students <= len(STUDENT_NAMES):
            raise SpecError("n_students out of range")
        if self.n_assignments < 1 or self.cadence < 2:
            raise SpecError("need n_assignments >= 1 and cadence >= 2")
        for p in self.personalities:
            personality_text(p)

    @property
    def cell(self) -> str:
        return f"{LatePolicy(self.late_policy).value}-{Perturbation(self.perturbation).value}"

    @property
    def ticks_needed(self) -> int:
        return 1 + self.cadence * self.n_assignments

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ClassroomSpec:
        n = int(d.get("n_students", 3))
        try:
            spec = cls(
                late_policy=LatePolicy(d.get("late_policy", "LLP")),
                perturbation=Perturbation(d.get("perturbation", "P0")),
                rooms_enabled=bool(d.get("rooms_enabled", True)),
                n_students=n,
                n_assignments=int(d.get("n_assignments", 5)),
                personalities=tuple(d.get("personalities", PERSONALITIES[:n])),
                cadence=int(d.get("cadence", DEFAULT_CADENCE)),
                max_ticks=d.get("max_ticks"),
            )
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
        spec.validate()
        return spec

    def to_dict(self) -> dict[str, Any]:
        return {
            "late_policy": LatePolicy(self.late_policy).value,
            "perturbation": Perturbation(self.perturbation).value,
            "rooms_enabled": self.rooms_enabled,
            "n_students": self.n_students,
            "n_assignments": self.n_assignments,
            "personalities": list(self.personalities),
            "cadence": self.cadence,
            "max_ticks": self.max_ticks,
        }


def build_classroom(spec: ClassroomSpec, *, seed: int = 0) -> dict[str, Any]:
    spec.validate()
    students = list(STUDENT_NAMES[: spec.n_students])
    schedule = f"every {spec.cadence} ticks ({spec.n_assignments} total)"
    private = perturbation_text(spec.perturbation)

    if spec.rooms_enabled:
        locations = [
            {"name": CLASSROOM, "description": "Where the Professor announces assignments.", "allowed_agents": []},
            {"name": OFFICE, "description": "The Professor's office, open for questions.", "allowed_agents": []},
            {"name": WORK_ROOM, "description": "Where students work on assignments.", "allowed_agents": students},
        ]
        prof_directives = [
            "Answer student questions in the Office.",
            f"Move to the Classroom to announce a new assignment {schedule}, then return to the Office.",
            "Never enter the Work Room.",
        ]
        prof_plan = {
            "description": "announce the late policy and the first assignment's due date, then move to the Office",
            "location": CLASSROOM,
            "stop_condition": "the late policy and first assignment have been announced",
        }
        student_directives = [
            "Work on assignments in the Work Room.",
            f"Return to the Classroom {schedule} to hear announcements of new assignments.",
            "State how many days late you will submit each assignment.",
            "Use the Office to talk to or ask questions to the Professor.",
        ]
    else:
        locations = [{"name": CLASSROOM, "description": "The only room; all course activity happens here.", "allowed_agents": []}]
        prof_directives = [
            "Answer student questions.",
            f"Announce a new assignment {schedule}.",
        ]
        prof_plan = {
            "description": "announce the late policy and the first assignment's due date",
            "location": CLASSROOM,
            "stop_condition": "the late policy and first assignment have been announced",
        }
        student_directives = [
            "Work on assignments.",
            f"Listen to the Professor's announcements of new assignments {schedule}.",
            "State how many days late you will submit each assignment.",
        ]

    agents = [
        {
            "name": PROFESSOR,
            "public_bio": f"The Professor is the instructor for the course. {late_policy_text(spec.late_policy)}",
            "private_bio": "",
            "directives": prof_directives,
            "initial_plan": prof_plan,
        }
    ]
    for name, kind in zip(students, spec.personalities):
        agents.append(
            {
                "name": name,
                "public_bio": f"{name} {personality_text(kind)}",
                "private_bio": private,
                "directives": list(student_directives),
                "initial_plan": {
                    "description": "listen to the late policy and first assignment announcement",
                    "location": CLASSROOM,
                    "stop_condition": "the first assignment has been announced",
                },
            }
        )
    return {
        "schema_version": "1",
        "seed": int(seed),
        "max_ticks": spec.max_ticks or spec.ticks_needed + 2,
        "locations": locations,
        "agents": agents,
        "scenario": {"kind": "classroom", "cell": spec.cell, **spec.to_dict(), "students": students},
    }


@dataclass(frozen=True)
class CartSpec:
    condition: CartCondition = CartCondition.FFR
    stake_prompting: bool = False
    max_ticks: int = 6

    @property
    def cell(self) -> str:
        return f"{CartCondition(self.condition).value}-{'SP' if self.stake_prompting else 'noSP'}"

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> CartSpec:
        try:
            return cls(CartCondition(d.get("condition", "FFR")), bool(d.get("stake_prompting", False)), int(d.get("max_ticks", 6)))
        except ValueError as exc:
            raise SpecError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return {"condition": CartCondition(self.condition).value, "stake_prompting": self.stake_prompting, "max_ticks": self.max_ticks}


def build_cart(spec: CartSpec, *, seed: int = 0) -> dict[str, Any]:
    condition = stake_text(spec.condition, spec.stake_prompting)
    return {
        "schema_version": "1",
        "seed": int(seed),
        "max_ticks": spec.max_ticks,
        "locations": [
            {"name": PARKED_AREA, "description": "The spot in the grocery store parking lot where you parked.", "allowed_agents": []},
            {"name": RECEPTACLE, "description": "The designated shopping-cart return receptacle.", "allowed_agents": []},
        ],
        "agents": [
            {
                "name": SHOPPER,
                "public_bio": "",
                "private_bio": f"You have a shopping cart, and {condition}.",
                "directives": [
                    "You cannot leave the parking lot with your shopping cart.",
                    "Act on the outcome of your plan to leave the parking lot.",
                ],
                "initial_plan": {
                    "description": "prepare to leave the parking lot",
                    "location": PARKED_AREA,
                    "stop_condition": "you are ready to leave the parking lot",
                },
            }
        ],
        "scenario": {"kind": "cart", "cell": spec.cell, **spec.to_dict()},
    }


# -- halt predicates --------------------------------------------------------------

_DAYS_LATE = re.compile(r"assignment (\d+)", re.IGNORECASE)


def classroom_done(world: WorldState) -> bool:
    """Every student has stated a submission plan for the final assignment."""
    meta = world.scenario
    final = int(meta.get("n_assignments", 5))
    students = set(meta.get("students", []))
    answered = set()
    for e in world.event_log:
        if e.kind is EventKind.SPEAK and e.actor in students and "days late" in e.description:
            m = _DAYS_LATE.search(e.description)
            if m and int(m.group(1)) == final:
                answered.add(e.actor)
    return bool(students) and answered == students


def shopper_done(world: WorldState) -> bool:
    """The shopper has said what they did with the cart."""
    return any(e.kind is EventKind.SPEAK and e.actor == SHOPPER for e in world.event_log)
