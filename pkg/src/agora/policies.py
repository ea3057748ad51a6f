"""Scripted agent policies for deterministic, network-free runs.

A policy maps ``(observation, rng, params)`` to one reply line in the react
grammar. Policies only look at what the agent could know: its own bios and
directives, other agents' public bios, who is in the room, and the events it
witnessed. Stochastic choices that must stay fixed for a whole run (whether a
shopper returns the cart, whether a student proposes copying) draw from the
world seed, stratified by replicate when the harness passes one; per-utterance
draws use the ``rng`` argument.
"""

from __future__ import annotations

import random
import re
from typing import Any, Mapping

from agora import data, pgg, scenarios
from agora.backends import Policy, ScriptedBackend, derive_seed
from agora.cognition import Observation
from agora.errors import AmbiguousContribution, NoContributionFound, PackError
from agora.extract import find_contribution, parse_amounts
from agora.world import EventKind, arrival_description


def wait_policy(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    return "WAIT"


def continue_policy(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    return "CONTINUE"


def constant_policy(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    """Reply with ``params["replies"][owner]`` (or ``params["reply"]``)."""
    return params.get("replies", {}).get(obs.owner, params.get("reply", "WAIT"))


# -- public goods game ------------------------------------------------------------


def _said_anything(obs: Observation) -> bool:
    return any(e.actor == obs.owner and e.kind is EventKind.SPEAK for e in obs.events)


def _endowment_of(bio: str) -> int | None:
    amounts = parse_amounts(bio)
    return amounts[0].cents if amounts else None


def contribution_fraction(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> float:
    """Draw this player's contribution as a fraction of its current endowment.

    Rule precedence: ``fade`` (phrase in private bio, mean moves linearly from
    ``start`` in round 1 to ``end`` in the last round), ``primes`` (phrase in
    private bio), ``endowments`` (keyed by "equal"/"varied" then whole-dollar
    endowment), ``transparent``/``private`` setting, then ``default``.
    """
    default_sd = float(params.get("sd", 0.10))
    priv = obs.private_bio
    mean, sd = None, default_sd
    r, total = pgg.directive_round(obs.directives)
    for rule in params.get("fade", []):
        if rule["phrase"] in priv:
            step = (r - 1) / (total - 1) if total > 1 else 0.0
            mean = rule["start"] + (rule["end"] - rule["start"]) * step
            sd = rule.get("sd", default_sd)
            break
    if mean is None:
        for rule in params.get("primes", []):
            if rule["phrase"] in priv:
                mean, sd = rule["mean"], rule.get("sd", default_sd)
                break
    if mean is None and "endowments" in params:
        mine = _endowment_of(obs.public_bio)
        others = [_endowment_of(bio) for name, bio in obs.others if name != pgg.MODERATOR]
        setting = "varied" if any(o != mine for o in others) else "equal"
        rule = params["endowments"].get(setting, {}).get(str(mine // 100)) if mine is not None else None
        if rule is not None:
            mean, sd = rule["mean"], rule.get("sd", default_sd)
    if mean is None:
        transparent = pgg.MODERATION_ROOM not in obs.location_names
        rule = params.get("transparent" if transparent else "private")
        if rule is not None:
            mean, sd = rule["mean"], rule.get("sd", default_sd)
    if mean is None:
        rule = params.get("default", {"mean": 0.5})
        mean, sd = rule["mean"], rule.get("sd", default_sd)
    return min(1.0, max(0.0, rng.gauss(mean, sd)))


def contribution_line(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    endowment = _endowment_of(obs.public_bio) or 0
    frac = contribution_fraction(obs, rng, params)
    amount = min(round(frac * endowment / 100), endowment // 100)
    return f"I will contribute ${amount} to the public pool."


def _pgg_player(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    if obs.owner in params.get("absent", []):
        return "WAIT"
    transparent = pgg.MODERATION_ROOM not in obs.location_names
    pred = pgg.directive_predecessor(obs.directives)
    said = _said_anything(obs)
    if transparent:
        pred_done = pred is None or any(e.actor == pred and e.kind is EventKind.SPEAK for e in obs.events)
        if not said and pred_done:
            return "SAY: " + contribution_line(obs, rng, params)
        return "CONTINUE"
    if said:
        return f"MOVE: {pgg.GAME_ROOM}" if obs.location == pgg.MODERATION_ROOM else "WAIT"
    if obs.location == pgg.MODERATION_ROOM:
        return "SAY: " + contribution_line(obs, rng, params)
    back = arrival_description(pred, pgg.GAME_ROOM) if pred else None
    if pred is None or any(e.kind is EventKind.SYSTEM and e.description == back for e in obs.events):
        return f"MOVE: {pgg.MODERATION_ROOM}"
    return "CONTINUE"


def _pgg_moderator(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    if _said_anything(obs):
        return "WAIT"
    transparent = pgg.MODERATION_ROOM not in obs.location_names
    where = pgg.GAME_ROOM if transparent else pgg.MODERATION_ROOM
    players = [name for name, _ in obs.others]
    amounts = {}
    for name in players:
        try:
            amounts[name] = find_contribution(obs.events, where, agent=name).cents
        except (NoContributionFound, AmbiguousContribution):
            pass
    if len(amounts) < len(players):
        return "CONTINUE"
    if obs.location != pgg.GAME_ROOM:
        return f"MOVE: {pgg.GAME_ROOM}"
    endowments = [_endowment_of(bio) or 0 for _, bio in obs.others]
    contributions = [min(amounts[n], e) for n, e in zip(players, endowments)]
    m = pgg.directive_multiplier(obs.directives) or pgg.DEFAULT_MULTIPLIER
    payoffs = pgg.compute_payoffs(endowments, contributions, m)
    listing = ", ".join(f"{n} {pgg.format_money(p)}" for n, p in zip(players, payoffs))
    return f"SAY: All contributions are in. The public pool is {pgg.format_money(sum(contributions))}. Payoffs: {listing}."


def pgg_policy(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    if obs.owner == pgg.MODERATOR:
        return _pgg_moderator(obs, rng, params)
    return _pgg_player(obs, rng, params)


# -- classroom --------------------------------------------------------------------

_SCHEDULE_RE = re.compile(r"every (\d+) ticks \((\d+) total\)")
_POSTED_RE = re.compile(r"Assignment (\d+) is now posted")
CHEAT_LINE = "Can I copy your answers for assignment {k}?"


def _schedule(obs: Observation) -> tuple[int, int]:
    for d in obs.directives:
        m = _SCHEDULE_RE.search(d)
        if m:
            return int(m.group(1)), int(m.group(2))
    return scenarios.DEFAULT_CADENCE, 5


def announcement_ticks(cadence: int, total: int) -> list[int]:
    return [1 + cadence * k for k in range(total)]


def _professor(obs: Observation, params: Mapping[str, Any]) -> str:
    cadence, total = _schedule(obs)
    ticks = announcement_ticks(cadence, total)
    rooms = scenarios.OFFICE in obs.location_names
    t = obs.tick
    if t in ticks:
        if obs.location != scenarios.CLASSROOM:
            return f"MOVE: {scenarios.CLASSROOM}"
        k = ticks.index(t) + 1
        text = f"Assignment {k} is now posted and is due in {cadence} ticks."
        if k == 1:
            policy = obs.public_bio.split("instructor for the course. ", 1)[-1]
            text = f"Welcome to the course. {policy} {text}"
        if k == total:
            text += " This is the final assignment."
        return f"SAY: {text}"
    if not rooms:
        return "WAIT"
    if t + 1 in ticks and obs.location != scenarios.CLASSROOM:
        return f"MOVE: {scenarios.CLASSROOM}"
    if obs.location == scenarios.CLASSROOM:
        return f"MOVE: {scenarios.OFFICE}"
    return "WAIT"


def classroom_cell(obs: Observation) -> str:
    prof_bio = dict(obs.others).get(scenarios.PROFESSOR, "")
    late = next((p.value for p in scenarios.LatePolicy if scenarios.late_policy_text(p) in prof_bio), "LLP")
    if "especially challenging" in obs.private_bio:
        pert = "P2"
    elif "midterm" in obs.private_bio:
        pert = "P1"
    else:
        pert = "P0"
    return f"{late}-{pert}"


def days_late(obs: Observation, k: int) -> int:
    bio = obs.public_bio
    cell = classroom_cell(obs)
    if cell.startswith("HLP"):
        return 0
    d = 2 if "procrastinator" in bio else (0 if "over-achiever" in bio else 1)
    if k == 3 and "midterm" in obs.private_bio:
        d += 1
    if k == 2 and "especially challenging" in obs.private_bio:
        d += 1
    return d


def designated_cheater(obs: Observation) -> str:
    students = sorted([(obs.owner, obs.public_bio)] + [(n, b) for n, b in obs.others if n != scenarios.PROFESSOR])
    for name, bio in students:
        if "procrastinator" in bio:
            return name
    return students[0][0]


def _student(obs: Observation, params: Mapping[str, Any]) -> str:
    cadence, total = _schedule(obs)
    ticks = announcement_ticks(cadence, total)
    rooms = scenarios.WORK_ROOM in obs.location_names
    posted = [int(m.group(1)) for e in obs.events if e.actor == scenarios.PROFESSOR and (m := _POSTED_RE.search(e.description))]
    k = max(posted, default=0)
    mine = [e.description for e in obs.events if e.actor == obs.owner and e.kind is EventKind.SPEAK]
    answered = any(f"assignment {k} " in d and "days late" in d for d in mine)

    if k and not answered and obs.location == scenarios.CLASSROOM:
        return f"SAY: I will submit assignment {k} {days_late(obs, k)} days late."
    if not rooms:
        return "WAIT"
    if obs.tick + 1 in ticks and obs.location != scenarios.CLASSROOM:
        return f"MOVE: {scenarios.CLASSROOM}"
    if obs.location == scenarios.CLASSROOM and k and answered and obs.tick not in ticks:
        return f"MOVE: {scenarios.WORK_ROOM}"
    if obs.location == scenarios.WORK_ROOM and k >= 2 and obs.owner == designated_cheater(obs):
        asked = any("copy" in d for d in mine)
        others_here = [n for n in obs.present if n != scenarios.PROFESSOR]
        if not asked and others_here and scenarios.PROFESSOR not in obs.present:
            rate = float(params.get("cheat_rates", {}).get(classroom_cell(obs), 0.0))
            if cheat_draw(obs.seed, params) < rate:
                return "SAY: " + CHEAT_LINE.format(k=k)
    return "WAIT"


def run_draw(seed: int, label: str, params: Mapping[str, Any] | None = None) -> float:
    """Run-level uniform draw in [0, 1).

    When the harness supplies ``replicate`` and ``replications`` the draw is
    stratified: replicate i lands in [i/n, (i+1)/n), so a rate r yields exactly
    r*n positive runs in a cell whenever r*n is a whole number.
    """
    u = random.Random(derive_seed(seed, label)).random()
    params = params or {}
    if "replicate" in params and "replications" in params:
        n = int(params["replications"])
        return (int(params["replicate"]) % n + u) / n
    return u


def cheat_draw(seed: int, params: Mapping[str, Any] | None = None) -> float:
    """Whether the designated student proposes copying in this run."""
    return run_draw(seed, "cheat", params)


def classroom_policy(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    if obs.owner == scenarios.PROFESSOR:
        return _professor(obs, params)
    return _student(obs, params)


# -- parking lot --------------------------------------------------------------------


def default_stake_phrases() -> list[str]:
    table = data.strings()["stake"]
    return [table["FFR:stake"].removeprefix("you are "), table["HAC:stake"].removeprefix("you have ")]


def cart_draw(seed: int, params: Mapping[str, Any] | None = None) -> float:
    """Whether the shopper returns the cart in this run."""
    return run_draw(seed, "cart", params)


def cart_policy(obs: Observation, rng: random.Random, params: Mapping[str, Any]) -> str:
    if params.get("plan_only"):
        return f"PLAN: return the cart @ {scenarios.RECEPTACLE} UNTIL the cart is returned"
    if _said_anything(obs):
        return "WAIT"
    phrases = params.get("stake_phrases") or default_stake_phrases()
    stake = any(p in obs.private_bio for p in phrases)
    p_return = float(params.get("p_return_stake", 0.2) if stake else params.get("p_return", 1.0))
    if obs.location == scenarios.RECEPTACLE:
        return "SAY: I returned the cart to the receptacle and I am leaving now."
    if cart_draw(obs.seed, params) < p_return:
        return f"MOVE: {scenarios.RECEPTACLE}"
    return "SAY: I will leave the cart next to my car and drive off."


# -- registry ---------------------------------------------------------------------

POLICIES: dict[str, Policy] = {
    "wait": wait_policy,
    "continue": continue_policy,
    "constant": constant_policy,
    "pgg": pgg_policy,
    "classroom": classroom_policy,
    "cart": cart_policy,
}


def get_policy(policy_id: str) -> Policy:
    try:
        return POLICIES[policy_id]
    except KeyError:
        raise PackError(f"unknown scripted policy {policy_id!r}; known: {sorted(POLICIES)}") from None


def scripted(policy_id: str, params: Mapping[str, Any] | None = None) -> ScriptedBackend:
    return ScriptedBackend(get_policy(policy_id), params)
