"""Post-hoc log analysis: contribution parsing, cheating triage, cart returns.

Accepted currency grammar (closed; anything else is not an amount):

* ``$12``, ``$ 12``, ``$1,200``, ``$12.50`` (cents must be exactly two digits)
* ``12 dollars``, ``12.50 dollars``, ``1 dollar``

Percentages and words ("half", "ten dollars") are deliberately not parsed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from agora import data
from agora.errors import AmbiguousContribution, NoContributionFound
from agora.world import Event, EventKind

_DOLLAR_SIGN = re.compile(r"\$\s?(\d{1,3}(?:,\d{3})+|\d+)(?:\.(\d{2}))?(?!\d|\.\d|,\d)")
_DOLLAR_WORD = re.compile(r"(?<![\d$.,])(\d+)(?:\.(\d{2}))?\s+dollars?\b", re.IGNORECASE)
_SAYS = re.compile(r'^(?P<actor>.+?) says: "(?P<text>.*)"$', re.DOTALL)
_VERB = re.compile(r"^\W*(?:contribut\w*|donat\w*)", re.IGNORECASE)
ADJACENCY = 5


@dataclass(frozen=True)
class Amount:
    cents: int
    start: int
    end: int
    text: str


def parse_amounts(text: str) -> list[Amount]:
    """All currency amounts in ``text``, in order of appearance."""
    found = []
    for rx in (_DOLLAR_SIGN, _DOLLAR_WORD):
        for m in rx.finditer(text):
            whole = int(m.group(1).replace(",", ""))
            frac = int(m.group(2)) if m.group(2) else 0
            found.append(Amount(whole * 100 + frac, m.start(), m.end(), m.group(0)))
    return sorted(found, key=lambda a: a.start)


def utterance(event: Event) -> str | None:
    m = _SAYS.match(event.description)
    return m.group("text") if m else None


def _token_index(spans: list[tuple[int, int]], pos: int) -> int:
    for i, (s, e) in enumerate(spans):
        if s <= pos < e:
            return i
    return len(spans)


def pick_contribution(text: str) -> Amount | None:
    """Choose the contribution amount in one utterance.

    Amounts within ``ADJACENCY`` tokens after a contribute-verb win, then
    amounts within that distance before one, then a lone amount. Two or more
    amounts with no verb nearby raise :class:`AmbiguousContribution`.
    """
    amounts = parse_amounts(text)
    if not amounts:
        return None
    spans = [(m.start(), m.end()) for m in re.finditer(r"\S+", text)]
    tokens = [text[s:e] for s, e in spans]
    verbs = [i for i, t in enumerate(tokens) if _VERB.match(t)]
    verbs += [i for i in range(len(tokens) - 1) if tokens[i].lower() == "put" and tokens[i + 1].lower().startswith("in")]
    after, before = [], []
    for a in amounts:
        idx = _token_index(spans, a.start)
        if any(0 < idx - v <= ADJACENCY for v in verbs):
            after.append(a)
        elif any(0 < v - idx <= ADJACENCY for v in verbs):
            before.append(a)
    if after:
        return after[0]
    if before:
        return before[0]
    if len(amounts) == 1:
        return amounts[0]
    raise AmbiguousContribution(f"{len(amounts)} amounts and no contribute-verb in {text!r}", [a.cents for a in amounts])


@dataclass(frozen=True)
class ContributionMatch:
    cents: int
    event: Event
    text: str


def find_contribution(
    agent_events: Iterable[Event],
    contribution_location: str,
    *,
    agent: str | None = None,
    window: tuple[int, int] | None = None,
) -> ContributionMatch:
    for e in agent_events:
        if e.kind is not EventKind.SPEAK or e.location != contribution_location:
            continue
        if agent is not None and e.actor != agent:
            continue
        if window is not None and not (window[0] <= e.tick <= window[1]):
            continue
        text = utterance(e)
        if text is None:
            continue
        try:
            amount = pick_contribution(text)
        except AmbiguousContribution as exc:
            exc.evidence = e
            raise
        if amount is not None:
            return ContributionMatch(amount.cents, e, amount.text)
    who = agent or "agent"
    raise NoContributionFound(f"no amount stated by {who} in the {contribution_location}")


def extract_contribution(
    agent_events: Iterable[Event],
    contribution_location: str,
    round: int = 1,
    *,
    agent: str | None = None,
    window: tuple[int, int] | None = None,
) -> int:
    """Contribution in cents stated by ``agent`` while in ``contribution_location``."""
    return find_contribution(agent_events, contribution_location, agent=agent, window=window).cents


# -- records ----------------------------------------------------------------------


@dataclass
class ExtractionRecord:
    run_id: str
    agent: str
    round: int
    value: Any
    evidence: tuple[int, int, str] | None
    method: str
    needs_review: bool = False
    note: str = ""
    candidates: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "agent": self.agent,
            "round": self.round,
            "value": self.value,
            "evidence": list(self.evidence) if self.evidence else None,
            "method": self.method,
            "needs_review": self.needs_review,
            "note": self.note,
            "candidates": self.candidates,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ExtractionRecord:
        ev = d.get("evidence")
        return cls(
            run_id=d["run_id"],
            agent=d["agent"],
            round=d["round"],
            value=d["value"],
            evidence=tuple(ev) if ev else None,
            method=d["method"],
            needs_review=d.get("needs_review", False),
            note=d.get("note", ""),
            candidates=list(d.get("candidates", [])),
        )


def contribution_records(
    events: Sequence[Event], players: Iterable[str], location: str, round: int, run_id: str = ""
) -> list[ExtractionRecord]:
    """One record per player; failures become ``needs_review`` records with no value."""
    out = []
    for name in players:
        try:
            m = find_contribution(events, location, agent=name)
        except AmbiguousContribution as exc:
            ev = exc.evidence
            out.append(
                ExtractionRecord(
                    run_id, name, round, None, (ev.tick, ev.seq, utterance(ev) or "") if ev else None,
                    "regex", True, "ambiguous", exc.candidates,
                )
            )
            continue
        except NoContributionFound as exc:
            out.append(ExtractionRecord(run_id, name, round, None, None, "regex", True, str(exc)))
            continue
        out.append(ExtractionRecord(run_id, name, round, m.cents, (m.event.tick, m.event.seq, m.text), "regex"))
    return out


def write_records(records: Iterable[ExtractionRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n")


def read_records(path) -> list[ExtractionRecord]:
    with open(path, encoding="utf-8") as fh:
        return [ExtractionRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


# -- classroom ------------------------------------------------------------------


def default_cheat_patterns() -> list[str]:
    return list(data.load("cheat_patterns.json")["patterns"])


@dataclass(frozen=True)
class Evidence:
    tick: int
    seq: int
    actor: str
    location: str
    text: str


def detect_cheating(
    event_log: Iterable[Event],
    patterns: Sequence[str] | None = None,
    *,
    exclude: Iterable[str] = ("Professor",),
) -> tuple[bool, list[Evidence]]:
    """Flag copy-request utterances by students, anywhere in the log."""
    compiled = [re.compile(p, re.IGNORECASE) for p in (patterns if patterns is not None else default_cheat_patterns())]
    skip = set(exclude)
    hits = []
    for e in event_log:
        if e.kind is not EventKind.SPEAK or e.actor in skip:
            continue
        text = utterance(e) or ""
        for rx in compiled:
            m = rx.search(text)
            if m:
                hits.append(Evidence(e.tick, e.seq, e.actor, e.location, m.group(0)))
                break
    return bool(hits), hits


def cheating_records(event_log: Sequence[Event], run_id: str = "", patterns=None) -> list[ExtractionRecord]:
    flag, hits = detect_cheating(event_log, patterns)
    if not flag:
        return [ExtractionRecord(run_id, "*", 1, False, None, "keyword")]
    return [ExtractionRecord(run_id, h.actor, 1, True, (h.tick, h.seq, h.text), "keyword", True) for h in hits]


# -- parking lot ----------------------------------------------------------------


def detect_cart_return(event_log: Iterable[Event], receptacle_location: str, shopper: str | None = "Shopper") -> bool:
    suffix = f" to {receptacle_location}."
    for e in event_log:
        if e.kind is not EventKind.MOVE or (shopper is not None and e.actor != shopper):
            continue
        if e.description.endswith(suffix) and e.location != receptacle_location:
            return True
    return False


def cart_record(event_log: Sequence[Event], receptacle_location: str, run_id: str = "") -> ExtractionRecord:
    returned = False
    evidence = None
    suffix = f" to {receptacle_location}."
    for e in event_log:
        if e.kind is EventKind.MOVE and e.actor == "Shopper" and e.description.endswith(suffix) and e.location != receptacle_location:
            returned = True
            evidence = (e.tick, e.seq, e.description)
            break
    return ExtractionRecord(run_id, "Shopper", 1, returned, evidence, "movement")


# -- review -----------------------------------------------------------------------

REVIEW_CONTEXT = 3


def export_review(records: Iterable[ExtractionRecord], event_logs: Mapping[str, Sequence[Event]] | None = None) -> dict[str, Any]:
    """Collect every ``needs_review`` record with +/-3 events of surrounding context."""
    entries = []
    event_logs = event_logs or {}
    for r in records:
        if not r.needs_review:
            continue
        context = []
        log = list(event_logs.get(r.run_id, []))
        if r.evidence is not None and log:
            idx = next((i for i, e in enumerate(log) if (e.tick, e.seq) == tuple(r.evidence[:2])), None)
            if idx is not None:
                lo, hi = max(0, idx - REVIEW_CONTEXT), idx + REVIEW_CONTEXT + 1
                context = [e.to_dict() for e in log[lo:hi]]
        entries.append(
            {
                "run_id": r.run_id,
                "agent": r.agent,
                "round": r.round,
                "method": r.method,
                "note": r.note,
                "candidates": r.candidates,
                "evidence": list(r.evidence) if r.evidence else None,
                "context": context,
            }
        )
    return {
        "header": {
            "title": "Extraction review",
            "instructions": "Confirm or correct each flagged value by reading its context.",
            "entries": len(entries),
        },
        "entries": entries,
    }
