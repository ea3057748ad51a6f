from __future__ import annotations

import pytest

from agora import errors
from agora.extract import (
    ExtractionRecord,
    cart_record,
    contribution_records,
    detect_cart_return,
    detect_cheating,
    export_review,
    extract_contribution,
    parse_amounts,
    pick_contribution,
    read_records,
    write_records,
)
from agora.world import Event, EventKind

from conftest import fixture_events, load_data

CONTRIB = load_data("contribution_corpus.json")["fixtures"]
CHEAT = load_data("cheating_corpus.json")["fixtures"]


@pytest.mark.parametrize("fx", CONTRIB, ids=[f["id"] for f in CONTRIB])
def test_contribution_corpus(fx):
    events = fixture_events(fx["events"])
    if "error" in fx:
        with pytest.raises(getattr(errors, fx["error"])):
            extract_contribution(events, fx["location"], agent=fx["agent"])
    else:
        assert extract_contribution(events, fx["location"], agent=fx["agent"]) == fx["expected_cents"]


@pytest.mark.parametrize("fx", CHEAT, ids=[f["id"] for f in CHEAT])
def test_cheating_corpus(fx):
    flag, hits = detect_cheating(fixture_events(fx["events"]))
    assert flag is fx["cheat"]
    assert bool(hits) is flag


@pytest.mark.parametrize(
    "text, cents",
    [
        ("$12", [1200]),
        ("$ 12", [1200]),
        ("$1,200", [120000]),
        ("$12.50", [1250]),
        ("12 dollars", [1200]),
        ("1 dollar", [100]),
        ("12.50 dollars", [1250]),
        ("$12.5", []),
        ("$1,20", []),
        ("50%", []),
        ("ten dollars", []),
        ("$3 and $4", [300, 400]),
    ],
)
def test_currency_grammar(text, cents):
    assert [a.cents for a in parse_amounts(text)] == cents


def test_verb_adjacency_chooses_amount():
    assert pick_contribution("I have $20 and I will contribute $8 of it.").cents == 800
    assert pick_contribution("Out of my $20, I contribute $8").cents == 800
    assert pick_contribution("I kept $15 this time. $5 is what I donate.").cents == 500
    # an amount after the verb outranks one before it
    assert pick_contribution("$5 is what I donate, out of $20.").cents == 2000
    assert pick_contribution("Nothing to say.") is None
    with pytest.raises(errors.AmbiguousContribution) as info:
        pick_contribution("Either $5 or $6, hard to say.")
    assert info.value.candidates == [500, 600]


def test_records_mark_failures_for_review(tmp_path):
    events = fixture_events(
        [
            {"actor": "Alice", "location": "Moderation Room", "text": "I contribute $10."},
            {"actor": "Bob", "location": "Moderation Room", "text": "Maybe $5, maybe $6."},
            {"actor": "Casey", "location": "Game Room", "text": "I contribute $9."},
        ]
    )
    recs = contribution_records(events, ["Alice", "Bob", "Casey"], "Moderation Room", 1, "run-a")
    assert [r.value for r in recs] == [1000, None, None]
    assert [r.needs_review for r in recs] == [False, True, True]
    assert recs[1].note == "ambiguous" and recs[1].candidates == [500, 600]
    write_records(recs, tmp_path / "x.jsonl")
    assert read_records(tmp_path / "x.jsonl") == recs

    review = export_review(recs, {"run-a": events})
    assert review["header"]["entries"] == 2
    assert [e["agent"] for e in review["entries"]] == ["Bob", "Casey"]
    assert len(review["entries"][0]["context"]) == 3  # itself plus neighbours within the log


def _move(actor, src, dst, tick=1):
    return Event(tick, 0, actor, src, EventKind.MOVE, f"{actor} moves from {src} to {dst}.", (actor,))


def test_cart_return_detection():
    assert detect_cart_return([_move("Shopper", "Parked Area", "Receptacle")], "Receptacle")
    assert not detect_cart_return([_move("Shopper", "Receptacle", "Parked Area")], "Receptacle")
    assert not detect_cart_return([_move("Helper", "Parked Area", "Receptacle")], "Receptacle")
    rec = cart_record([_move("Shopper", "Parked Area", "Receptacle", tick=2)], "Receptacle", "r1")
    assert rec == ExtractionRecord("r1", "Shopper", 1, True, (2, 0, "Shopper moves from Parked Area to Receptacle."), "movement")
    assert cart_record([], "Receptacle").value is False
