from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from agora.engine import speak_description
from agora.world import Event, EventKind

DATA = Path(__file__).parent / "data"


def load_data(name: str) -> Any:
    return json.loads((DATA / name).read_text(encoding="utf-8"))


def fixture_events(spec: list[dict[str, str]]) -> list[Event]:
    """Speech events from ``[{actor, location, text}]``, one per tick."""
    return [
        Event(i + 1, 0, e["actor"], e["location"], EventKind.SPEAK, speak_description(e["actor"], e["text"]), (e["actor"],))
        for i, e in enumerate(spec)
    ]


def tiny_config(**overrides: Any) -> dict[str, Any]:
    """Two rooms, three agents; only Ann may enter the Den."""
    config = {
        "schema_version": "1",
        "seed": 11,
        "max_ticks": 10,
        "locations": [
            {"name": "Hall", "description": "A wide hall.", "allowed_agents": []},
            {"name": "Den", "description": "A small den.", "allowed_agents": ["Ann"]},
            {"name": "Yard", "description": "Outside.", "allowed_agents": []},
        ],
        "agents": [
            {
                "name": name,
                "public_bio": f"{name} lives here.",
                "private_bio": f"{name} keeps a secret.",
                "directives": ["Be polite."],
                "initial_plan": {"description": "stay put", "location": "Hall", "stop_condition": "never"},
            }
            for name in ("Ann", "Ben", "Cal")
        ],
    }
    config.update(overrides)
    return config


@pytest.fixture
def config() -> dict[str, Any]:
    return tiny_config()
