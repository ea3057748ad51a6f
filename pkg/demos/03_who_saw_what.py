"""Witnessing and privacy in a small classroom.

Each event records who was in the room when it happened, and an agent's
prompt is built only from events it witnessed plus public biographies. A
student asking to copy answers in the Work Room is invisible to the
Professor, who is not allowed in there.
"""

from __future__ import annotations

from agora import engine, policies, scenarios
from agora.backends import RecordingBackend
from agora.extract import detect_cheating
from agora.world import load_world

spec = scenarios.ClassroomSpec("HLP", "P2")
config = scenarios.build_classroom(spec, seed=8)
world = load_world(config)
backend = RecordingBackend(policies.scripted("classroom", {"cheat_rates": {spec.cell: 1.0}}))
outcome = engine.run(world, backend, halt_predicate=scenarios.classroom_done)
print(f"{spec.cell}: halted after {outcome.ticks} ticks with {len(outcome.events)} events")

flag, hits = detect_cheating(outcome.events)
for hit in hits:
    event = next(e for e in outcome.events if (e.tick, e.seq) == (hit.tick, hit.seq))
    print(f"\nFlagged for review at tick {hit.tick} in the {hit.location}: {event.description}")
    print(f"  witnesses: {', '.join(event.witnesses)}")

print("\nEvents each agent witnessed:")
for name in world.agent_names:
    seen = [e for e in outcome.events if name in e.witnesses]
    print(f"  {name:<10}{len(seen):>4}")

bob = next(b for b in reversed(backend.bundles) if b.owner == "Bob")
print("\nThe start of Bob's last prompt (his private biography is his alone):\n")
print("\n".join(bob.text.splitlines()[:8]))
