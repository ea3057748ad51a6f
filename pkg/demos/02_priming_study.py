"""Run the game-name priming pack end to end and read its report.

Scripted players contribute around 70% of their endowment when told they
are playing the Teamwork Game and around 30% for the Taxation Game. The
pipeline is the same one a live model would go through: build worlds, run
them, parse contributions from the logs, then test the difference.

    python demos/02_priming_study.py [--out DIR] [--pack PACK_ID]
"""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

from agora import harness

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--out", help="batch directory (default: a temporary directory)")
parser.add_argument("--pack", default="s1e1_priming", help=f"one of {', '.join(harness.shipped_packs())}")
args = parser.parse_args()

out = Path(args.out or tempfile.mkdtemp(prefix="agora-"))
pack = harness.load_pack(args.pack)
print(f"{pack.pack_id}: {len(pack.cells)} cells x {pack.replications} runs -> {out}")
batch = harness.replicate(pack, out)
print(f"{len(batch.runs) - len(batch.failures)} of {len(batch.runs)} runs finished\n")

report = harness.report_batch(out)
print((out / "report" / "report.txt").read_text())
print("Files:", ", ".join(p.name for p in report.files))

first = batch.run_dirs[0]
print(f"\nWhat the moderator heard in {first.name}:")
for event in harness.read_events(first):
    if event.kind.value == "speak" and event.location == "Moderation Room":
        print(f"  t{event.tick}: {event.description}")
