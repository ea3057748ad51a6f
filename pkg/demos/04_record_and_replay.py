"""Record a run's prompts and replies, then replay it without the policy.

The replay backend answers each prompt from the transcript, keyed by the
prompt's hash, so a faithful replay reproduces the event logs byte for byte.
The same mechanism replays transcripts recorded from a live model.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from agora import harness

root = Path(tempfile.mkdtemp(prefix="agora-replay-"))
request = harness.RunRequest(
    scenario="pgg",
    seed=2024,
    backend=harness.BackendSpec(),
    run_id="demo",
    spec={"players": [20, 50, 80], "rounds": 3, "transparency": True},
)
original = harness.execute_run(request, root / "original")
lines = (root / "original" / "transcript.jsonl").read_text().count("\n")
print(f"original run: {original.status}, {lines} recorded prompt/reply pairs")

replayed, identical = harness.replay_run(root / "original", root / "replayed")
print(f"replayed run: {replayed.status}; event logs identical: {identical}")

for path in harness.event_log_paths(root / "replayed"):
    print(f"  {path.relative_to(root)}: {path.stat().st_size} bytes")
print(f"\nRun directories are under {root}")
