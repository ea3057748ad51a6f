"""Classroom cheating and shopping-cart return across their condition grids.

Both packs use run-level scripted choices, so each cell's rate is fixed by
the pack parameters. The point is the plumbing: the detector finds copy
requests in the logs and the cart extractor reads the shopper's movement.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from agora import harness

root = Path(tempfile.mkdtemp(prefix="agora-field-"))
for pack_id in ("s3_classroom", "s3_classroom_norooms", "s3_cart"):
    pack = harness.load_pack(pack_id)
    out = root / pack_id
    harness.replicate(pack, out)
    harness.report_batch(out)
    print((out / "report" / "report.txt").read_text())
print(f"Batches are under {root}")
