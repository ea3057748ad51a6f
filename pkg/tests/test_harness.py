from __future__ import annotations

import copy
import json

import pytest

from agora import data, harness
from agora.backends import derive_seed
from agora.errors import AgoraError, BackendConfigurationError, MissingExtraction, PackError
from agora.extract import read_records
from agora.world import read_event_log


def shipped(pack_id: str) -> dict:
    return copy.deepcopy(data.load(f"packs/{pack_id}.json"))


def test_every_shipped_pack_parses():
    ids = harness.shipped_packs()
    assert len(ids) == 8
    for pid in ids:
        pack = harness.load_pack(pid)
        assert pack.pack_id == pid
        assert len(pack.seeds) == pack.replications * len(pack.cells)


def test_seed_splitting_rule():
    pack = harness.load_pack("s1e2_transparency")
    expected = [derive_seed(102, "s1e2_transparency", c.label, r) for c in pack.cells for r in range(5)]
    assert list(pack.seeds) == expected
    assert [r.seed for r in pack.requests()] == expected
    assert [r.run_id for r in pack.requests()][:2] == ["transparent-001", "transparent-002"]

    raw = shipped("s1e2_transparency")
    raw["seeds"] = list(range(10))
    assert harness.parse_pack(raw).cell_seed(1, 0) == 5


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.update(seeds=[1, 2, 3, "x", 5, 6, 7, 8, 9, 10]), r"seeds\[3\]: 'x' is not an unsigned 64-bit integer"),
        (lambda d: d.update(seeds=[1, 2, 3, -1, 5, 6, 7, 8, 9, 10]), r"seeds\[3\]"),
        (lambda d: d.update(seeds=[1, 2]), r"seeds: expected 10 entries"),
        (lambda d: d.update(master_seed=2**64), r"master_seed"),
        (lambda d: d.update(replications=0), r"replications"),
        (lambda d: d.update(scenario="chess"), r"scenario"),
        (lambda d: d["cells"][1]["spec"].update(players=[20, 20]), r"cells\[1\] \(Private\)"),
        (lambda d: d["cells"][1].update(label="transparent"), r"cells\[1\]: label 'transparent' collides"),
        (lambda d: d["comparisons"][0].update(groups=["Transparent", "Nobody"]), r"comparisons\[0\]: undefined group"),
        (lambda d: d["comparisons"].append({"groups": ["Private"], "test": "one_sample", "baseline": "Nope"}), r"comparisons\[1\]"),
        (lambda d: d.update(baselines={"Private": "Nope"}), r"baselines\['Private'\]"),
        (lambda d: d["backend"].update(colour="red"), r"backend: unknown backend keys"),
        (lambda d: d["backend"].update(policy="nope"), r"backend: unknown scripted policy"),
    ],
)
def test_pack_errors_name_the_entry(mutate, message):
    raw = shipped("s1e2_transparency")
    mutate(raw)
    with pytest.raises(PackError, match=message):
        harness.parse_pack(raw)


def test_load_pack_from_file_and_bad_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(shipped("s3_cart")))
    assert harness.load_pack(path).pack_id == "s3_cart"
    path.write_text("{not json")
    with pytest.raises(PackError, match="invalid JSON"):
        harness.load_pack(path)
    with pytest.raises(PackError, match="no pack file"):
        harness.load_pack("no_such_pack")


@pytest.fixture(scope="module")
def transparency_batch(tmp_path_factory):
    out = tmp_path_factory.mktemp("s1e2")
    return harness.replicate(harness.load_pack("s1e2_transparency"), out)


def test_transparency_batch_layout(transparency_batch):
    batch = transparency_batch
    assert not batch.failures
    assert len(harness.batch_run_dirs(batch.root)) == 10
    records = read_records(batch.root / "extraction.jsonl")
    assert len(records) == 40 and all(isinstance(r.value, int) for r in records)
    run = batch.root / "runs" / "private-003"
    for name in ("meta.json", "config.json", "events.jsonl", "transcript.jsonl", "extraction.jsonl", "ledger.json", "review.json"):
        assert (run / name).exists(), name
    assert sorted(p.name for p in (run / "agents").iterdir()) == ["Alice.jsonl", "Bob.jsonl", "Casey.jsonl", "David.jsonl", "Moderator.jsonl"]
    meta = json.loads((run / "meta.json").read_text())
    assert meta["status"] == "ok" and meta["cell"] == "Private" and meta["replicate"] == 2
    assert json.loads((batch.root / "batch.json").read_text())["n_ok"] == 10


def test_report_is_deterministic(transparency_batch, tmp_path):
    a = harness.report_batch(transparency_batch.root, out_dir=tmp_path / "a")
    harness.report_batch(transparency_batch.root, out_dir=tmp_path / "b")
    for name in ("groups.tsv", "comparisons.tsv", "report.txt", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a.row("Transparent").human == "+6% (difference only)"
    assert a.row("Transparent").n == 20 and a.row("Private").n_runs == 5
    (comp,) = a.summary.comparisons
    assert comp.result.t > 0


def test_replay_of_batch_run_is_identical(transparency_batch, tmp_path):
    result, identical = harness.replay_run(transparency_batch.root / "runs" / "transparent-001", tmp_path / "again")
    assert result.ok and identical


def test_replay_backend_from_batch_directory(transparency_batch, tmp_path):
    pack = harness.load_pack("s1e2_transparency").with_backend(harness.BackendSpec("replay", transcript=str(transparency_batch.root)))
    batch = harness.replicate(pack, tmp_path)
    assert not batch.failures
    for run in batch.run_dirs:
        assert harness.logs_identical(run, transparency_batch.root / "runs" / run.name)


def test_parallel_matches_serial(tmp_path):
    pack = harness.load_pack("s3_cart")
    one = harness.replicate(pack, tmp_path / "one", jobs=1)
    two = harness.replicate(pack, tmp_path / "two", jobs=2)
    assert [r.run_id for r in one.runs] == [r.run_id for r in two.runs]
    for a, b in zip(one.run_dirs, two.run_dirs):
        assert harness.logs_identical(a, b)
    assert (tmp_path / "one" / "extraction.jsonl").read_text() == (tmp_path / "two" / "extraction.jsonl").read_text()


def test_classroom_grid_gives_exact_cell_rates(tmp_path):
    pack = harness.load_pack("s3_classroom")
    batch = harness.replicate(pack, tmp_path)
    assert len(batch.runs) == 45 and not batch.failures
    report = harness.report_batch(tmp_path)
    rates = pack.backend.params["cheat_rates"]
    for row in report.rates:
        assert row["runs"] == 5
        assert row["positive"] == round(5 * rates.get(row["cell"], 0.0))
    assert (tmp_path / "report" / "rates.tsv").read_text().startswith("cell\truns\tpositive\tpct\n")


def test_failed_runs_are_isolated(tmp_path):
    raw = shipped("s1e2_transparency")
    raw["replications"] = 2
    raw["cells"][1]["spec"]["max_ticks"] = 12
    raw["cells"][1]["params"] = {"absent": ["Casey"]}
    batch = harness.replicate(harness.parse_pack(raw), tmp_path)
    assert [r.run_id for r in batch.failures] == ["private-001", "private-002"]
    err = json.loads((tmp_path / "runs" / "private-001" / "error.json").read_text())
    assert err["error"] == "TimeoutHalt" and err["missing"] == ["Casey", "David"]
    assert read_event_log(tmp_path / "runs" / "private-001" / "events.jsonl")  # partial log kept
    report = harness.report_batch(tmp_path)
    assert report.failures == ["private-001", "private-002"] and report.n_runs == 2
    assert "Failed runs excluded: private-001, private-002" in (tmp_path / "report" / "report.txt").read_text()


def test_report_errors(tmp_path):
    with pytest.raises(MissingExtraction):
        harness.build_report([])
    (tmp_path / "empty").mkdir()
    with pytest.raises(MissingExtraction):
        harness.build_report([tmp_path / "empty"])


def test_run_directory_is_not_clobbered(tmp_path):
    (tmp_path / "keep.txt").write_text("precious")
    req = harness.RunRequest("cart", 1, harness.BackendSpec(), spec={})
    with pytest.raises(AgoraError, match="refusing to overwrite"):
        harness.execute_run(req, tmp_path)
    assert (tmp_path / "keep.txt").read_text() == "precious"


def test_http_batch_fails_before_any_run(tmp_path, monkeypatch):
    monkeypatch.delenv("AGORA_API_KEY", raising=False)
    pack = harness.load_pack("s3_cart").with_backend(harness.BackendSpec("http"))
    with pytest.raises(BackendConfigurationError):
        harness.replicate(pack, tmp_path)
    assert not (tmp_path / "runs").exists()


def test_multi_round_layout(tmp_path):
    raw = shipped("s2e2_multiround")
    raw["replications"] = 1
    batch = harness.replicate(harness.parse_pack(raw), tmp_path)
    assert not batch.failures
    run = batch.run_dirs[0]
    assert [p.parent.name for p in harness.event_log_paths(run)] == ["1", "2", "3", "4", "5"]
    ledgers = json.loads((run / "ledger.json").read_text())
    for prev, nxt in zip(ledgers, ledgers[1:]):
        assert nxt["endowments"] == prev["payoffs"]
