"""Experiment orchestration: run directories, experiment packs, batches and reports.

A *run directory* holds everything needed to replay one simulation::

    meta.json          run id, scenario, spec, seed, backend, status
    config.json        world config snapshot (single-world runs)
    rounds/<r>/        config.json + event logs per round (multi-round games)
    events.jsonl       global event log, one JSON object per line
    agents/<name>.jsonl   events witnessed by each agent
    transcript.jsonl   every prompt digest, prompt and reply, in call order
    extraction.jsonl   extraction records
    ledger.json        per-round payoff ledgers (public goods games)
    review.json        extraction records flagged for human review
    error.json         only when the run failed

A batch directory (``replicate``) holds ``pack.json``, ``batch.json``, the
concatenated ``extraction.jsonl`` and one run directory per
``runs/<run_id>/``. Reports go to ``report/`` inside it.

Seed splitting: run ``r`` (0-based) of cell ``c`` gets
``derive_seed(master_seed, pack_id, cell_label, r)`` unless the pack lists
explicit ``seeds`` (cell-major order).
"""

from __future__ import annotations

import json
import re
import shutil
import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from agora import data, engine, pgg, scenarios
from agora.backends import (
    HttpChatBackend,
    RecordingBackend,
    ReplayBackend,
    SamplingParams,
    derive_seed,
)
from agora.cognition import CognitionBackend
from agora.errors import (
    AgoraError,
    BackendError,
    MissingExtraction,
    PackError,
    SpecError,
    TimeoutHalt,
)
from agora.extract import (
    ExtractionRecord,
    cart_record,
    cheating_records,
    export_review,
    read_records,
    write_records,
)
from agora.policies import get_policy, scripted
from agora.stats import (
    Comparison,
    Sample,
    Summary,
    load_baselines,
    summarize_experiment,
)
from agora.world import Event, load_world, read_event_log, write_event_logs

SCENARIO_KINDS = ("pgg", "classroom", "cart")
BACKEND_KINDS = ("scripted", "http", "replay")
DEFAULT_POLICY = {"pgg": "pgg", "classroom": "classroom", "cart": "cart", "world": "wait"}
UINT64 = 2**64


def _dump(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=False) + "\n", encoding="utf-8")


def _read(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def slug(label: str) -> str:
    s = re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")
    return s or "cell"


# -- backends ---------------------------------------------------------------------


@dataclass(frozen=True)
class BackendSpec:
    """Which cognition backend a run uses, in serializable form."""

    kind: str = "scripted"
    policy: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    # replay: a transcript file, a run directory, or a batch directory
    transcript: str | None = None
    model: str | None = None
    base_url: str | None = None
    temperature: float = 1.0
    max_tokens: int = 256

    def validate(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise PackError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "scripted" and self.policy is not None:
            get_policy(self.policy)
        if self.kind == "replay" and not self.transcript:
            raise PackError("replay backend needs a transcript")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> BackendSpec:
        if isinstance(d, str):
            d = {"kind": d}
        known = {"kind", "policy", "params", "transcript", "model", "base_url", "temperature", "max_tokens"}
        extra = set(d) - known
        if extra:
            raise PackError(f"unknown backend keys: {sorted(extra)}")
        spec = cls(
            kind=d.get("kind", "scripted"),
            policy=d.get("policy"),
            params=dict(d.get("params") or {}),
            transcript=d.get("transcript"),
            model=d.get("model"),
            base_url=d.get("base_url"),
            temperature=float(d.get("temperature", 1.0)),
            max_tokens=int(d.get("max_tokens", 256)),
        )
        spec.validate()
        return spec

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "scripted":
            d["policy"] = self.policy
            d["params"] = dict(self.params)
        elif self.kind == "replay":
            d["transcript"] = self.transcript
        else:
            d.update(model=self.model, base_url=self.base_url, temperature=self.temperature, max_tokens=self.max_tokens)
        return d

    def transcript_path(self, run_id: str = "") -> Path:
        p = Path(self.transcript or "")
        if p.is_dir():
            if (p / "transcript.jsonl").exists():
                return p / "transcript.jsonl"
            return p / "runs" / run_id / "transcript.jsonl"
        return p

    def build(self, scenario: str, *, run_id: str = "", extra_params: Mapping[str, Any] | None = None) -> CognitionBackend:
        if self.kind == "scripted":
            params = {**self.params, **(extra_params or {})}
            return scripted(self.policy or DEFAULT_POLICY.get(scenario, "wait"), params)
        if self.kind == "replay":
            return ReplayBackend.from_file(self.transcript_path(run_id))
        if self.kind == "http":
            return HttpChatBackend(
                base_url=self.base_url,
                model=self.model,
                sampling=SamplingParams(self.temperature, self.max_tokens),
            )
        raise PackError(f"unknown backend kind {self.kind!r}")


# -- single runs ------------------------------------------------------------------


@dataclass(frozen=True)
class RunRequest:
    """One simulation to execute.

    Either ``spec`` (a scenario spec dict, built fresh from ``seed``) or
    ``config`` (a ready world config whose seed is replaced by ``seed``) is set.
    """

    scenario: str
    seed: int
    backend: BackendSpec
    run_id: str = "run"
    spec: Mapping[str, Any] | None = None
    config: Mapping[str, Any] | None = None
    cell: str = ""
    replicate: int = 0
    replications: int = 1
    pack_id: str = ""

    def to_meta(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "pack_id": self.pack_id,
            "cell": self.cell,
            "replicate": self.replicate,
            "replications": self.replications,
            "scenario": self.scenario,
            "seed": self.seed,
            "spec": dict(self.spec) if self.spec is not None else None,
            "backend": self.backend.to_dict(),
        }

    @classmethod
    def from_meta(cls, meta: Mapping[str, Any], run_dir: Path) -> RunRequest:
        config = None if meta.get("spec") is not None else _read(run_dir / "config.json")
        return cls(
            scenario=meta["scenario"],
            seed=meta["seed"],
            backend=BackendSpec.from_dict(meta["backend"]),
            run_id=meta["run_id"],
            spec=meta.get("spec"),
            config=config,
            cell=meta.get("cell", ""),
            replicate=meta.get("replicate", 0),
            replications=meta.get("replications", 1),
            pack_id=meta.get("pack_id", ""),
        )


@dataclass
class RunResult:
    run_id: str
    path: Path
    status: str
    cell: str = ""
    replicate: int = 0
    seed: int = 0
    halted: bool | None = None
    n_records: int = 0
    error: dict[str, Any] | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "path": str(self.path),
            "status": self.status,
            "cell": self.cell,
            "replicate": self.replicate,
            "seed": self.seed,
            "halted": self.halted,
            "records": self.n_records,
            "error": self.error,
        }


def error_record(exc: BaseException, run_id: str = "") -> dict[str, Any]:
    rec: dict[str, Any] = {"error": type(exc).__name__, "message": str(exc), "run_id": run_id}
    for attr in ("agent", "tick", "missing"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    if not isinstance(exc, AgoraError):
        rec["traceback"] = traceback.format_exception(type(exc), exc, exc.__traceback__)
    return rec


def _prepare_dir(path: Path) -> None:
    """Create an empty run directory; only a previous run directory may be replaced."""
    if path.exists():
        if not (path / "meta.json").exists() and any(path.iterdir()):
            raise AgoraError(f"refusing to overwrite {path}: not a run directory")
        shutil.rmtree(path)
    path.mkdir(parents=True)


def _write_world(directory: Path, config: Mapping[str, Any], events: Sequence[Event]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    _dump(config, directory / "config.json")
    names = [a["name"] for a in config["agents"]]
    write_event_logs(list(events), names, directory)


def _halt_predicate(kind: str):
    return {
        "classroom": scenarios.classroom_done,
        "cart": scenarios.shopper_done,
        "pgg": pgg.payoffs_announced,
    }.get(kind)


def build_config(scenario: str, spec: Mapping[str, Any], seed: int) -> dict[str, Any]:
    if scenario == "classroom":
        return scenarios.build_classroom(scenarios.ClassroomSpec.from_dict(spec), seed=seed)
    if scenario == "cart":
        return scenarios.build_cart(scenarios.CartSpec.from_dict(spec), seed=seed)
    if scenario == "pgg":
        return pgg.build_pgg_world(pgg.GameSpec.from_dict(spec), seed=pgg.round_seed(seed, 1))
    raise SpecError(f"unknown scenario kind {scenario!r}")


def scenario_of(config: Mapping[str, Any]) -> str:
    return (config.get("scenario") or {}).get("kind", "world")


def _extract(kind: str, events: Sequence[Event], config: Mapping[str, Any], run_id: str) -> list[ExtractionRecord]:
    if kind == "classroom":
        return cheating_records(events, run_id)
    if kind == "cart":
        return [cart_record(events, scenarios.RECEPTACLE, run_id)]
    return []


def execute_run(request: RunRequest, out_dir: str | Path) -> RunResult:
    """Run one simulation into ``out_dir``; failures are recorded, never raised."""
    out = Path(out_dir)
    result = RunResult(request.run_id, out, "error", request.cell, request.replicate, request.seed)
    _prepare_dir(out)
    meta = request.to_meta()
    recorder: RecordingBackend | None = None
    events: list[Event] = []
    config: dict[str, Any] | None = None
    try:
        extra = {"replicate": request.replicate, "replications": request.replications} if request.pack_id else None
        recorder = RecordingBackend(request.backend.build(request.scenario, run_id=request.run_id, extra_params=extra))
        records: list[ExtractionRecord] = []
        event_logs: dict[str, list[Event]] = {}

        if request.scenario == "pgg" and request.spec is not None:
            spec = pgg.GameSpec.from_dict(request.spec)
            try:
                game = pgg.run_game(spec, recorder, request.seed, run_id=request.run_id)
            except TimeoutHalt as exc:
                done = getattr(exc, "completed", None)
                rounds = list(done.rounds) if done else []
                _write_rounds(out, spec, rounds, getattr(exc, "events", []), request.seed)
                raise
            _write_rounds(out, spec, game.rounds, None, request.seed)
            for rr in game.rounds:
                records.extend(rr.records)
                event_logs.setdefault(request.run_id, []).extend(rr.events)
            _dump([l.to_dict() for l in game.ledgers], out / "ledger.json")
            result.halted = True
        else:
            if request.config is not None:
                config = dict(request.config)
                config["seed"] = int(request.seed)
            else:
                config = build_config(request.scenario, request.spec or {}, request.seed)
            kind = scenario_of(config)
            world = load_world(config)
            events = world.event_log
            if kind == "pgg":
                rr = pgg.play_round(config, recorder, None, request.run_id)
                events = rr.events
                records = rr.records
                _dump([rr.ledger.to_dict()], out / "ledger.json")
                result.halted = True
            else:
                outcome = engine.run(world, recorder, None, _halt_predicate(kind))
                result.halted = outcome.halted
                records = _extract(kind, events, config, request.run_id)
            _write_world(out, config, events)
            event_logs[request.run_id] = list(events)

        write_records(records, out / "extraction.jsonl")
        _dump(export_review(records, event_logs), out / "review.json")
        result.n_records = len(records)
        result.status = "ok"
    except Exception as exc:  # isolate every failure to this run directory
        if isinstance(exc, TimeoutHalt) and config is not None and not (out / "events.jsonl").exists():
            _write_world(out, config, getattr(exc, "events", events))
        elif isinstance(exc, BackendError) and config is not None and not (out / "events.jsonl").exists():
            _write_world(out, config, events)
        result.error = error_record(exc, request.run_id)
        _dump(result.error, out / "error.json")
    finally:
        if recorder is not None:
            recorder.save(out / "transcript.jsonl")
    meta.update(status=result.status, halted=result.halted, records=result.n_records)
    _dump(meta, out / "meta.json")
    return result


def _write_rounds(out: Path, spec: pgg.GameSpec, rounds: Sequence[pgg.RoundRun], partial: Sequence[Event] | None, seed: int) -> None:
    if spec.rounds == 1:
        if rounds:
            _write_world(out, rounds[0].config, rounds[0].events)
        elif partial is not None:
            _write_world(out, pgg.build_pgg_world(spec, seed=pgg.round_seed(seed, 1)), partial)
        return
    for rr in rounds:
        _write_world(out / "rounds" / str(rr.ledger.round), rr.config, rr.events)
    if partial is not None:
        r = len(rounds) + 1
        endowments = pgg.carry_endowments(rounds[-1].ledger) if rounds else None
        config = pgg.build_pgg_world(spec, round=r, endowments=endowments, seed=pgg.round_seed(seed, r))
        _write_world(out / "rounds" / str(r), config, partial)


def event_log_paths(run_dir: str | Path) -> list[Path]:
    """Every events.jsonl in a run directory, in round order."""
    run_dir = Path(run_dir)
    if (run_dir / "events.jsonl").exists():
        return [run_dir / "events.jsonl"]
    rounds = run_dir / "rounds"
    if rounds.is_dir():
        return [rounds / r / "events.jsonl" for r in sorted((p.name for p in rounds.iterdir()), key=int)]
    return []


def replay_run(run_dir: str | Path, out_dir: str | Path) -> tuple[RunResult, bool]:
    """Re-execute a recorded run from its transcript; report whether every log matches."""
    run_dir, out_dir = Path(run_dir), Path(out_dir)
    meta = _read(run_dir / "meta.json")
    original = RunRequest.from_meta(meta, run_dir)
    request = RunRequest(
        scenario=original.scenario,
        seed=original.seed,
        backend=BackendSpec(kind="replay", transcript=str(run_dir / "transcript.jsonl")),
        run_id=original.run_id,
        spec=original.spec,
        config=original.config,
        cell=original.cell,
        replicate=original.replicate,
        replications=original.replications,
        pack_id="",
    )
    result = execute_run(request, out_dir)
    return result, logs_identical(run_dir, out_dir)


def logs_identical(a: str | Path, b: str | Path) -> bool:
    a, b = Path(a), Path(b)
    pa, pb = event_log_paths(a), event_log_paths(b)
    if not pa or [p.relative_to(a) for p in pa] != [p.relative_to(b) for p in pb]:
        return False
    for x, y in zip(pa, pb):
        if x.read_bytes() != y.read_bytes():
            return False
        ax, ay = x.parent / "agents", y.parent / "agents"
        names = sorted(p.name for p in ax.iterdir())
        if names != sorted(p.name for p in ay.iterdir()):
            return False
        if any((ax / n).read_bytes() != (ay / n).read_bytes() for n in names):
            return False
    return True


# -- experiment packs -------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    label: str
    spec: Mapping[str, Any]
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentPack:
    pack_id: str
    scenario: str
    cells: tuple[Cell, ...]
    replications: int
    seeds: tuple[int, ...]
    backend: BackendSpec
    comparisons: tuple[Comparison, ...] = ()
    baselines: Mapping[str, str] = field(default_factory=dict)
    master_seed: int | None = None
    description: str = ""

    def cell_seed(self, cell_index: int, replicate: int) -> int:
        return self.seeds[cell_index * self.replications + replicate]

    def run_id(self, cell: Cell, replicate: int) -> str:
        return f"{slug(cell.label)}-{replicate + 1:03d}"

    def requests(self) -> list[RunRequest]:
        out = []
        for ci, cell in enumerate(self.cells):
            backend = self.backend
            if cell.params and backend.kind == "scripted":
                backend = BackendSpec(**{**backend.__dict__, "params": {**backend.params, **cell.params}})
            for r in range(self.replications):
                out.append(
                    RunRequest(
                        scenario=self.scenario,
                        seed=self.cell_seed(ci, r),
                        backend=backend,
                        run_id=self.run_id(cell, r),
                        spec=cell.spec,
                        cell=cell.label,
                        replicate=r,
                        replications=self.replications,
                        pack_id=self.pack_id,
                    )
                )
        return out

    def groups(self) -> list[str]:
        """Group labels a report can produce for this pack, in display order."""
        if self.scenario != "pgg":
            return [c.label for c in self.cells]
        labels: list[str] = []
        for cell in self.cells:
            spec = pgg.GameSpec.from_dict(cell.spec)
            base = []
            for p in spec.players:
                g = p.group or cell.label
                if g not in base:
                    base.append(g)
            for g in base:
                names = [g] if spec.rounds == 1 else [f"{g}@{r}" for r in range(1, spec.rounds + 1)]
                labels.extend(n for n in names if n not in labels)
        return labels

    def with_backend(self, backend: BackendSpec) -> ExperimentPack:
        return ExperimentPack(**{**self.__dict__, "backend": backend})

    def to_dict(self) -> dict[str, Any]:
        return {
            "pack_id": self.pack_id,
            "description": self.description,
            "scenario": self.scenario,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "seeds": list(self.seeds),
            "backend": self.backend.to_dict(),
            "cells": [{"label": c.label, "spec": dict(c.spec), **({"params": dict(c.params)} if c.params else {})} for c in self.cells],
            "comparisons": [
                {"groups": list(c.groups), "test": c.test, "tail": c.tail.value, **({"baseline": c.baseline} if c.baseline else {})}
                for c in self.comparisons
            ],
            "baselines": dict(self.baselines),
        }


def _check_spec(scenario: str, spec: Mapping[str, Any]) -> None:
    if scenario == "pgg":
        pgg.GameSpec.from_dict(spec)
    elif scenario == "classroom":
        scenarios.ClassroomSpec.from_dict(spec)
    else:
        scenarios.CartSpec.from_dict(spec)


def parse_pack(d: Mapping[str, Any]) -> ExperimentPack:
    """Validate a pack dict; every problem raises :class:`PackError` naming the entry."""
    if not isinstance(d, Mapping):
        raise PackError("pack must be a JSON object")
    pack_id = d.get("pack_id")
    if not isinstance(pack_id, str) or not pack_id:
        raise PackError("pack_id: must be a non-empty string")
    scenario = d.get("scenario")
    if scenario not in SCENARIO_KINDS:
        raise PackError(f"scenario: must be one of {SCENARIO_KINDS}, got {scenario!r}")
    reps = d.get("replications")
    if not isinstance(reps, int) or isinstance(reps, bool) or reps < 1:
        raise PackError(f"replications: must be a positive integer, got {reps!r}")

    raw_cells = d.get("cells")
    if not isinstance(raw_cells, list) or not raw_cells:
        raise PackError("cells: must be a non-empty list")
    cells, slugs = [], set()
    for i, c in enumerate(raw_cells):
        if not isinstance(c, Mapping) or not isinstance(c.get("label"), str) or not isinstance(c.get("spec"), Mapping):
            raise PackError(f"cells[{i}]: needs a string 'label' and an object 'spec'")
        if slug(c["label"]) in slugs:
            raise PackError(f"cells[{i}]: label {c['label']!r} collides with an earlier cell")
        slugs.add(slug(c["label"]))
        try:
            _check_spec(scenario, c["spec"])
        except (SpecError, KeyError, TypeError, ValueError) as exc:
            raise PackError(f"cells[{i}] ({c['label']}): {exc}") from exc
        cells.append(Cell(c["label"], dict(c["spec"]), dict(c.get("params") or {})))

    n_runs = reps * len(cells)
    master = d.get("master_seed")
    if "seeds" in d and d["seeds"] is not None:
        raw = d["seeds"]
        if not isinstance(raw, list):
            raise PackError("seeds: must be a list")
        if len(raw) != n_runs:
            raise PackError(f"seeds: expected {n_runs} entries (replications x cells), got {len(raw)}")
        for i, s in enumerate(raw):
            if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < UINT64:
                raise PackError(f"seeds[{i}]: {s!r} is not an unsigned 64-bit integer")
        seeds = tuple(raw)
    else:
        if not isinstance(master, int) or isinstance(master, bool) or not 0 <= master < UINT64:
            raise PackError(f"master_seed: {master!r} is not an unsigned 64-bit integer (or give 'seeds')")
        seeds = tuple(derive_seed(master, pack_id, c.label, r) for c in cells for r in range(reps))

    try:
        backend = BackendSpec.from_dict(d.get("backend") or {"kind": "scripted"})
    except AgoraError as exc:
        raise PackError(f"backend: {exc}") from exc

    baselines = dict(d.get("baselines") or {})
    known_baselines = load_baselines()
    for group, treatment in baselines.items():
        if treatment not in known_baselines:
            raise PackError(f"baselines[{group!r}]: unknown treatment {treatment!r}")

    pack = ExperimentPack(
        pack_id=pack_id,
        scenario=scenario,
        cells=tuple(cells),
        replications=reps,
        seeds=seeds,
        backend=backend,
        baselines=baselines,
        master_seed=master,
        description=d.get("description", ""),
    )
    groups = set(pack.groups())
    comparisons = []
    for i, c in enumerate(d.get("comparisons") or []):
        try:
            comp = Comparison.from_dict(c)
        except (KeyError, ValueError, TypeError) as exc:
            raise PackError(f"comparisons[{i}]: {exc}") from exc
        want = 1 if comp.test == "one_sample" else 2
        if comp.test not in ("welch", "one_sample") or len(comp.groups) != want:
            raise PackError(f"comparisons[{i}]: test {comp.test!r} needs {want} group(s)")
        missing = [g for g in comp.groups if g not in groups]
        if missing:
            raise PackError(f"comparisons[{i}]: undefined group(s) {missing}")
        if comp.test == "one_sample" and comp.baseline not in known_baselines:
            raise PackError(f"comparisons[{i}]: one-sample test needs a known baseline, got {comp.baseline!r}")
        comparisons.append(comp)
    return ExperimentPack(**{**pack.__dict__, "comparisons": tuple(comparisons)})


def shipped_packs() -> list[str]:
    from importlib import resources

    return sorted(p.name[:-5] for p in resources.files("agora.data").joinpath("packs").iterdir() if p.name.endswith(".json"))


def load_pack(ref: str | Path | Mapping[str, Any]) -> ExperimentPack:
    """Load a pack from a dict, a JSON file path, or the id of a shipped pack."""
    if isinstance(ref, Mapping):
        return parse_pack(ref)
    path = Path(ref)
    if path.exists():
        try:
            raw = _read(path)
        except json.JSONDecodeError as exc:
            raise PackError(f"{path}: invalid JSON ({exc})") from exc
        return parse_pack(raw)
    if str(ref) in shipped_packs():
        return parse_pack(data.load(f"packs/{ref}.json"))
    raise PackError(f"no pack file or shipped pack named {str(ref)!r}")


# -- batches ----------------------------------------------------------------------


@dataclass
class BatchResult:
    pack: ExperimentPack
    root: Path
    runs: list[RunResult]

    @property
    def failures(self) -> list[RunResult]:
        return [r for r in self.runs if not r.ok]

    @property
    def run_dirs(self) -> list[Path]:
        return [r.path for r in self.runs]

    def to_dict(self) -> dict[str, Any]:
        return {
            "pack_id": self.pack.pack_id,
            "runs": [r.to_dict() for r in self.runs],
            "n_runs": len(self.runs),
            "n_ok": len(self.runs) - len(self.failures),
            "failures": [{"run_id": r.run_id, **(r.error or {})} for r in self.failures],
            "records": sum(r.n_records for r in self.runs),
        }


def _execute(args: tuple[RunRequest, str]) -> RunResult:
    return execute_run(*args)


def replicate(pack: ExperimentPack, out_dir: str | Path, *, jobs: int = 1) -> BatchResult:
    """Run every (cell, replication) of ``pack``; a failing run never stops the batch."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    if pack.backend.kind == "http":
        pack.backend.build(pack.scenario)  # fail on missing credentials before any run
    _dump(pack.to_dict(), root / "pack.json")
    requests = pack.requests()
    tasks = [(req, str(root / "runs" / req.run_id)) for req in requests]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    batch = BatchResult(pack, root, results)
    _dump(batch.to_dict(), root / "batch.json")
    all_records: list[ExtractionRecord] = []
    for r in results:
        if r.ok:
            all_records.extend(read_records(r.path / "extraction.jsonl"))
    write_records(all_records, root / "extraction.jsonl")
    return batch


# -- reports ----------------------------------------------------------------------


@dataclass
class RunData:
    meta: dict[str, Any]
    records: list[ExtractionRecord]
    ledgers: list[pgg.RoundLedger]
    path: Path


def read_run(run_dir: str | Path) -> RunData:
    run_dir = Path(run_dir)
    meta_path = run_dir / "meta.json"
    if not meta_path.exists():
        raise MissingExtraction(f"{run_dir} is not a run directory (no meta.json)")
    meta = _read(meta_path)
    ext = run_dir / "extraction.jsonl"
    if not ext.exists():
        raise MissingExtraction(f"run {meta.get('run_id')}: no extraction records")
    ledgers = []
    if (run_dir / "ledger.json").exists():
        ledgers = [pgg.RoundLedger.from_dict(d) for d in _read(run_dir / "ledger.json")]
    return RunData(meta, read_records(ext), ledgers, run_dir)


@dataclass
class Report:
    scenario: str
    summary: Summary | None = None
    rates: list[dict[str, Any]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    n_runs: int = 0
    files: list[Path] = field(default_factory=list)

    def row(self, label: str):
        if self.summary is not None:
            for r in self.summary.rows:
                if r.label == label:
                    return r
        for r in self.rates:
            if r["cell"] == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"scenario": self.scenario, "n_runs": self.n_runs, "failures": self.failures}
        if self.summary is not None:
            d["groups"] = [
                {
                    "label": r.label,
                    "n": r.n,
                    "mean": r.mean,
                    "sd": r.sd,
                    "run_mean": r.run_mean,
                    "n_runs": r.n_runs,
                    "human": r.human,
                }
                for r in self.summary.rows
            ]
            d["comparisons"] = [
                {
                    "groups": list(c.comparison.groups),
                    "test": c.comparison.test,
                    "tail": c.comparison.tail.value,
                    "baseline": c.comparison.baseline,
                    **(c.result.to_dict() if c.result else {}),
                    "error": c.error,
                }
                for c in self.summary.comparisons
            ]
        if self.rates:
            d["rates"] = self.rates
        return d


def _pgg_groups(runs: Sequence[RunData]) -> tuple[dict[str, list[float]], dict[str, list[float]]]:
    per_agent: dict[str, list[float]] = defaultdict(list)
    per_run: dict[str, list[float]] = defaultdict(list)
    for run in runs:
        spec = pgg.GameSpec.from_dict(run.meta["spec"]) if run.meta.get("spec") else None
        group_of = {p.name: p.group for p in spec.players} if spec else {}
        multi = spec is not None and spec.rounds > 1
        ledgers = {l.round: l for l in run.ledgers}
        run_vals: dict[str, list[float]] = defaultdict(list)
        for rec in run.records:
            if rec.value is None:
                raise MissingExtraction(f"run {run.meta['run_id']}: no value for {rec.agent} in round {rec.round}")
            ledger = ledgers[rec.round]
            e = ledger.endowments[ledger.players.index(rec.agent)]
            base = group_of.get(rec.agent) or run.meta.get("cell") or "all"
            label = f"{base}@{rec.round}" if multi else base
            frac = rec.value / e if e else 0.0
            per_agent[label].append(frac)
            run_vals[label].append(frac)
        for label, vals in run_vals.items():
            per_run[label].append(sum(vals) / len(vals))
    return per_agent, per_run


def build_report(run_dirs: Iterable[str | Path], pack: ExperimentPack | None = None) -> Report:
    """Aggregate extraction records into the result tables. Deterministic in its inputs."""
    dirs = sorted({Path(p) for p in run_dirs})
    if not dirs:
        raise MissingExtraction("no run directories to report on")
    runs, failures = [], []
    for d in dirs:
        meta_path = d / "meta.json"
        if meta_path.exists() and _read(meta_path).get("status") != "ok":
            failures.append(_read(meta_path)["run_id"])
            continue
        runs.append(read_run(d))
    if not runs:
        raise MissingExtraction(f"no successful runs among {len(dirs)} run directories")
    cell_order = {c.label: i for i, c in enumerate(pack.cells)} if pack else {}
    runs.sort(key=lambda r: (cell_order.get(r.meta.get("cell"), len(cell_order)), r.meta.get("cell", ""), r.meta.get("replicate", 0), r.meta["run_id"]))
    kinds = {r.meta["scenario"] for r in runs}
    if len(kinds) != 1:
        raise MissingExtraction(f"cannot report on mixed scenarios {sorted(kinds)}")
    kind = kinds.pop()
    report = Report(kind, failures=failures, n_runs=len(runs))

    if kind == "pgg":
        per_agent, per_run = _pgg_groups(runs)
        order = pack.groups() if pack else []
        labels = [g for g in order if g in per_agent] + sorted(g for g in per_agent if g not in order)
        groups = {g: Sample(per_agent[g], g) for g in labels}
        run_means = {g: Sample(per_run[g], g) for g in labels}
        table = load_baselines()
        baselines = {g: table[g] for g in labels if g in table}
        if pack:
            baselines.update({g: table[t] for g, t in pack.baselines.items() if g in groups})
        # one-sample comparisons look their baseline up by treatment name
        lookup = {**table, **baselines}
        report.summary = summarize_experiment(groups, lookup, pack.comparisons if pack else (), run_means)
        for r in report.summary.rows:
            r.human = baselines[r.label].render() if r.label in baselines else ""
        return report

    by_cell: dict[str, list[bool]] = defaultdict(list)
    for run in runs:
        if not run.records:
            raise MissingExtraction(f"run {run.meta['run_id']}: no extraction records")
        by_cell[run.meta.get("cell") or run.meta["run_id"]].append(any(bool(r.value) for r in run.records))
    cells = [c.label for c in pack.cells if c.label in by_cell] if pack else []
    cells += sorted(c for c in by_cell if c not in cells)
    for c in cells:
        flags = by_cell[c]
        row = {"cell": c, "runs": len(flags), "positive": sum(flags), "pct": 100.0 * sum(flags) / len(flags)}
        if kind == "cart":
            spec = next((cc.spec for cc in pack.cells if cc.label == c), None) if pack else None
            if spec is not None:
                s = scenarios.CartSpec.from_dict(spec)
                row.update(condition=scenarios.CartCondition(s.condition).value, stake_prompting=s.stake_prompting)
        report.rates.append(row)
    return report


def _pct(x: float | None) -> str:
    return "" if x is None else f"{100 * x:.1f}"


def _num(x: float | None, fmt: str = ".4f") -> str:
    return "" if x is None else format(x, fmt)


def render_text(report: Report, pack: ExperimentPack | None = None) -> str:
    lines = []
    title = pack.pack_id if pack else report.scenario
    lines.append(f"Report: {title} ({report.n_runs} runs)")
    if pack and pack.description:
        lines.append(pack.description)
    lines.append("")
    if report.summary is not None:
        lines.append("Contribution as % of endowment (pooled over agent-runs; run-mean pooling alongside)")
        header = f"{'group':<22}{'n':>5}{'mean%':>9}{'sd%':>8}{'runs':>6}{'run mean%':>11}  human"
        lines.append(header)
        lines.append("-" * len(header))
        for r in report.summary.rows:
            lines.append(
                f"{r.label:<22}{r.n:>5}{_pct(r.mean):>9}{_pct(r.sd):>8}{(r.n_runs or 0):>6}{_pct(r.run_mean):>11}  {r.human}"
            )
        if report.summary.comparisons:
            lines.append("")
            lines.append("Comparisons")
            for c in report.summary.comparisons:
                comp = c.comparison
                what = " vs ".join(comp.groups) if comp.test == "welch" else f"{comp.groups[0]} vs baseline {comp.baseline}"
                if c.result is None:
                    lines.append(f"  {what} [{comp.test}, {comp.tail.value}]: not computed ({c.error})")
                else:
                    res = c.result
                    lines.append(f"  {what} [{comp.test}, {comp.tail.value}]: t = {res.t:.3f}, df = {res.df:.2f}, p = {res.p:.4g}")
    else:
        what = "cart returned" if report.scenario == "cart" else "cheating observed"
        lines.append(f"% of simulations with {what}")
        for r in report.rates:
            lines.append(f"  {r['cell']:<12}{r['positive']:>3}/{r['runs']:<3}{r['pct']:>7.1f}%")
    if report.failures:
        lines.append("")
        lines.append(f"Failed runs excluded: {', '.join(report.failures)}")
    return "\n".join(lines) + "\n"


def write_report(report: Report, out_dir: str | Path, pack: ExperimentPack | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if report.summary is not None:
        rows = ["group\tn\tmean_pct\tsd_pct\tn_runs\trun_mean_pct\thuman"]
        for r in report.summary.rows:
            rows.append(f"{r.label}\t{r.n}\t{_pct(r.mean)}\t{_pct(r.sd)}\t{r.n_runs or 0}\t{_pct(r.run_mean)}\t{r.human}")
        (out / "groups.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        files.append(out / "groups.tsv")
        rows = ["groups\ttest\ttail\tbaseline\tt\tdf\tp\terror"]
        for c in report.summary.comparisons:
            res = c.result
            rows.append(
                "\t".join(
                    [
                        " vs ".join(c.comparison.groups),
                        c.comparison.test,
                        c.comparison.tail.value,
                        c.comparison.baseline or "",
                        _num(res.t if res else None),
                        _num(res.df if res else None),
                        _num(res.p if res else None, ".6g"),
                        c.error,
                    ]
                )
            )
        (out / "comparisons.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        files.append(out / "comparisons.tsv")
    else:
        keys = ["cell", "runs", "positive", "pct"] + (["condition", "stake_prompting"] if report.scenario == "cart" else [])
        rows = ["\t".join(keys)]
        for r in report.rates:
            rows.append("\t".join(f"{r[k]:.1f}" if k == "pct" else str(r.get(k, "")) for k in keys))
        (out / "rates.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        files.append(out / "rates.tsv")
    (out / "report.txt").write_text(render_text(report, pack), encoding="utf-8")
    _dump(report.to_dict(), out / "report.json")
    files += [out / "report.txt", out / "report.json"]
    report.files = files
    return files


def batch_run_dirs(batch_dir: str | Path) -> list[Path]:
    runs = Path(batch_dir) / "runs"
    return sorted(p for p in runs.iterdir() if p.is_dir()) if runs.is_dir() else []


def report_batch(batch_dir: str | Path, pack: ExperimentPack | None = None, out_dir: str | Path | None = None) -> Report:
    """Report on every run of a batch directory, using its pack snapshot if none is given."""
    batch_dir = Path(batch_dir)
    if pack is None and (batch_dir / "pack.json").exists():
        pack = parse_pack(_read(batch_dir / "pack.json"))
    report = build_report(batch_run_dirs(batch_dir), pack)
    write_report(report, out_dir or batch_dir / "report", pack)
    return report


def read_events(run_dir: str | Path) -> list[Event]:
    return [e for p in event_log_paths(run_dir) for e in read_event_log(p)]
