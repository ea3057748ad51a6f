"""Command-line entry point: ``agora run | replicate | report | replay``.

Exit status is 0 on success, 1 when a run or batch had failures and 2 on
configuration errors. Errors are also printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from agora import harness
from agora.errors import AgoraError, ConfigError, PackError
from agora.world import validate_config

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_CONFIG = 2


def _fail(exc: BaseException, code: int, **context: Any) -> int:
    rec = harness.error_record(exc)
    rec.pop("traceback", None)
    rec.update({k: v for k, v in context.items() if v is not None})
    print(json.dumps(rec, ensure_ascii=False), file=sys.stderr)
    return code


def _params(text: str | None) -> dict[str, Any] | None:
    if text is None:
        return None
    p = Path(text)
    raw = p.read_text(encoding="utf-8") if p.exists() else text
    try:
        value = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from exc
    if not isinstance(value, dict):
        raise ConfigError("--params must be a JSON object")
    return value


def backend_from_args(args: argparse.Namespace, default: harness.BackendSpec | None = None) -> harness.BackendSpec:
    """Combine ``--backend/--policy/--params/--transcript`` with a default backend."""
    base = default or harness.BackendSpec()
    kind = args.backend or base.kind
    params = _params(args.params)
    try:
        spec = harness.BackendSpec(
            kind=kind,
            policy=args.policy or (base.policy if kind == base.kind else None),
            params=params if params is not None else (dict(base.params) if kind == base.kind else {}),
            transcript=args.transcript or (base.transcript if kind == base.kind else None),
            model=args.model or base.model,
            base_url=base.base_url,
            temperature=args.temperature if args.temperature is not None else base.temperature,
            max_tokens=args.max_tokens if args.max_tokens is not None else base.max_tokens,
        )
        spec.validate()
    except PackError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        validate_config(config)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        scenario = harness.scenario_of(config)
        backend = backend_from_args(args)
        if backend.kind == "http":
            backend.build(scenario)  # missing key fails here, before any tick
    except (AgoraError, OSError, json.JSONDecodeError) as exc:
        return _fail(exc, EXIT_CONFIG, config=args.config)
    request = harness.RunRequest(scenario=scenario, seed=seed, backend=backend, run_id=args.run_id or Path(args.out).name, config=config)
    result = harness.execute_run(request, args.out)
    if not result.ok:
        print(json.dumps(result.error, ensure_ascii=False), file=sys.stderr)
        return EXIT_RUN_FAILED
    print(f"run {result.run_id}: ok ({result.n_records} extraction records) -> {result.path}")
    return EXIT_OK


def cmd_replicate(args: argparse.Namespace) -> int:
    try:
        pack = harness.load_pack(args.pack)
        if any(v is not None for v in (args.backend, args.policy, args.params, args.transcript, args.model)):
            pack = pack.with_backend(backend_from_args(args, pack.backend))
        batch = harness.replicate(pack, args.out, jobs=args.jobs)
    except AgoraError as exc:
        return _fail(exc, EXIT_CONFIG, pack=args.pack)
    summary = batch.to_dict()
    print(f"pack {pack.pack_id}: {summary['n_ok']}/{summary['n_runs']} runs ok, {summary['records']} extraction records -> {batch.root}")
    for f in summary["failures"]:
        print(f"  failed {f['run_id']}: {f.get('error')}: {f.get('message')}")
    if args.report:
        harness.report_batch(batch.root, pack)
    return EXIT_RUN_FAILED if batch.failures else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        pack = harness.load_pack(args.pack) if args.pack else None
        root = Path(args.out)
        if args.runs:
            report = harness.build_report(args.runs, pack)
            harness.write_report(report, root / "report", pack)
        else:
            report = harness.report_batch(root, pack)
    except AgoraError as exc:
        return _fail(exc, EXIT_CONFIG, out=args.out)
    sys.stdout.write(harness.render_text(report, pack))
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        result, identical = harness.replay_run(args.run_dir, args.out)
    except (AgoraError, OSError) as exc:
        return _fail(exc, EXIT_CONFIG, run_dir=args.run_dir)
    if not result.ok:
        print(json.dumps(result.error, ensure_ascii=False), file=sys.stderr)
        return EXIT_RUN_FAILED
    print(f"replay of {args.run_dir}: event logs {'identical' if identical else 'DIFFER'} -> {result.path}")
    return EXIT_OK if identical else EXIT_RUN_FAILED


def _backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=harness.BACKEND_KINDS, help="cognition backend (default: scripted)")
    p.add_argument("--policy", help="scripted policy id (default depends on the scenario)")
    p.add_argument("--params", help="scripted policy params as JSON text or a JSON file")
    p.add_argument("--transcript", help="replay source: transcript file, run directory or batch directory")
    p.add_argument("--model", help="model name for the http backend (env AGORA_MODEL)")
    p.add_argument("--temperature", type=float, help="sampling temperature for the http backend")
    p.add_argument("--max-tokens", type=int, help="reply length bound for the http backend")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agora", description="Deterministic multi-agent behavioral simulations.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log malformed replies and retries")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one world config into a run directory")
    p.add_argument("--config", required=True, help="world config JSON file")
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--run-id", help="run id recorded in outputs (default: directory name)")
    _backend_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replicate", help="run every cell and replication of an experiment pack")
    p.add_argument("--pack", required=True, help="pack JSON file or shipped pack id")
    p.add_argument("--out", required=True, help="batch directory to create")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--report", action="store_true", help="write the report once the batch finishes")
    _backend_flags(p)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("report", help="summarize a batch (or explicit run directories)")
    p.add_argument("--out", required=True, help="batch directory; the report goes to <out>/report")
    p.add_argument("--pack", help="pack JSON file or id (default: the batch's pack snapshot)")
    p.add_argument("runs", nargs="*", help="run directories (default: every run in the batch)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", help="re-run a recorded run from its transcript and compare logs")
    p.add_argument("run_dir", help="run directory to replay")
    p.add_argument("--out", required=True, help="directory for the replayed run")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
