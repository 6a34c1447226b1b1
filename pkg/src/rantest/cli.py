"""Command line entry point: ``rantest validate|plan|run|report|export``.

Exit codes:
    0  success
    1  scenario invalid
    2  run completed with component failures
    3  internal or OS error (unreadable file, missing run directory)
"""
from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
from collections import defaultdict
from pathlib import Path

from .config import ScenarioError, build_plan, load_scenario, with_overrides
from .controller import ControllerOptions, RunReport, start_run
from .metrics import MetricsStore

EXIT_OK, EXIT_INVALID, EXIT_FAILED, EXIT_INTERNAL = 0, 1, 2, 3

REPORT_FILE = "report.json"
LOG_FILE = "run.log"
METRICS_FILE = "metrics.csv"
TRACE_FILE = "trace.ndjson"


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _print_diagnostics(exc: ScenarioError) -> None:
    for d in exc.diagnostics:
        _err(f"error: {d.path}: {d.message}" if d.path else f"error: {d.message}")


def _load(path: str, seed=None, duration=None):
    """Returns (spec, plan) or an exit code."""
    try:
        spec = load_scenario(path)
        spec = with_overrides(spec, seed=seed, duration_slots=duration)
        return spec, build_plan(spec)
    except ScenarioError as exc:
        _print_diagnostics(exc)
        return EXIT_INVALID
    except OSError as exc:
        _err(f"error: cannot read {path}: {exc.strerror or exc}")
        return EXIT_INTERNAL


def cmd_validate(args) -> int:
    loaded = _load(args.file)
    if isinstance(loaded, int):
        return loaded
    print("OK")
    return EXIT_OK


def cmd_plan(args) -> int:
    loaded = _load(args.file)
    if isinstance(loaded, int):
        return loaded
    spec, plan = loaded
    print(f"scenario {spec.id} seed={spec.seed} duration={spec.duration_slots} slots")
    for i, stage in enumerate(plan.stages):
        print(f"stage {i}: {', '.join(f'{n} ({spec.component(n).kind})' for n in stage)}")
    return EXIT_OK


def _parse_fault(text: str) -> tuple[str, int]:
    name, sep, slot = text.rpartition(":")
    if not sep or not name or not slot.isdigit():
        raise argparse.ArgumentTypeError(f"expected NAME:SLOT, got {text!r}")
    return name, int(slot)


def write_outputs(handle, report: RunReport, outdir: Path) -> RunReport:
    outdir.mkdir(parents=True, exist_ok=True)
    exports = {}
    exports["metrics"] = handle.store.export("csv", outdir / METRICS_FILE)
    log_path = outdir / LOG_FILE
    with open(log_path, "w", encoding="utf-8") as fh:
        for rec in handle.drain_logs():
            fh.write(rec.to_json() + "\n")
    exports["log"] = str(log_path)
    for fname, text in sorted(handle.artifacts.items()):
        path = outdir / fname
        path.write_text(text, encoding="utf-8")
        exports[fname] = str(path)
    exports["report"] = str(outdir / REPORT_FILE)
    report.exports = exports
    (outdir / REPORT_FILE).write_text(report.to_json(), encoding="utf-8")
    return report


def cmd_run(args) -> int:
    loaded = _load(args.file, args.seed_override, args.duration_override)
    if isinstance(loaded, int):
        return loaded
    spec, plan = loaded
    outdir = Path(args.outdir or os.path.join("runs", f"{spec.id}-{spec.seed}"))
    for name, _ in args.inject_fault:
        if name not in spec.names:
            _err(f"error: --inject-fault: unknown component {name!r}")
            return EXIT_INVALID
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        trace = open(outdir / TRACE_FILE, "w", encoding="utf-8") if args.trace else None
    except OSError as exc:
        _err(f"error: cannot create {outdir}: {exc.strerror or exc}")
        return EXIT_INTERNAL

    handle = start_run(plan, ControllerOptions(), trace=trace, faults=args.inject_fault)
    interrupted = threading.Event()

    def on_sigint(signum, frame):
        interrupted.set()
        handle.done.set()

    previous = None
    if threading.current_thread() is threading.main_thread():
        previous = signal.signal(signal.SIGINT, on_sigint)
    try:
        while not handle.wait(0.1):
            pass
        report = handle.stop()
    finally:
        if previous is not None:
            signal.signal(signal.SIGINT, previous)
        if trace is not None:
            trace.close()
    try:
        write_outputs(handle, report, outdir)
    except OSError as exc:
        _err(f"error: cannot write outputs: {exc}")
        return EXIT_INTERNAL
    if interrupted.is_set():
        _err("interrupted: run stopped early")
    print(f"run {spec.id} seed={spec.seed}: {report.slots_run} slots, digest {report.event_digest[:16]}")
    for name, st in report.statuses.items():
        print(f"  {name:12s} {st['state']}" + (f" ({st['reason']})" if st["reason"] else ""))
    print(f"outputs in {outdir}")
    return EXIT_FAILED if report.any_failed else EXIT_OK


def _load_run(outdir: Path):
    report_path = outdir / REPORT_FILE
    metrics_path = outdir / METRICS_FILE
    if not outdir.is_dir():
        raise FileNotFoundError(f"{outdir}: no such run directory")
    for p in (report_path, metrics_path):
        if not p.is_file():
            raise FileNotFoundError(f"{outdir}: incomplete run, missing {p.name}")
    report = json.loads(report_path.read_text(encoding="utf-8"))
    return report, MetricsStore.load_csv(metrics_path)


def summarize(report: dict, store: MetricsStore) -> list[str]:
    """Human-readable run summary lines."""
    lines = [
        f"scenario {report['scenario_id']} seed={report['seed']} slots={report['slots_run']}/{report['duration_slots']}",
        f"event digest {report['event_digest']}",
        f"components ({len(report['statuses'])}):",
    ]
    for name, st in report["statuses"].items():
        extra = f" ({st['reason']})" if st.get("reason") else ""
        restarts = f" restarts={st['restarts']}" if st.get("restarts") else ""
        lines.append(f"  {name:12s} {st['state']}{extra}{restarts}")

    tallies = defaultdict(lambda: [0, 0])
    for s in store.query("rrc_attempt"):
        vals = s.values("success")
        tallies[int(s.tags.get("k", -1))][0] += int(sum(vals))
        tallies[int(s.tags.get("k", -1))][1] += len(vals)
    if tallies:
        lines.append("rrc fuzzing success per k:")
        for k in sorted(tallies):
            ok, n = tallies[k]
            lines.append(f"  k={k}: {ok}/{n} accepted ({ok / n:.3f})")

    sinr = store.query("sinr")
    if sinr:
        lines.append("mean uplink SINR per UE:")
        for s in sinr:
            vals = s.values("sinr_db")
            mean = store.query("sinr", {"ue": s.tags["ue"]}, agg="mean", window=10**12)[0].values("sinr_db")[0]
            lines.append(f"  {s.tags['ue']}: {mean:.3f} dB over {len(vals)} slots")

    floods = store.query("flood_sent")
    if floods:
        sent = sum(sum(s.values("count")) for s in floods)
        grabbed = sum(sum(s.values("granted")) for s in floods)
        occasions = sum(len(s.values("count")) for s in floods)
        lines.append(f"rach flood: {int(sent)} preambles over {occasions} occasions, {int(grabbed)} grants taken")
        attempts = store.query("rach_attempt")
        n = sum(len(s.values("granted")) for s in attempts)
        blocked = sum(len(s.values("granted")) - sum(s.values("granted")) for s in attempts)
        rate = f"{blocked / n:.3f} ({int(blocked)}/{n})" if n else "n/a (no UE attempts)"
        lines.append(f"  legitimate RACH block rate: {rate}")

    for s in store.query("dci_capture"):
        captured, total = sum(s.values("captured")), sum(s.values("total"))
        rate = captured / total if total else 0.0
        lines.append(
            f"dci sniffing ({s.tags.get('component')}): {int(captured)}/{int(total)} captured ({rate:.4f}),"
            f" {int(s.values('rntis')[-1])} RNTIs"
        )
    return lines


def cmd_report(args) -> int:
    try:
        report, store = _load_run(Path(args.dir))
    except (OSError, ValueError, KeyError) as exc:
        _err(f"error: {exc}")
        return EXIT_INTERNAL
    print("\n".join(summarize(report, store)))
    return EXIT_OK


def cmd_export(args) -> int:
    outdir = Path(args.dir)
    try:
        _, store = _load_run(outdir)
        path = store.export(args.format, outdir / f"metrics.{args.format}")
    except (OSError, ValueError, KeyError) as exc:
        _err(f"error: {exc}")
        return EXIT_INTERNAL
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rantest", description="Declarative RAN security test runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", help="print the startup stages")
    p.add_argument("file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run a scenario to completion")
    p.add_argument("file")
    p.add_argument("--outdir", help="output directory (default runs/<id>-<seed>)")
    p.add_argument("--seed-override", type=int, help="replace the scenario seed")
    p.add_argument("--duration-override", type=int, help="replace duration_slots")
    p.add_argument("--trace", action="store_true", help=f"write the event trace to {TRACE_FILE}")
    p.add_argument("--inject-fault", type=_parse_fault, action="append", default=[], metavar="NAME:SLOT",
                   help="fail a component at a slot boundary (repeatable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a finished run")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export", help="export run metrics")
    p.add_argument("dir")
    p.add_argument("--format", choices=("csv", "json"), required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # last resort: keep the exit-code contract
        _err(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
