"""Command line entry point: ``iofm validate|run|report|matrix``.

Exit codes are 0 on success, 1 when a scenario fails to parse or validate,
and 2 for any other runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import canonical, scenario, simnet
from .engine import reports
from .engine.capability import COVERAGE_ROWS, PHASE_COVERAGE, USE_CASES, coverage_table, matrix_for, observed_coverage
from .errors import IoFMError, ScenarioError
from .faultmodel.lifecycle import LifecyclePhase
from .faultmodel.metrics import MetricVector, aggregate_chain
from .faultmodel.records import FaultRecord
from .topology import TopologyClass

log = logging.getLogger("iofm")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
RESULT_FILES = ("registry.json", "trace.jsonl", "audit.jsonl", "outcomes.json")


class CliError(Exception):
    """Runtime failure reported with exit code 2."""


def _configure_logging():
    level = os.environ.get("IOFM_LOG_LEVEL", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _print_violations(err: ScenarioError, out):
    print(f"invalid: {err}", file=out)
    for v in err.violations:
        print(f"  [{v.code}] {v.message}", file=out)


# --- validate / run ---------------------------------------------------------

def cmd_validate(args) -> int:
    sc = scenario.load(args.scenario)
    net = sc.network
    print(f"valid: {sc.name} ({net.topology_class.value}, {len(net.domains)} domains, "
          f"{len(net.services)} services, {len(sc.events)} events)")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = scenario.load(args.scenario)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc.strerror}") from None
    result = simnet.run(sc)
    result.write(out)
    data = result.outcomes_data
    counts = {}
    for o in data["localization"]:
        counts[o["result"]] = counts.get(o["result"], 0) + 1
    summary = ", ".join(f"{n} {k}" for k, n in sorted(counts.items())) or "no faults"
    print(f"{sc.name} seed={sc.seed}: {summary}; wrote {', '.join(RESULT_FILES)} to {out}")
    return EXIT_OK


# --- offline reports --------------------------------------------------------

def load_result(result_dir) -> dict:
    d = Path(result_dir)
    missing = [f for f in RESULT_FILES if not (d / f).is_file()]
    if missing:
        raise CliError(f"{d}: result directory lacks {', '.join(missing)}")
    registry = json.loads((d / "registry.json").read_text(encoding="utf-8"))
    records = [FaultRecord.from_dict(r, verify=True) for r in registry["records"]]
    trace = [json.loads(line) for line in (d / "trace.jsonl").read_text(encoding="utf-8").splitlines() if line]
    outcomes = json.loads((d / "outcomes.json").read_text(encoding="utf-8"))
    last = max([e["tick"] for e in trace] + [0])
    return {"dir": d, "records": records, "trace": trace, "outcomes": outcomes, "lastTick": last}


def _parse_window(text, default):
    if text is None:
        return default
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise CliError(f"window must look like START:END, got {text!r}") from None


def statistics_rows(res: dict, window) -> tuple[list[str], list[dict]]:
    """One row per domain; ``incomplete`` marks windows reaching past the recorded run."""
    incomplete = window[1] > res["lastTick"]
    rows = []
    for d in res["outcomes"]["domains"]:
        row = reports.domain_statistics(d, res["records"], res["trace"], window)
        row["incomplete"] = incomplete
        rows.append(row)
    return list(reports.STATISTICS_COLUMNS) + ["incomplete"], rows


def qos_rows(res: dict, window) -> tuple[list[str], list[dict]]:
    q = res["outcomes"]["qosInputs"]
    rows = []
    for sla_d in q["slas"]:
        sla = reports.SlaSpec.from_dict(sla_d)
        chain = q["chains"][sla.service]
        metrics = [reports.measured_part_metrics(pid, MetricVector.from_dict(q["parts"][pid]["metrics"]),
                                                 q["parts"][pid]["components"], q["failures"], q["degradations"],
                                                 window) for pid in chain]
        if not metrics:
            continue
        measured = aggregate_chain(metrics)
        bad = {v["metric"] for v in sla.check(measured)}
        for metric, limit in (("owd", sla.max_owd), ("ipdv", sla.max_ipdv), ("loss", sla.max_loss),
                              ("availability", sla.min_availability)):
            if limit is not None and metric in bad:
                rows.append({"service": sla.service, "metric": metric, "limit": limit,
                             "measured": getattr(measured, metric), "violated": True})
    return list(reports.QOS_COLUMNS), rows


def trend_rows(res: dict, window, threshold, bucket) -> tuple[list[str], list[dict]]:
    horizon = window[1] - window[0] + 1
    rows = []
    for d in res["outcomes"]["domains"]:
        pts = reports.bucket_counts(res["records"], d, window, bucket)
        fit = reports.fit_trend(pts, threshold, window[1], horizon)
        for tick, count in pts:
            rows.append({"domain": d, "tick": tick, "count": count, **fit})
    return ["domain", "tick", "count", "slope", "intercept", "threshold", "breachTick"], rows


def render(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"columns": columns, "rows": [canonical.normalize({c: r[c] for c in columns}) for r in rows]},
                          indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: ("" if r[c] is None else r[c]) for c in columns})
    return buf.getvalue()


def cmd_report(args) -> int:
    res = load_result(args.result_dir)
    window = reports.check_window(_parse_window(args.window, (0, res["lastTick"])))
    th = res["outcomes"]["config"]["thresholds"]
    if args.kind == "statistics":
        cols, rows = statistics_rows(res, window)
    elif args.kind == "qos":
        cols, rows = qos_rows(res, window)
    else:
        threshold = args.threshold if args.threshold is not None else th["trendThreshold"]
        cols, rows = trend_rows(res, window, threshold, args.bucket or th["trendBucket"])
    text = render(cols, rows, args.format)
    target = res["dir"] / f"plot-{args.kind}.{args.format}"
    try:
        target.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {target}: {exc.strerror}") from None
    sys.stdout.write(text)
    return EXIT_OK


# --- matrix -----------------------------------------------------------------

def _mark(flag) -> str:
    return "x" if flag else "-"


def capability_lines(current: TopologyClass | None = None) -> list[str]:
    classes = list(TopologyClass)
    head = "useCase " + " ".join(f"{c.value:>10}" + ("*" if c is current else " ") for c in classes)
    lines = [head]
    mats = {c: matrix_for(c) for c in classes}
    for uc in USE_CASES:
        lines.append(f"{uc:<7} " + " ".join(f"{_mark(mats[c][uc]):>10} " for c in classes))
    return lines


def coverage_lines(coverage) -> list[str]:
    phases = list(LifecyclePhase)
    lines = ["useCase " + " ".join(f"{p.value:>18}" for p in phases) + "  expected"]
    ok = 0
    for row in coverage_table(coverage):
        want = PHASE_COVERAGE[row["useCase"]]
        cells = " ".join(f"{_mark(row[p.value]):>18}" for p in phases)
        exp = "".join(p.value[0] for p in phases if p in want)
        lines.append(f"{row['useCase']:<7} {cells}  {exp:<8} {'ok' if row['matches'] else 'MISMATCH'}")
        ok += row["matches"]
    lines.append(f"{ok}/{len(COVERAGE_ROWS)} rows match")
    return lines


def cmd_matrix(args) -> int:
    path = Path(args.source)
    if path.is_dir():
        res = load_result(path)
        current = TopologyClass(res["outcomes"]["topologyClass"])
        audit = [json.loads(x) for x in (path / "audit.jsonl").read_text(encoding="utf-8").splitlines() if x]
        coverage = observed_coverage(audit)
    else:
        sc = scenario.load(args.source)
        if args.seed is not None:
            sc = sc.with_seed(args.seed)
        current = sc.network.topology_class
        coverage = observed_coverage(simnet.run(sc).audit_events()) if args.run else None
    print("supported use cases (* = this scenario)")
    print("\n".join(capability_lines(current)))
    if coverage is not None:
        print()
        print("observed lifecycle phase coverage")
        print("\n".join(coverage_lines(coverage)))
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iofm", description="Inter-organizational fault management simulator")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse and validate a scenario")
    v.add_argument("scenario", help="scenario file or bundled scenario name")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run a scenario and write its result files")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="export plot data from a result directory")
    rep.add_argument("result_dir")
    rep.add_argument("--kind", choices=("statistics", "qos", "trend"), required=True)
    rep.add_argument("--format", choices=("csv", "json"), default="csv")
    rep.add_argument("--window", help="inclusive tick window START:END")
    rep.add_argument("--threshold", type=float, help="trend threshold (default from the scenario)")
    rep.add_argument("--bucket", type=int, help="trend bucket width in ticks")
    rep.set_defaults(func=cmd_report)

    m = sub.add_parser("matrix", help="print use-case support and, after a run, phase coverage")
    m.add_argument("source", help="scenario, bundled name or result directory")
    m.add_argument("--run", action="store_true", help="run the scenario and show observed coverage")
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_matrix)
    return p


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        _print_violations(exc, sys.stderr)
        return EXIT_INVALID
    except (CliError, IoFMError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
