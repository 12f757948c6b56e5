"""Command-line entry points: ingest, rulegen, infer, query, stats, serve,
synth, and the cold/warm x single/multi benchmark harness.

The query subcommand prints exactly the bytes the HTTP /fwi endpoint would
return for the same store, so scripted pipelines and the service can be
diffed against each other.
"""

from __future__ import annotations

import argparse
import json
import re
import statistics
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .core import (
    DEFAULT_UTC_OFFSET_MINUTES,
    STUDY_BBOX,
    DomainError,
    PropertyKind,
    TimeRange,
    format_utc,
    parse_utc,
)
from .ffdi import DEFAULT_GRID, RuleGridSpec, generate_rule_table
from .infer import InferenceEngine
from .ingest import (
    NodeRegistry,
    ParseError,
    default_node_registry,
    generate_synthetic_stream,
    parse_csv,
)
from .rules import RuleSet, parse_rules, serialize_rules
from .service import (
    DAY_END_MINUTES,
    DAY_START_MINUTES,
    QueryRequest,
    _parse_hhmm,
    create_app,
    fwi_payload,
    ingest_csv,
    json_bytes,
    stats_payload,
)
from .store import FWI_PROPERTY, MODE_MULTI, MODE_SINGLE, RepositorySet

# -- benchmark grid ----------------------------------------------------------

# Eight query-period rungs, ascending. 1mo is taken as 30 days.
DEFAULT_BENCH_PERIODS: Tuple[Tuple[str, timedelta], ...] = (
    ("1h", timedelta(hours=1)),
    ("6h", timedelta(hours=6)),
    ("12h", timedelta(hours=12)),
    ("1d", timedelta(days=1)),
    ("3d", timedelta(days=3)),
    ("1w", timedelta(weeks=1)),
    ("2w", timedelta(weeks=2)),
    ("1mo", timedelta(days=30)),
)

BENCH_DATASET_START = datetime(2012, 1, 1, tzinfo=timezone.utc)
BENCH_DATASET_DAYS = 67  # 67 days x 3 properties x 721 triples/day = 144,921

_MODE_LABELS = {MODE_SINGLE: ("NQ-1R", "RQ-1R"), MODE_MULTI: ("NQ-MR", "RQ-MR")}

_PERIOD_RE = re.compile(r"^(\d+)(h|d|w|mo)$")
_PERIOD_UNIT_HOURS = {"h": 1, "d": 24, "w": 7 * 24, "mo": 30 * 24}


def parse_period(text: str) -> Tuple[str, timedelta]:
    m = _PERIOD_RE.match(text.strip())
    if not m:
        raise DomainError(f"unparsable period {text!r}; use forms like 6h, 3d, 2w, 1mo")
    return text.strip(), timedelta(hours=int(m.group(1)) * _PERIOD_UNIT_HOURS[m.group(2)])


@dataclass(frozen=True)
class BenchSpec:
    """One benchmark column: a storage mode timed over the period ladder."""

    store_mode: str
    query_periods: Tuple[Tuple[str, timedelta], ...] = DEFAULT_BENCH_PERIODS
    repetitions: int = 3
    seed: int = 7
    dataset_days: int = BENCH_DATASET_DAYS

    def __post_init__(self) -> None:
        if self.store_mode not in _MODE_LABELS:
            raise DomainError(f"store_mode must be multi or single, got {self.store_mode!r}")
        if self.repetitions < 3:
            raise DomainError(f"repetitions must be >= 3, got {self.repetitions}")
        if not self.query_periods:
            raise DomainError("query_periods is empty")
        durations = [p for _, p in self.query_periods]
        if durations != sorted(durations):
            raise DomainError("query_periods must be ascending")
        if durations[-1] > timedelta(days=self.dataset_days):
            raise DomainError("largest period exceeds the dataset span")


@dataclass(frozen=True)
class BenchRow:
    period_name: str
    period_seconds: int
    label: str
    median_ms: float
    min_ms: float
    max_ms: float


@dataclass(frozen=True)
class BenchReport:
    rows: Tuple[BenchRow, ...]
    triples: int

    def to_csv(self) -> str:
        lines = ["period_seconds,label,median_ms,min_ms,max_ms,triples"]
        for r in self.rows:
            lines.append(
                f"{r.period_seconds},{r.label},{r.median_ms:.3f},{r.min_ms:.3f},"
                f"{r.max_ms:.3f},{self.triples}"
            )
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [f"dataset: {self.triples} triples"]
        lines.append(f"{'period':>8} {'label':>6} {'median_ms':>10} {'min_ms':>10} {'max_ms':>10}")
        for r in self.rows:
            lines.append(
                f"{r.period_name:>8} {r.label:>6} {r.median_ms:>10.3f} "
                f"{r.min_ms:>10.3f} {r.max_ms:>10.3f}"
            )
        return "\n".join(lines) + "\n"


def build_bench_store(root: Path, mode: str, days: int, seed: int) -> RepositorySet:
    """Create (or reuse) a seeded one-node dataset batched per day+property.

    The synthetic stream is deterministic, so an existing store built from
    the same parameters is byte-compatible and simply reopened.
    """
    repos = RepositorySet(root, mode)
    expected_days = days * len(PropertyKind)
    weather_entries = [e for e in repos.catalog if e.property != FWI_PROPERTY]
    if len(weather_entries) == expected_days:
        return repos
    if weather_entries:
        raise DomainError(
            f"store at {root} holds a different dataset ({len(weather_entries)} batches); "
            "move it aside or pass a fresh --store"
        )
    registry = default_node_registry(1)
    span = TimeRange(BENCH_DATASET_START, BENCH_DATASET_START + timedelta(days=days))
    text = generate_synthetic_stream(registry, span, seed=seed)
    observations = parse_csv(text)
    batches = {}
    for obs in observations:
        batches.setdefault((obs.time.date(), obs.property.csv_name), []).append(obs)
    for day, prop_name in sorted(batches):
        batch = batches[(day, prop_name)]
        repos.store_graph(batch, PropertyKind.from_csv_name(prop_name))
    return repos


def _bench_result_bytes(events) -> bytes:
    rows = [
        [format_utc(e.time), e.node_id, e.fwi_class.ordinal, e.rule_name]
        for e in events
    ]
    return json_bytes(rows)


def bench_run(spec: BenchSpec, repos: RepositorySet, ruleset: RuleSet) -> BenchReport:
    """Time cold (NQ) and warm (RQ) inference queries over the period ladder.

    Every cold run starts from an empty event repository and coverage index;
    the warm run repeats the identical query immediately afterwards. The two
    must return identical result bytes or the report is invalid.
    """
    nq_label, rq_label = _MODE_LABELS[spec.store_mode]
    triples = repos.triple_count()
    rows: List[BenchRow] = []
    for period_name, period in spec.query_periods:
        window = TimeRange(BENCH_DATASET_START, BENCH_DATASET_START + period)
        nq_ms: List[float] = []
        rq_ms: List[float] = []
        for _ in range(spec.repetitions):
            repos.clear_fwi()
            engine = InferenceEngine(repos, ruleset)
            engine.reset_coverage()
            t0 = time.perf_counter()
            cold = engine.query(window)
            nq_ms.append((time.perf_counter() - t0) * 1000.0)
            t0 = time.perf_counter()
            warm = engine.query(window)
            rq_ms.append((time.perf_counter() - t0) * 1000.0)
            if _bench_result_bytes(cold) != _bench_result_bytes(warm):
                raise DomainError(
                    f"benchmark invariant violated: {period_name} {spec.store_mode} "
                    "cold and warm results differ"
                )
        seconds = int(period.total_seconds())
        for label, samples in ((nq_label, nq_ms), (rq_label, rq_ms)):
            rows.append(
                BenchRow(
                    period_name=period_name,
                    period_seconds=seconds,
                    label=label,
                    median_ms=statistics.median(samples),
                    min_ms=min(samples),
                    max_ms=max(samples),
                )
            )
    return BenchReport(rows=tuple(rows), triples=triples)


def merge_reports(single: BenchReport, multi: BenchReport) -> BenchReport:
    """Interleave the two mode columns into the four-label grid, period-major."""
    by_key = {}
    for report in (single, multi):
        for row in report.rows:
            by_key[(row.period_seconds, row.label)] = row
    rows: List[BenchRow] = []
    for seconds in sorted({r.period_seconds for r in single.rows}):
        for label in ("NQ-1R", "RQ-1R", "NQ-MR", "RQ-MR"):
            rows.append(by_key[(seconds, label)])
    return BenchReport(rows=tuple(rows), triples=multi.triples)


# -- shared option plumbing --------------------------------------------------

def _load_ruleset(rules_arg: Optional[str]) -> RuleSet:
    """--rules accepts a rule file or a directory of *.dsl files; with no
    flag the default generated rule table is used."""
    if rules_arg is None:
        return generate_rule_table(DEFAULT_GRID)
    path = Path(rules_arg)
    if path.is_dir():
        files = sorted(path.glob("*.dsl"))
        if not files:
            raise DomainError(f"no *.dsl files under {path}")
        text = "\n---\n".join(f.read_text(encoding="utf-8") for f in files)
    elif path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        raise DomainError(f"rules path not found: {path}")
    return parse_rules(text)


def _parse_time_arg(text: str, flag: str) -> datetime:
    try:
        return parse_utc(text)
    except (DomainError, ValueError) as exc:
        raise DomainError(f"{flag}: {exc}") from None


def _window_from_args(args) -> TimeRange:
    return TimeRange(
        _parse_time_arg(args.time_from, "--from"), _parse_time_arg(args.time_to, "--to")
    ).aligned()


def _open_engine(args) -> Tuple[RepositorySet, InferenceEngine, NodeRegistry]:
    repos = RepositorySet(args.store, args.mode)
    engine = InferenceEngine(repos, _load_ruleset(args.rules))
    return repos, engine, default_node_registry(args.nodes)


def _emit(args, payload, human: str) -> None:
    if args.json:
        sys.stdout.buffer.write(json_bytes(payload) + b"\n")
    else:
        print(human)


# -- subcommands -------------------------------------------------------------

def cmd_ingest(args) -> int:
    kind = PropertyKind.from_csv_name(args.property)
    text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text(encoding="utf-8")
    repos = RepositorySet(args.store, args.mode)
    registry = default_node_registry(args.nodes)
    result = ingest_csv(repos, registry, kind, text, args.utc_offset)
    human = (
        f"stored {result['context']}: {result['triples']} triples, "
        f"{result['outliers_removed']} outliers removed"
        if result["context"]
        else f"stored nothing: all {result['outliers_removed']} records were outliers"
    )
    _emit(args, result, human)
    return 0


def cmd_rulegen(args) -> int:
    if args.grid == "default":
        spec = DEFAULT_GRID
    else:
        spec = RuleGridSpec.from_json_dict(
            json.loads(Path(args.grid).read_text(encoding="utf-8"))
        )
    ruleset = generate_rule_table(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rules.dsl").write_text(serialize_rules(ruleset), encoding="utf-8")
    manifest = {
        "rule_count": len(ruleset.rules),
        "checksum": ruleset.checksum(),
        "grid": spec.to_json_dict(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit(args, manifest, f"wrote {len(ruleset.rules)} rules to {out / 'rules.dsl'}")
    return 0


def cmd_infer(args) -> int:
    repos, engine, _ = _open_engine(args)
    window = _window_from_args(args)
    if args.reset:
        repos.clear_fwi()
        engine.reset_coverage()
    engine.ensure_coverage(window)
    events = engine.search_events(window)
    payload = {
        "window": {"from": format_utc(window.start), "to": format_utc(window.end)},
        "rule_evaluations": engine.rule_evaluations,
        "events": len(events),
    }
    _emit(
        args,
        payload,
        f"window covered: {len(events)} events, {engine.rule_evaluations} rule evaluations",
    )
    return 0


def cmd_query(args) -> int:
    _, engine, registry = _open_engine(args)
    window = _window_from_args(args)
    bbox = STUDY_BBOX
    if args.bbox:
        parts = args.bbox.split(",")
        if len(parts) != 4:
            raise DomainError(f"--bbox must be S,W,N,E, got {args.bbox!r}")
        try:
            bbox = tuple(float(p) for p in parts)
        except ValueError:
            raise DomainError(f"--bbox must be numeric, got {args.bbox!r}") from None
    req = QueryRequest(
        window=window, bbox=bbox, nx=args.nx, ny=args.ny, node=args.node, stride=args.stride
    )
    payload = fwi_payload(engine, registry, req)
    sys.stdout.buffer.write(json_bytes(payload) + b"\n")
    return 0


def cmd_stats(args) -> int:
    _, engine, _ = _open_engine(args)
    window = _window_from_args(args)
    payload = stats_payload(
        engine,
        window,
        _parse_hhmm(args.day_start),
        _parse_hhmm(args.day_end),
        args.utc_offset,
    )
    if args.json:
        sys.stdout.buffer.write(json_bytes(payload) + b"\n")
        return 0
    for part in ("entire", "day", "night"):
        dist = payload[part]
        slices = ", ".join(
            f"{dist['percentages'][label]:.1f}% {label}" for label in dist["counts"]
        )
        print(f"{part:>6} ({dist['total']} events): {slices if slices else 'no data'}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    app = create_app(
        args.store,
        _load_ruleset(args.rules),
        default_node_registry(args.nodes),
        utc_offset_minutes=args.utc_offset,
        store_mode=args.mode,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_synth(args) -> int:
    window = TimeRange(
        _parse_time_arg(args.time_from, "--from"), _parse_time_arg(args.time_to, "--to")
    )
    registry = default_node_registry(args.nodes)
    text = generate_synthetic_stream(
        registry, window, seed=args.seed, fault_rate=args.fault_rate,
        utc_offset_minutes=args.utc_offset,
    )
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {text.count(chr(10))} records to {args.out}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    periods = (
        tuple(parse_period(p) for p in args.periods.split(","))
        if args.periods
        else DEFAULT_BENCH_PERIODS
    )
    root = Path(args.store)
    ruleset = _load_ruleset(args.rules)
    reports = {}
    for mode in (MODE_SINGLE, MODE_MULTI):
        spec = BenchSpec(
            store_mode=mode,
            query_periods=periods,
            repetitions=args.reps,
            seed=args.seed,
            dataset_days=args.days,
        )
        print(f"building {mode} store ...", file=sys.stderr)
        repos = build_bench_store(root / f"bench-{mode}", mode, spec.dataset_days, spec.seed)
        print(f"timing {mode} mode ({repos.triple_count()} triples) ...", file=sys.stderr)
        reports[mode] = bench_run(spec, repos, ruleset)
    report = merge_reports(reports[MODE_SINGLE], reports[MODE_MULTI])
    csv_text = report.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(csv_text)
    print(report.summary(), file=sys.stderr, end="")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", default="./firewx-store", help="repository directory")
    common.add_argument("--rules", default=None, help="rule file or directory (*.dsl); default: generated table")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=7, help="random seed")
    common.add_argument(
        "--utc-offset", dest="utc_offset", type=int, default=DEFAULT_UTC_OFFSET_MINUTES,
        help="minutes east of UTC for CSV wall times and day/night splits",
    )
    common.add_argument("--mode", choices=(MODE_MULTI, MODE_SINGLE), default=MODE_MULTI)
    common.add_argument("--nodes", type=int, default=5, help="sensor-node count of the registry")

    parser = argparse.ArgumentParser(prog="firewx", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="clean and store an observation CSV")
    p.add_argument("--property", required=True, choices=[k.csv_name for k in PropertyKind])
    p.add_argument("--file", required=True, help="CSV path, or - for stdin")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rulegen", parents=[common], help="generate the rule table")
    p.add_argument("--grid", default="default", help="'default' or a grid JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_rulegen)

    p = sub.add_parser("infer", parents=[common], help="materialize events for a window")
    p.add_argument("--from", dest="time_from", required=True)
    p.add_argument("--to", dest="time_to", required=True)
    p.add_argument("--reset", action="store_true", help="drop stored events and coverage first")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("query", parents=[common], help="print the /fwi JSON payload")
    p.add_argument("--from", dest="time_from", required=True)
    p.add_argument("--to", dest="time_to", required=True)
    p.add_argument("--bbox", default=None, help="S,W,N,E (default: study region)")
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int, default=8)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--node", default=None)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("stats", parents=[common], help="day/night class distribution")
    p.add_argument("--from", dest="time_from", required=True)
    p.add_argument("--to", dest="time_to", required=True)
    p.add_argument("--day-start", dest="day_start", default="06:00")
    p.add_argument("--day-end", dest="day_end", default="18:00")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", default=None, help="static frontend bundle to mount at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", parents=[common], help="emit a synthetic observation CSV")
    p.add_argument("--from", dest="time_from", required=True)
    p.add_argument("--to", dest="time_to", required=True)
    p.add_argument("--fault-rate", dest="fault_rate", type=float, default=0.0)
    p.add_argument("--out", default="-", help="output path, or - for stdout")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", parents=[common], help="cold/warm query benchmark grid")
    p.add_argument("--periods", default=None, help="comma list like 1h,6h,1d (default: 8 rungs)")
    p.add_argument("--reps", type=int, default=3, help="repetitions per cell (>= 3)")
    p.add_argument("--days", type=int, default=BENCH_DATASET_DAYS, help="dataset span in days")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
