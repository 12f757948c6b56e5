"""Typed triples, named graphs, property-partitioned repositories with a
catalog index, and the basic-graph-pattern matcher.

Storage layout under one root directory:

    catalog.tsv          one committed graph per line
    <repository_id>.nq   tab-separated quads, context first

Writes append the graph's quads first and the catalog line last, so a graph
is committed only once its catalog entry exists; quad lines without a
catalog entry are uncommitted leftovers and are pruned (atomic rewrite) the
next time the store opens.

The store runs in one of two modes. "multi" keeps four sub-repositories
(air_temperature, relative_humidity, wind_speed, fwi) and routes graphs by
property; "single" keeps every graph in one undivided repository, which
disables property routing in catalog lookups. The single mode exists for
the storage-layout benchmark comparison.
"""

from __future__ import annotations

import json
import sys
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from . import vocab
from .core import DomainError, PropertyKind, TimeRange, ensure_utc, format_utc, parse_utc
from .ingest import Observation


@dataclass(frozen=True, slots=True)
class IRI:
    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise DomainError("IRI must be non-empty")

    def __repr__(self) -> str:
        return f"<{self.value}>"


DECIMAL = "decimal"
DATETIME = "dateTime"
STRING = "string"
_DATATYPES = (DECIMAL, DATETIME, STRING)


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str

    def __post_init__(self) -> None:
        if self.datatype not in _DATATYPES:
            raise DomainError(f"unknown literal datatype: {self.datatype!r}")

    @classmethod
    def decimal(cls, value: Union[float, int, str]) -> "Literal":
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise DomainError(f"not a decimal: {value!r}") from None
        if number != number or number in (float("inf"), float("-inf")):
            raise DomainError(f"decimal literal must be finite: {value!r}")
        lexical = repr(number) if isinstance(value, float) else str(value)
        return cls(lexical, DECIMAL)

    @classmethod
    def date_time(cls, value: datetime) -> "Literal":
        return cls(format_utc(value), DATETIME)

    @classmethod
    def string(cls, value: str) -> "Literal":
        return cls(value, STRING)

    def numeric(self) -> Optional[float]:
        if self.datatype != DECIMAL:
            return None
        try:
            return float(self.lexical)
        except ValueError:
            return None

    def time(self) -> Optional[datetime]:
        if self.datatype != DATETIME:
            return None
        try:
            return parse_utc(self.lexical)
        except DomainError:
            return None

    def __repr__(self) -> str:
        return f'"{self.lexical}"^^{self.datatype}'


Term = Union[IRI, Literal]


@dataclass(frozen=True, slots=True)
class Triple:
    s: IRI
    p: IRI
    o: Term

    def __post_init__(self) -> None:
        if not isinstance(self.s, IRI) or not isinstance(self.p, IRI):
            raise DomainError("triple subject and predicate must be IRIs")
        if not isinstance(self.o, (IRI, Literal)):
            raise DomainError("triple object must be an IRI or Literal")


@dataclass(frozen=True)
class NamedGraph:
    context: str
    triples: frozenset

    @classmethod
    def of(cls, context: str, triples: Iterable[Triple]) -> "NamedGraph":
        return cls(context, frozenset(triples))

    def __len__(self) -> int:
        return len(self.triples)


# --- wire encoding -----------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r", '"': '\\"'}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r", '"': '"'}


def _escape(text: str) -> str:
    if not any(c in text for c in _ESCAPES):
        return text
    return "".join(_ESCAPES.get(c, c) for c in text)


def _unescape(text: str) -> str:
    if "\\" not in text:
        return text
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text) and text[i + 1] in _UNESCAPES:
            out.append(_UNESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def encode_term(term: Term) -> str:
    if isinstance(term, IRI):
        return f"<{term.value}>"
    return f'"{_escape(term.lexical)}"^^{term.datatype}'


def decode_term(text: str) -> Term:
    if text.startswith("<") and text.endswith(">"):
        return IRI(sys.intern(text[1:-1]))
    if text.startswith('"'):
        closing = text.rfind('"^^')
        if closing > 0:
            return Literal(_unescape(text[1:closing]), text[closing + 3:])
    raise DomainError(f"unparsable term: {text!r}")


def encode_quad(context: str, triple: Triple) -> str:
    return "\t".join(
        (context, encode_term(triple.s), encode_term(triple.p), encode_term(triple.o))
    )


def decode_quad(line: str) -> Tuple[str, Triple]:
    parts = line.split("\t")
    if len(parts) != 4:
        raise DomainError(f"quad line must have 4 fields, got {len(parts)}")
    context, s, p, o = parts
    subject = decode_term(s)
    predicate = decode_term(p)
    obj = decode_term(o)
    if not isinstance(subject, IRI) or not isinstance(predicate, IRI):
        raise DomainError("quad subject/predicate must be IRIs")
    return context, Triple(subject, predicate, obj)


# --- observation conversion --------------------------------------------------


def observations_to_graph(
    batch: Sequence[Observation], context: Optional[str] = None
) -> NamedGraph:
    """Convert one single-property batch into a named graph.

    Per observation: ObservedProperty, ObservationSamplingTime,
    unitOfMeasure, ObservedBy, hasValue on the observation node, plus one
    deduplicated (sensor, deployedOnPlatform, node) triple per sensor.
    """
    if not batch:
        raise DomainError("observation batch is empty")
    kinds = {obs.property for obs in batch}
    if len(kinds) != 1:
        names = sorted(k.csv_name for k in kinds)
        raise DomainError(f"batch mixes properties: {names}")
    kind = batch[0].property
    property_term = IRI(vocab.property_iri(kind.csv_name))
    unit_term = IRI(vocab.unit_iri(kind.csv_name))
    if context is None:
        min_time = min(obs.time for obs in batch)
        context = graph_context(kind.csv_name, min_time, 0)
    triples: Set[Triple] = set()
    for obs in batch:
        stamp = ensure_utc(obs.time).strftime("%Y%m%dT%H%M%SZ")
        obs_iri = IRI(f"{vocab.OBSERVATION_BASE}{kind.csv_name}/{obs.sensor_id}/{stamp}")
        sensor = IRI(vocab.sensor_iri(obs.sensor_id))
        node = IRI(vocab.node_iri(obs.node_id))
        triples.add(Triple(obs_iri, IRI(vocab.SSN_OBSERVED_PROPERTY), property_term))
        triples.add(
            Triple(obs_iri, IRI(vocab.SSN_OBSERVATION_SAMPLING_TIME), Literal.date_time(obs.time))
        )
        triples.add(Triple(obs_iri, IRI(vocab.DUL_UNIT_OF_MEASURE), unit_term))
        triples.add(Triple(obs_iri, IRI(vocab.SSN_OBSERVED_BY), sensor))
        triples.add(Triple(obs_iri, IRI(vocab.SSN_HAS_VALUE), Literal.decimal(obs.value)))
        triples.add(Triple(sensor, IRI(vocab.SSN_DEPLOYED_ON_PLATFORM), node))
    return NamedGraph.of(context, triples)


def graph_context(property_name: str, min_time: datetime, counter: int) -> str:
    stamp = ensure_utc(min_time).strftime("%Y%m%dT%H%M%SZ")
    return f"{vocab.GRAPH_BASE}{property_name}:{stamp}:{counter}"


_TIME_PREDICATES = (vocab.SSN_OBSERVATION_SAMPLING_TIME, vocab.PROV_AT_TIME)


def graph_time_extrema(graph: NamedGraph) -> Tuple[datetime, datetime]:
    """Min/max of the graph's sampling or event times."""
    times = []
    for t in graph.triples:
        if t.p.value in _TIME_PREDICATES and isinstance(t.o, Literal):
            when = t.o.time()
            if when is not None:
                times.append(when)
    if not times:
        raise DomainError(f"graph {graph.context} has no timestamped triples")
    return min(times), max(times)


# --- catalog and repositories ------------------------------------------------

FWI_PROPERTY = "fwi"
WEATHER_PROPERTIES = ("air_temperature", "relative_humidity", "wind_speed")
MULTI_REPO_IDS = WEATHER_PROPERTIES + (FWI_PROPERTY,)
SINGLE_REPO_ID = "single"

MODE_MULTI = "multi"
MODE_SINGLE = "single"


@dataclass(frozen=True)
class CatalogEntry:
    repository_id: str
    context: str
    min_time: datetime
    max_time: datetime
    property: str  # a PropertyKind csv_name, or "fwi"

    def __post_init__(self) -> None:
        if self.min_time > self.max_time:
            raise DomainError("catalog entry requires min_time <= max_time")

    def intersects(self, window: TimeRange) -> bool:
        # entry bounds are inclusive observation times, window is [start, end)
        return self.min_time < window.end and self.max_time >= window.start

    def to_tsv(self) -> str:
        return "\t".join(
            (
                self.repository_id,
                self.context,
                format_utc(self.min_time),
                format_utc(self.max_time),
                self.property,
            )
        )

    @classmethod
    def from_tsv(cls, line: str) -> "CatalogEntry":
        parts = line.split("\t")
        if len(parts) != 5:
            raise DomainError(f"catalog line must have 5 fields, got {len(parts)}")
        repo, context, lo, hi, prop = parts
        return cls(repo, context, parse_utc(lo), parse_utc(hi), prop)


def _property_name(prop: Union[PropertyKind, str]) -> str:
    if isinstance(prop, PropertyKind):
        return prop.csv_name
    if prop == FWI_PROPERTY or prop in {k.csv_name for k in PropertyKind}:
        return prop
    raise DomainError(f"unknown property: {prop!r}")


class RepositorySet:
    """Persistent multi-repository (or single-repository) triple store."""

    def __init__(self, root: Union[str, Path], mode: str = MODE_MULTI) -> None:
        if mode not in (MODE_MULTI, MODE_SINGLE):
            raise DomainError(f"mode must be multi or single, got {mode!r}")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        meta_path = self.root / "store.json"
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            if meta.get("mode") != mode:
                raise DomainError(
                    f"store at {self.root} has mode {meta.get('mode')!r}, not {mode!r}"
                )
        else:
            meta_path.write_text(json.dumps({"mode": mode}) + "\n", encoding="utf-8")
        self.mode = mode
        self.catalog: List[CatalogEntry] = []
        self.repositories: Dict[str, Dict[str, NamedGraph]] = {
            repo_id: {} for repo_id in self.repo_ids()
        }
        self._write_lock = threading.RLock()
        self._counter = 0
        self._load()

    # -- identity and routing

    def repo_ids(self) -> Tuple[str, ...]:
        return MULTI_REPO_IDS if self.mode == MODE_MULTI else (SINGLE_REPO_ID,)

    def repo_for_property(self, prop: Union[PropertyKind, str]) -> str:
        name = _property_name(prop)
        return name if self.mode == MODE_MULTI else SINGLE_REPO_ID

    # -- loading and recovery

    def _quad_path(self, repo_id: str) -> Path:
        return self.root / f"{repo_id}.nq"

    def _catalog_path(self) -> Path:
        return self.root / "catalog.tsv"

    def _load(self) -> None:
        entries: List[CatalogEntry] = []
        catalog_path = self._catalog_path()
        catalog_dirty = False
        if catalog_path.exists():
            for line in catalog_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    entry = CatalogEntry.from_tsv(line)
                except DomainError:
                    catalog_dirty = True  # torn tail line from an interrupted write
                    continue
                if entry.repository_id not in self.repositories:
                    raise DomainError(
                        f"catalog references repository {entry.repository_id!r} "
                        f"missing in {self.mode} mode"
                    )
                entries.append(entry)

        loaded: Dict[str, Dict[str, List[Triple]]] = {r: {} for r in self.repo_ids()}
        dirty_repos: Set[str] = set()
        for repo_id in self.repo_ids():
            path = self._quad_path(repo_id)
            if not path.exists():
                continue
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    context, triple = decode_quad(line)
                except DomainError:
                    dirty_repos.add(repo_id)
                    continue
                loaded[repo_id].setdefault(context, []).append(triple)

        committed = {(e.repository_id, e.context) for e in entries}
        kept_entries = []
        for entry in entries:
            if entry.context in loaded[entry.repository_id]:
                kept_entries.append(entry)
            else:
                catalog_dirty = True  # entry without data, drop it
        for repo_id, graphs in loaded.items():
            for context in list(graphs):
                if (repo_id, context) not in committed:
                    del graphs[context]  # uncommitted leftover
                    dirty_repos.add(repo_id)

        seen_contexts: Set[str] = set()
        for entry in kept_entries:
            if entry.context in seen_contexts:
                raise DomainError(f"duplicate graph context: {entry.context}")
            seen_contexts.add(entry.context)
            graph = NamedGraph.of(entry.context, loaded[entry.repository_id][entry.context])
            self.repositories[entry.repository_id][entry.context] = graph
            suffix = entry.context.rsplit(":", 1)[-1]
            if suffix.isdigit():
                self._counter = max(self._counter, int(suffix) + 1)
        self.catalog = kept_entries

        for repo_id in dirty_repos:
            self._rewrite_quads(repo_id)
        if catalog_dirty:
            self._rewrite_catalog()

    def _rewrite_quads(self, repo_id: str) -> None:
        path = self._quad_path(repo_id)
        tmp = path.with_suffix(".nq.tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for context, graph in self.repositories[repo_id].items():
                for triple in sorted(graph.triples, key=encode_term_key):
                    fh.write(encode_quad(context, triple) + "\n")
        tmp.replace(path)

    def _rewrite_catalog(self) -> None:
        path = self._catalog_path()
        tmp = path.with_suffix(".tsv.tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for entry in self.catalog:
                fh.write(entry.to_tsv() + "\n")
        tmp.replace(path)

    # -- write path

    def _append_lines(self, path: Path, lines: List[str]) -> None:
        """Single write seam; tests monkeypatch this to simulate failures."""
        with path.open("a", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in lines))

    def _commit_graph(
        self,
        property_name: str,
        graph: NamedGraph,
        min_time: datetime,
        max_time: datetime,
    ) -> str:
        repo_id = self.repo_for_property(property_name)
        entry = CatalogEntry(repo_id, graph.context, min_time, max_time, property_name)
        with self._write_lock:
            if any(graph.context in repo for repo in self.repositories.values()):
                raise DomainError(f"duplicate graph context: {graph.context}")
            quad_lines = [
                encode_quad(graph.context, t) for t in sorted(graph.triples, key=encode_term_key)
            ]
            self._append_lines(self._quad_path(repo_id), quad_lines)
            self._append_lines(self._catalog_path(), [entry.to_tsv()])
            # disk writes done; now expose the graph to readers
            self.repositories[repo_id][graph.context] = graph
            self.catalog.append(entry)
        return graph.context

    def store_graph(self, batch: Sequence[Observation], prop: PropertyKind) -> str:
        """Algorithm-1 storage path for one pre-cleaned observation batch."""
        if not batch:
            raise DomainError("observation batch is empty")
        if any(obs.property is not prop for obs in batch):
            raise DomainError("batch property does not match the requested property")
        times = [obs.time for obs in batch]
        min_time, max_time = min(times), max(times)
        with self._write_lock:
            context = graph_context(prop.csv_name, min_time, self._counter)
            self._counter += 1
            graph = observations_to_graph(batch, context)
            return self._commit_graph(prop.csv_name, graph, min_time, max_time)

    def store_fwi_graph(self, triples: Iterable[Triple]) -> Optional[str]:
        """Persist inferred event triples as one committed fwi graph."""
        triples = list(triples)
        if not triples:
            return None
        with self._write_lock:
            probe = NamedGraph.of("probe", triples)
            min_time, max_time = graph_time_extrema(probe)
            context = graph_context(FWI_PROPERTY, min_time, self._counter)
            self._counter += 1
            graph = NamedGraph.of(context, triples)
            return self._commit_graph(FWI_PROPERTY, graph, min_time, max_time)

    # -- queries

    def catalog_lookup(
        self, prop: Union[PropertyKind, str], window: TimeRange
    ) -> List[CatalogEntry]:
        """Catalog entries whose time span intersects the window.

        In multi mode only the property's own repository is consulted; in
        single mode property routing is unavailable, so every intersecting
        entry in the undivided repository is returned.
        """
        name = _property_name(prop)
        out = []
        for entry in self.catalog:
            if self.mode == MODE_MULTI and entry.property != name:
                continue
            if entry.intersects(window):
                out.append(entry)
        return out

    def graphs_for(self, entries: Iterable[CatalogEntry]) -> List[NamedGraph]:
        return [self.repositories[e.repository_id][e.context] for e in entries]

    def graph(self, context: str) -> NamedGraph:
        for repo in self.repositories.values():
            if context in repo:
                return repo[context]
        raise DomainError(f"unknown graph context: {context}")

    def triple_count(self) -> int:
        return sum(
            len(graph) for repo in self.repositories.values() for graph in repo.values()
        )

    def fwi_entries(self, window: Optional[TimeRange] = None) -> List[CatalogEntry]:
        return [
            e
            for e in self.catalog
            if e.property == FWI_PROPERTY and (window is None or e.intersects(window))
        ]

    def clear_fwi(self) -> None:
        """Drop all inferred event graphs (benchmark cold-start)."""
        with self._write_lock:
            kept = [e for e in self.catalog if e.property != FWI_PROPERTY]
            dropped = {e.context for e in self.catalog if e.property == FWI_PROPERTY}
            if not dropped:
                return
            self.catalog = kept
            for repo_id in self.repo_ids():
                repo = self.repositories[repo_id]
                if any(c in repo for c in dropped):
                    for context in dropped:
                        repo.pop(context, None)
                    self._rewrite_quads(repo_id)
            self._rewrite_catalog()


def encode_term_key(triple: Triple) -> Tuple[str, str, str]:
    return (triple.s.value, triple.p.value, encode_term(triple.o))


# --- basic graph pattern matching --------------------------------------------


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


PatternTerm = Union[IRI, Literal, Var]
TriplePattern = Tuple[PatternTerm, PatternTerm, PatternTerm]

_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
}


@dataclass(frozen=True, slots=True)
class Comparison:
    """variable <op> numeric-constant, conjoined in a rule filter."""

    var: str
    op: str
    value: float

    def __post_init__(self) -> None:
        if self.op not in _OPS:
            raise DomainError(f"unknown comparison operator: {self.op!r}")
        if self.value != self.value or self.value in (float("inf"), float("-inf")):
            raise DomainError(f"comparison constant must be finite: {self.value!r}")

    def holds(self, term: Term) -> bool:
        """True when the bound term is numeric and satisfies the comparison."""
        if not isinstance(term, Literal):
            return False
        number = term.numeric()
        if number is None:
            return False
        return _OPS[self.op](number, self.value)

    def holds_value(self, number: float) -> bool:
        return _OPS[self.op](number, self.value)


class TripleIndex:
    """Hash indexes over a set of triples for pattern lookups."""

    def __init__(self, graphs_or_triples: Iterable) -> None:
        triples: Set[Triple] = set()
        for item in graphs_or_triples:
            if isinstance(item, NamedGraph):
                triples |= item.triples
            elif isinstance(item, Triple):
                triples.add(item)
            else:
                raise DomainError(f"cannot index {type(item).__name__}")
        self.triples = triples
        self.by_p: Dict[IRI, List[Triple]] = {}
        self.by_po: Dict[Tuple[IRI, Term], List[Triple]] = {}
        self.by_sp: Dict[Tuple[IRI, IRI], List[Triple]] = {}
        self.by_s: Dict[IRI, List[Triple]] = {}
        for t in triples:
            self.by_p.setdefault(t.p, []).append(t)
            self.by_po.setdefault((t.p, t.o), []).append(t)
            self.by_sp.setdefault((t.s, t.p), []).append(t)
            self.by_s.setdefault(t.s, []).append(t)
        self._distinct: Optional[Dict[IRI, Tuple[int, int]]] = None

    def __len__(self) -> int:
        return len(self.triples)

    def candidates(self, s, p, o) -> Iterable[Triple]:
        """Smallest available index bucket for a (possibly None) trio."""
        if s is not None and p is not None and o is not None:
            probe = Triple(s, p, o)
            return (probe,) if probe in self.triples else ()
        if p is not None and o is not None:
            return self.by_po.get((p, o), ())
        if s is not None and p is not None:
            return self.by_sp.get((s, p), ())
        if s is not None:
            return self.by_s.get(s, ())
        if p is not None:
            return self.by_p.get(p, ())
        return self.triples

    def _distinct_counts(self, p: IRI) -> Tuple[int, int]:
        """(distinct subjects, distinct objects) under predicate p."""
        if self._distinct is None:
            counts: Dict[IRI, List[int]] = {key: [0, 0] for key in self.by_p}
            for _, pred in self.by_sp:
                counts[pred][0] += 1
            for pred, _ in self.by_po:
                counts[pred][1] += 1
            self._distinct = {key: (c[0], c[1]) for key, c in counts.items()}
        return self._distinct.get(p, (1, 1))

    def fanout(self, s_known: bool, p: Optional[IRI], o_known: bool, o_const) -> float:
        """Estimated matches per already-bound frontier row for one pattern."""
        if p is not None:
            bucket = self.by_p.get(p)
            if bucket is None:
                return 0.0
            total = len(bucket)
            distinct_s, distinct_o = self._distinct_counts(p)
            if o_const is not None:
                size = float(len(self.by_po.get((p, o_const), ())))
                return min(1.0, size / distinct_s) if s_known else size
            if s_known and o_known:
                return min(1.0, total / (distinct_s * distinct_o))
            if s_known:
                return total / distinct_s
            if o_known:
                return total / distinct_o
            return float(total)
        scale = float(len(self.triples))
        if s_known:
            scale /= 16.0
        if o_known:
            scale /= 16.0
        return max(scale, 1.0)


def _pattern_vars(patterns: Sequence[TriplePattern]) -> Set[str]:
    out: Set[str] = set()
    for pattern in patterns:
        for part in pattern:
            if isinstance(part, Var):
                out.add(part.name)
    return out


def plan_order(patterns: Sequence[TriplePattern], index: TripleIndex) -> List[int]:
    """Left-deep join order minimizing the estimated peak frontier size.

    Greedy ordering with three refinements that matter on star joins like
    the 18-pattern weather shape: per-row fanout estimates from predicate
    statistics (a 15-triple pattern that later fans out 4000x per row must
    not look cheap), eager absorption of patterns that bind no new variable
    (they only filter), and a restart from every possible first pattern,
    keeping the plan whose simulated peak is smallest.
    """
    n = len(patterns)
    if n <= 1:
        return list(range(n))

    def shape(i: int, bound: Set[str]):
        s, p, o = patterns[i]
        s_known = isinstance(s, IRI) or (isinstance(s, Var) and s.name in bound)
        p_const = p if isinstance(p, IRI) else None
        o_const = o if isinstance(o, (IRI, Literal)) else None
        o_known = o_const is not None or (isinstance(o, Var) and o.name in bound)
        return s_known, p_const, o_known, o_const

    def pattern_vars(i: int) -> Set[str]:
        return {part.name for part in patterns[i] if isinstance(part, Var)}

    def absorb(order, remaining, bound: Set[str], frontier: float) -> float:
        # patterns that bind nothing new can only shrink the frontier
        progress = True
        while progress:
            progress = False
            for i in list(remaining):
                if pattern_vars(i) <= bound:
                    frontier *= min(1.0, index.fanout(*shape(i, bound)))
                    order.append(i)
                    remaining.remove(i)
                    progress = True
        return frontier

    def lookahead(i: int, remaining, bound: Set[str], frontier: float) -> float:
        """Peak estimate of taking pattern i now plus the best next step."""
        ext = frontier * max(index.fanout(*shape(i, bound)), 1e-9)
        bound_after = bound | pattern_vars(i)
        rest = [j for j in remaining if j != i]
        after = ext
        for j in list(rest):
            if pattern_vars(j) <= bound_after:
                after *= min(1.0, index.fanout(*shape(j, bound_after)))
                rest.remove(j)
        if not rest:
            return max(ext, after)
        pool = [
            j for j in rest if pattern_vars(j) & bound_after
        ] or rest
        best_next = min(
            after * max(index.fanout(*shape(j, bound_after)), 1e-9) for j in pool
        )
        return max(ext, best_next)

    def simulate(start: int):
        remaining = list(range(n))
        bound: Set[str] = set()
        order: List[int] = []
        frontier = max(index.fanout(*shape(start, bound)), 1e-9)
        peak = frontier
        order.append(start)
        remaining.remove(start)
        bound |= pattern_vars(start)
        while remaining:
            frontier = absorb(order, remaining, bound, frontier)
            if not remaining:
                break
            pool = [i for i in remaining if pattern_vars(i) & bound] or remaining
            scored = sorted(
                (lookahead(i, remaining, bound, frontier),
                 frontier * max(index.fanout(*shape(i, bound)), 1e-9),
                 i)
                for i in pool
            )
            _, ext, choice = scored[0]
            order.append(choice)
            remaining.remove(choice)
            bound |= pattern_vars(choice)
            frontier = ext
            peak = max(peak, frontier)
        return peak, order

    starts = range(n) if n <= 24 else range(1)
    best_peak, best_order = None, None
    for start in starts:
        peak, order = simulate(start)
        if best_peak is None or peak < best_peak:
            best_peak, best_order = peak, order
    return best_order


def match_bgp(
    source: Union[TripleIndex, Iterable],
    patterns: Sequence[TriplePattern],
    filters: Sequence[Comparison] = (),
) -> List[Dict[str, Term]]:
    """All variable bindings satisfying every pattern and every filter.

    Set semantics: duplicate bindings are collapsed. A filter referencing a
    variable that appears in no pattern is a plan-time error; a binding
    whose filtered variable is non-numeric simply drops out.
    """
    index = source if isinstance(source, TripleIndex) else TripleIndex(source)
    pattern_vars = _pattern_vars(patterns)
    filters_by_var: Dict[str, List[Comparison]] = {}
    for comparison in filters:
        if comparison.var not in pattern_vars:
            raise DomainError(
                f"filter references variable ?{comparison.var} not bound by any pattern"
            )
        filters_by_var.setdefault(comparison.var, []).append(comparison)

    order = plan_order(patterns, index)
    frontier: List[Dict[str, Term]] = [{}]
    for i in order:
        s, p, o = patterns[i]
        next_frontier: List[Dict[str, Term]] = []
        for binding in frontier:
            s_val = binding.get(s.name) if isinstance(s, Var) else s
            p_val = binding.get(p.name) if isinstance(p, Var) else p
            o_val = binding.get(o.name) if isinstance(o, Var) else o
            if p_val is not None and not isinstance(p_val, IRI):
                continue  # a literal bound into predicate position can never match
            if s_val is not None and not isinstance(s_val, IRI):
                continue
            for triple in index.candidates(s_val, p_val, o_val):
                extension = dict(binding)
                ok = True
                for part, value in ((s, triple.s), (p, triple.p), (o, triple.o)):
                    if isinstance(part, Var):
                        existing = extension.get(part.name)
                        if existing is None:
                            # filters prune as soon as their variable binds
                            checks = filters_by_var.get(part.name)
                            if checks and not all(c.holds(value) for c in checks):
                                ok = False
                                break
                            extension[part.name] = value
                        elif existing != value:
                            ok = False
                            break
                if ok:
                    next_frontier.append(extension)
        frontier = next_frontier
        if not frontier:
            return []

    results: List[Dict[str, Term]] = []
    seen: Set[Tuple] = set()
    var_order = sorted(pattern_vars)
    for binding in frontier:
        key = tuple(binding[name] for name in var_order)
        if key not in seen:
            seen.add(key)
            results.append(binding)
    return results
