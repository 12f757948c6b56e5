"""Lazy cached inference over the repository set.

Queries never recompute what is already stored: a coverage index records
which time ranges have been fully evaluated under the current rule set.
A query subtracts its window from the coverage, evaluates rules only over
the missing gaps, persists the resulting events (with provenance), extends
the coverage, and then answers every query - cold or warm - by reading
events back from the store.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from . import vocab
from .core import DomainError, FwiClass, TimeRange, ensure_utc, format_utc, parse_utc
from .rules import RuleHit, RuleSet, evaluate_ruleset, hit_triples
from .store import (
    FWI_PROPERTY,
    IRI,
    MODE_SINGLE,
    Literal,
    NamedGraph,
    RepositorySet,
    Triple,
    TripleIndex,
    WEATHER_PROPERTIES,
)


@dataclass(frozen=True)
class FwiEvent:
    """One stored fire-weather event, one (node, slot)."""

    event_iri: str
    node_id: str
    time: datetime
    fwi_class: FwiClass
    rule_name: str  # '+'-joined contributor rule names
    generated_at: Optional[datetime] = None

    def sort_key(self):
        return (self.time, self.node_id)


class CoverageIndex:
    """Disjoint, coalesced time ranges already evaluated, tied to one rule
    set by checksum. Persisted as JSON next to the store."""

    def __init__(self, ruleset_checksum: str, ranges: Iterable[TimeRange] = ()) -> None:
        self.ruleset_checksum = ruleset_checksum
        self.ranges: List[TimeRange] = []
        for r in ranges:
            self.add(r)

    def add(self, window: TimeRange) -> None:
        merged = [window]
        for existing in self.ranges:
            if existing.end < window.start or existing.start > window.end:
                merged.append(existing)  # disjoint, not even touching
            else:
                window = TimeRange(
                    min(existing.start, window.start), max(existing.end, window.end)
                )
                merged[0] = window
        merged[0] = window
        self.ranges = sorted(merged, key=lambda r: r.start)

    def covers(self, window: TimeRange) -> bool:
        return not self.missing_ranges(window)

    def missing_ranges(self, window: TimeRange) -> List[TimeRange]:
        """window minus covered ranges, in time order."""
        gaps: List[TimeRange] = []
        cursor = window.start
        for existing in self.ranges:
            if existing.end <= cursor:
                continue
            if existing.start >= window.end:
                break
            if existing.start > cursor:
                gaps.append(TimeRange(cursor, existing.start))
            cursor = max(cursor, existing.end)
            if cursor >= window.end:
                return gaps
        if cursor < window.end:
            gaps.append(TimeRange(cursor, window.end))
        return gaps

    def to_json_dict(self) -> Dict[str, object]:
        return {
            "ruleset_checksum": self.ruleset_checksum,
            "ranges": [
                {"start": format_utc(r.start), "end": format_utc(r.end)}
                for r in self.ranges
            ],
        }

    def save(self, path: Path) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.to_json_dict(), indent=1), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Path, expected_checksum: str) -> "CoverageIndex":
        data = json.loads(path.read_text(encoding="utf-8"))
        stored = data.get("ruleset_checksum", "")
        if stored != expected_checksum:
            raise DomainError(
                "coverage index was built with a different rule set; "
                "clear stored events or reuse the original rules"
            )
        index = cls(expected_checksum)
        for entry in data.get("ranges", ()):
            index.add(TimeRange(parse_utc(entry["start"]), parse_utc(entry["end"])))
        return index


def _resolve_events(hits: Sequence[RuleHit]) -> List[Tuple[RuleHit, List[str]]]:
    """Pick one winner per (node, time): highest class ordinal, ties broken
    by rule name. Every matching rule is kept as a contributor."""
    grouped: Dict[Tuple[IRI, str], List[RuleHit]] = {}
    for hit in hits:
        grouped.setdefault((hit.node, hit.time_lexical), []).append(hit)
    resolved = []
    for key in sorted(grouped, key=lambda k: (k[1], k[0].value)):
        candidates = grouped[key]
        winner = min(
            candidates, key=lambda h: (-h.fwi_class().ordinal, h.rule.name)
        )
        contributors = sorted({h.rule.name for h in candidates})
        resolved.append((winner, contributors))
    return resolved


class InferenceEngine:
    """Rule evaluation with persistent result caching.

    `rule_evaluations` counts individual rule applications; a query whose
    window is already covered performs none.
    """

    def __init__(
        self,
        repos: RepositorySet,
        ruleset: RuleSet,
        coverage_path: Optional[Path] = None,
    ) -> None:
        self.repos = repos
        self.ruleset = ruleset
        self.coverage_path = Path(coverage_path or Path(repos.root) / "coverage.json")
        checksum = ruleset.checksum()
        if self.coverage_path.exists():
            self.coverage = CoverageIndex.load(self.coverage_path, checksum)
        else:
            self.coverage = CoverageIndex(checksum)
        self.rule_evaluations = 0

    def reset_coverage(self) -> None:
        self.coverage = CoverageIndex(self.ruleset.checksum())
        if self.coverage_path.exists():
            self.coverage_path.unlink()

    # -- write path -----------------------------------------------------

    def ensure_coverage(self, window: TimeRange) -> None:
        """Evaluate rules over any uncovered part of the window, persist
        events, then mark the window covered. Coverage only advances after
        a successful persist, so a failed write leaves a retryable gap."""
        for gap in self.coverage.missing_ranges(window):
            triples = self._infer_gap(gap)
            if triples:
                self.repos.store_fwi_graph(triples)
            self.coverage.add(gap)
            self.coverage.save(self.coverage_path)

    def _working_graphs(self, gap: TimeRange) -> List[NamedGraph]:
        """Graphs the rule pass reads for one gap.

        Multi mode routes through the catalog: each weather repository
        contributes only the graphs whose time span intersects the gap. The
        single-repository baseline has no catalog to consult, so its query
        surface is the whole undivided store; out-of-gap hits are discarded
        afterwards.
        """
        if self.repos.mode == MODE_SINGLE:
            return [
                graph
                for repo in self.repos.repositories.values()
                for graph in repo.values()
            ]
        graphs = []
        seen_contexts = set()
        for prop in WEATHER_PROPERTIES:
            for entry in self.repos.catalog_lookup(prop, gap):
                if entry.context not in seen_contexts and entry.property != FWI_PROPERTY:
                    seen_contexts.add(entry.context)
                    graphs.append(self.repos.graph(entry.context))
        return graphs

    def _infer_gap(self, gap: TimeRange) -> Set[Triple]:
        graphs = self._working_graphs(gap)
        if not graphs:
            return set()
        index = TripleIndex(graphs)
        hits = evaluate_ruleset(self.ruleset.rules, index)
        self.rule_evaluations += len(self.ruleset.rules)
        # graphs span whole batches; keep only events inside the gap
        in_gap = [h for h in hits if gap.contains(h.time)]
        stamp = Literal(format_utc(datetime.now(timezone.utc)), "dateTime")
        triples: Set[Triple] = set()
        for winner, contributors in _resolve_events(in_gap):
            event = winner.event()
            triples |= hit_triples(winner)
            triples.add(Triple(event, IRI(vocab.PROV_GENERATED_AT_TIME), stamp))
            for name in contributors:
                triples.add(
                    Triple(event, IRI(vocab.PROV_WAS_GENERATED_BY), IRI(vocab.RULE_BASE + name))
                )
        return triples

    # -- read path ------------------------------------------------------

    def search_events(
        self, window: TimeRange, node_filter: Optional[str] = None
    ) -> List[FwiEvent]:
        """Read stored events intersecting the window; never infers."""
        events: List[FwiEvent] = []
        for entry in self.repos.fwi_entries(window):
            for event in _events_from_graph(self.repos.graph(entry.context)):
                if not window.contains(event.time):
                    continue
                if node_filter is not None and event.node_id != node_filter:
                    continue
                events.append(event)
        unique = {e.event_iri: e for e in events}
        return sorted(unique.values(), key=FwiEvent.sort_key)

    def query(
        self, window: TimeRange, node_filter: Optional[str] = None
    ) -> List[FwiEvent]:
        """Ensure coverage, then answer from the store."""
        self.ensure_coverage(window)
        return self.search_events(window, node_filter)


def _events_from_graph(graph) -> List[FwiEvent]:
    by_subject: Dict[IRI, Dict[str, object]] = {}
    for t in graph.triples:
        record = by_subject.setdefault(t.s, {"rules": []})
        if t.p.value == vocab.PROV_AT_TIME and isinstance(t.o, Literal):
            record["time"] = t.o.time()
        elif t.p.value == vocab.PROV_AT_LOCATION and isinstance(t.o, IRI):
            record["node"] = t.o.value
        elif t.p.value == vocab.RDF_TYPE and isinstance(t.o, IRI):
            record["class"] = t.o.value
        elif t.p.value == vocab.PROV_WAS_GENERATED_BY and isinstance(t.o, IRI):
            record["rules"].append(t.o.value)
        elif t.p.value == vocab.PROV_GENERATED_AT_TIME and isinstance(t.o, Literal):
            record["generated"] = t.o.time()
    events = []
    for subject, record in by_subject.items():
        time = record.get("time")
        node = record.get("node")
        class_iri = record.get("class")
        if time is None or node is None or class_iri is None:
            continue  # not an event subject
        if not class_iri.startswith(vocab.FWI):
            continue
        fwi_class = FwiClass.from_ontology_name(class_iri[len(vocab.FWI):])
        names = sorted(
            iri[len(vocab.RULE_BASE):]
            for iri in record["rules"]
            if iri.startswith(vocab.RULE_BASE)
        )
        events.append(
            FwiEvent(
                event_iri=subject.value,
                node_id=node.rsplit("/", 1)[-1],
                time=ensure_utc(time),
                fwi_class=fwi_class,
                rule_name="+".join(names) if names else "",
                generated_at=record.get("generated"),
            )
        )
    return events
