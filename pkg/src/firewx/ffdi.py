"""McArthur Mk5 forest fire danger index: closed-form scorer plus the
grid-partitioned rule-table generator.

The scorer is the ground truth the generated rule tables approximate. Each
grid box (one temperature x humidity x wind-speed interval) is classified
by scoring its midpoint, then emitted as one construct rule whose filters
are the box bounds. Lower bounds are inclusive; upper bounds are strict
except at each axis's final edge, so the boxes tile the grid exactly with
the outermost edge closed.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from . import vocab
from .core import (
    ClassBands,
    DEFAULT_BANDS,
    DomainError,
    FwiClass,
    class_from_score,
    mps_to_kmh,
)
from .rules import Rule, RuleSet
from .store import Comparison, IRI, TriplePattern, Var

DEFAULT_DROUGHT_FACTOR = 5.0


@dataclass(frozen=True)
class FfdiInput:
    """One scoring request. Wind is km/h here; sensors report m/s."""

    temperature_c: float
    humidity_pct: float
    wind_kmh: float
    drought_factor: float = DEFAULT_DROUGHT_FACTOR

    def __post_init__(self) -> None:
        for name in ("temperature_c", "humidity_pct", "wind_kmh", "drought_factor"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise DomainError(f"humidity out of [0, 100]: {self.humidity_pct}")
        if self.wind_kmh < 0.0:
            raise DomainError(f"negative wind speed: {self.wind_kmh}")
        if not 0.0 < self.drought_factor <= 10.0:
            raise DomainError(f"drought factor out of (0, 10]: {self.drought_factor}")


def ffdi_score(inp: FfdiInput) -> float:
    return 2.0 * math.exp(
        -0.45
        + 0.987 * math.log(inp.drought_factor)
        - 0.0345 * inp.humidity_pct
        + 0.0338 * inp.temperature_c
        + 0.0234 * inp.wind_kmh
    )


def classify_ffdi(inp: FfdiInput, bands: ClassBands = DEFAULT_BANDS) -> FwiClass:
    return class_from_score(ffdi_score(inp), bands)


def agreement(a: FwiClass, b: FwiClass, granularity: str = "major") -> bool:
    if granularity == "major":
        return a.major == b.major
    if granularity == "full15":
        return a == b
    raise DomainError(f"unknown granularity: {granularity!r}")


def agreement_fraction(
    expected: Sequence[FwiClass], actual: Sequence[FwiClass], granularity: str = "major"
) -> float:
    if len(expected) != len(actual):
        raise DomainError("sequences differ in length")
    if not expected:
        raise DomainError("nothing to compare")
    hits = sum(1 for a, b in zip(expected, actual) if agreement(a, b, granularity))
    return hits / len(expected)


def _segment_edges(segments: Sequence[Tuple[float, float, float]]) -> Tuple[float, ...]:
    """Concatenate (start, stop, step) runs into one ascending edge list."""
    edges: List[float] = []
    for start, stop, step in segments:
        count = round((stop - start) / step)
        if count < 1 or abs(start + count * step - stop) > 1e-9:
            raise DomainError(f"step {step} does not divide [{start}, {stop}]")
        edges.extend(start + i * step for i in range(count))
    edges.append(segments[-1][1])
    return tuple(edges)


def _check_edges(name: str, edges: Sequence[float]) -> Tuple[float, ...]:
    edges = tuple(float(e) for e in edges)
    if len(edges) < 2:
        raise DomainError(f"{name} needs at least two edges")
    for a, b in zip(edges, edges[1:]):
        if not (math.isfinite(a) and b > a):
            raise DomainError(f"{name} edges must be strictly increasing")
    return edges


@dataclass(frozen=True)
class RuleGridSpec:
    """Axis partitions for rule generation. Wind edges are m/s to match
    the stored sensor values; conversion to km/h happens only when scoring
    box midpoints."""

    temperature_edges: Tuple[float, ...]
    humidity_edges: Tuple[float, ...]
    wind_edges: Tuple[float, ...]
    bands: ClassBands = DEFAULT_BANDS
    drought_factor: float = DEFAULT_DROUGHT_FACTOR

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "temperature_edges", _check_edges("temperature", self.temperature_edges)
        )
        object.__setattr__(
            self, "humidity_edges", _check_edges("humidity", self.humidity_edges)
        )
        object.__setattr__(self, "wind_edges", _check_edges("wind", self.wind_edges))
        if self.humidity_edges[0] < 0.0 or self.humidity_edges[-1] > 100.0:
            raise DomainError("humidity edges must stay within [0, 100]")
        if self.wind_edges[0] < 0.0:
            raise DomainError("wind edges must be non-negative")
        if not 0.0 < self.drought_factor <= 10.0:
            raise DomainError(f"drought factor out of (0, 10]: {self.drought_factor}")

    @property
    def box_count(self) -> int:
        return (
            (len(self.temperature_edges) - 1)
            * (len(self.humidity_edges) - 1)
            * (len(self.wind_edges) - 1)
        )

    def to_json_dict(self) -> Dict[str, object]:
        return {
            "temperature_edges": list(self.temperature_edges),
            "humidity_edges": list(self.humidity_edges),
            "wind_edges": list(self.wind_edges),
            "drought_factor": self.drought_factor,
            "bands": {
                "major_edges": list(self.bands.major_edges),
                "extreme_sub_edges": list(self.bands.extreme_sub_edges),
            },
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, object]) -> "RuleGridSpec":
        bands_data = data.get("bands")
        bands = DEFAULT_BANDS
        if bands_data:
            bands = ClassBands(
                major_edges=tuple(bands_data["major_edges"]),
                extreme_sub_edges=tuple(bands_data["extreme_sub_edges"]),
            )
        return cls(
            temperature_edges=tuple(data["temperature_edges"]),
            humidity_edges=tuple(data["humidity_edges"]),
            wind_edges=tuple(data["wind_edges"]),
            bands=bands,
            drought_factor=float(data.get("drought_factor", DEFAULT_DROUGHT_FACTOR)),
        )


# Non-uniform by design: fine steps where the index is steep (warm, dry,
# windy afternoons), coarse where whole boxes land in one class anyway.
DEFAULT_GRID = RuleGridSpec(
    temperature_edges=_segment_edges([(0, 15, 3), (15, 33, 1.5), (33, 45, 3)]),
    humidity_edges=_segment_edges([(0, 30, 10), (30, 90, 4), (90, 100, 10)]),
    wind_edges=_segment_edges([(0, 10, 0.625), (10, 25, 2.5)]),
)


_SENSOR_TAGS = (
    ("RH", vocab.CF_RELATIVE_HUMIDITY, vocab.UNIT_PERCENT),
    ("WS", vocab.CF_WIND_SPEED, vocab.UNIT_METER_PER_SECOND),
    ("AT", vocab.CF_AIR_TEMPERATURE, vocab.UNIT_DEGREE_CELSIUS),
)


def weather_patterns() -> Tuple[TriplePattern, ...]:
    """The 18-pattern join every generated rule shares: for each of the
    three properties, one observation with its sampling time, unit, value,
    and the platform its sensor is deployed on. ?node and ?T are common."""
    patterns: List[TriplePattern] = []
    for tag, property_iri, unit_iri in _SENSOR_TAGS:
        ob = Var(f"{tag}_OB1")
        patterns.extend(
            [
                (ob, IRI(vocab.SSN_OBSERVED_PROPERTY), IRI(property_iri)),
                (ob, IRI(vocab.SSN_OBSERVATION_SAMPLING_TIME), Var("T")),
                (ob, IRI(vocab.DUL_UNIT_OF_MEASURE), IRI(unit_iri)),
                (ob, IRI(vocab.SSN_OBSERVED_BY), Var(f"{tag}_S1")),
                (Var(f"{tag}_S1"), IRI(vocab.SSN_DEPLOYED_ON_PLATFORM), Var("node")),
                (ob, IRI(vocab.SSN_HAS_VALUE), Var(f"{tag}_OB1V")),
            ]
        )
    return tuple(patterns)


def _construct_templates(fwi_class: FwiClass) -> Tuple[TriplePattern, ...]:
    event = Var("FireEvent_1")
    return (
        (event, IRI(vocab.PROV_AT_LOCATION), Var("node")),
        (event, IRI(vocab.PROV_AT_TIME), Var("T")),
        (event, IRI(vocab.RDF_TYPE), IRI(vocab.FWI + fwi_class.ontology_name)),
    )


def _box_filters(spec: RuleGridSpec, bounds) -> Tuple[Comparison, ...]:
    (t_lo, t_hi), (h_lo, h_hi), (w_lo, w_hi) = bounds
    out = []
    for var, lo, hi, edges in (
        ("RH_OB1V", h_lo, h_hi, spec.humidity_edges),
        ("WS_OB1V", w_lo, w_hi, spec.wind_edges),
        ("AT_OB1V", t_lo, t_hi, spec.temperature_edges),
    ):
        out.append(Comparison(var, ">=", lo))
        upper_op = "<=" if hi == edges[-1] else "<"
        out.append(Comparison(var, upper_op, hi))
    return tuple(out)


def generate_rule_table(spec: RuleGridSpec = DEFAULT_GRID) -> RuleSet:
    """One rule per grid box, classified at the box midpoint."""
    shared_where = weather_patterns()
    rules: List[Rule] = []
    t_edges, h_edges, w_edges = (
        spec.temperature_edges,
        spec.humidity_edges,
        spec.wind_edges,
    )
    for t_lo, t_hi in zip(t_edges, t_edges[1:]):
        for h_lo, h_hi in zip(h_edges, h_edges[1:]):
            for w_lo, w_hi in zip(w_edges, w_edges[1:]):
                midpoint = FfdiInput(
                    temperature_c=(t_lo + t_hi) / 2.0,
                    humidity_pct=(h_lo + h_hi) / 2.0,
                    wind_kmh=mps_to_kmh((w_lo + w_hi) / 2.0),
                    drought_factor=spec.drought_factor,
                )
                fwi_class = class_from_score(ffdi_score(midpoint), spec.bands)
                rules.append(
                    Rule(
                        name=f"box_t{t_lo:g}_h{h_lo:g}_w{w_lo:g}",
                        construct_templates=_construct_templates(fwi_class),
                        where_patterns=shared_where,
                        filters=_box_filters(
                            spec, ((t_lo, t_hi), (h_lo, h_hi), (w_lo, w_hi))
                        ),
                    )
                )
    return RuleSet(
        tuple(rules),
        metadata={"generator": "ffdi-grid", "grid": spec.to_json_dict()},
    )


def grid_lookup(spec: RuleGridSpec):
    """Classify (t, h, w_mps) the way the generated table would: find the
    covering box, return its midpoint class, or None outside the grid."""

    def classify(t: float, h: float, w: float):
        axes = (
            (t, spec.temperature_edges),
            (h, spec.humidity_edges),
            (w, spec.wind_edges),
        )
        mids = []
        for value, edges in axes:
            if value < edges[0] or value > edges[-1]:
                return None
            i = bisect.bisect_right(edges, value) - 1
            i = min(i, len(edges) - 2)  # top edge folds into the last box
            mids.append((edges[i] + edges[i + 1]) / 2.0)
        midpoint = FfdiInput(
            temperature_c=mids[0],
            humidity_pct=mids[1],
            wind_kmh=mps_to_kmh(mids[2]),
            drought_factor=spec.drought_factor,
        )
        return class_from_score(ffdi_score(midpoint), spec.bands)

    return classify
