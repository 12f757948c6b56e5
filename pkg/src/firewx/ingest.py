"""Observation CSV parsing, outlier cleaning, and the synthetic stream
generator used for desk-scale testing and benchmarks.

The wire format is a header-less six-field CSV, one observation per line:

    2012-01-02 03:50:00, air_temperature, AT_1, SN_1, 13.5, °C

Timestamps are local study-region time and are converted to UTC with a
configurable fixed offset. Cleaning removes values outside instrument
ranges, then values that disagree with the median of the k nearest nodes
in the same 10-minute slot.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .core import (
    DEFAULT_UTC_OFFSET_MINUTES,
    STUDY_BBOX,
    DomainError,
    GeoPoint,
    PropertyKind,
    TimeRange,
    floor_to_slot,
    local_to_utc,
    utc_to_local_minutes,
)
from .idw import great_circle_km


class ParseError(ValueError):
    """A CSV line failed to parse; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Observation:
    time: datetime  # aware UTC
    property: PropertyKind
    sensor_id: str
    node_id: str
    value: float
    unit: str

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise DomainError(f"observation value must be finite: {self.value!r}")
        if self.unit != self.property.unit:
            raise DomainError(
                f"unit {self.unit!r} does not match {self.property.csv_name} ({self.property.unit!r})"
            )


class NodeRegistry:
    """node_id -> GeoPoint, with distance-ranked neighbor lookup."""

    def __init__(self, locations: Optional[Dict[str, GeoPoint]] = None) -> None:
        self._locations: Dict[str, GeoPoint] = {}
        for node_id, point in (locations or {}).items():
            self.add(node_id, point)

    def add(self, node_id: str, point: GeoPoint) -> None:
        if node_id in self._locations:
            raise DomainError(f"duplicate node id: {node_id!r}")
        self._locations[node_id] = point

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._locations

    def __getitem__(self, node_id: str) -> GeoPoint:
        try:
            return self._locations[node_id]
        except KeyError:
            raise DomainError(f"unknown node id: {node_id!r}") from None

    def __len__(self) -> int:
        return len(self._locations)

    def ids(self) -> List[str]:
        return sorted(self._locations)

    def items(self) -> List[Tuple[str, GeoPoint]]:
        return sorted(self._locations.items())

    def get(self, node_id: str, default=None):
        return self._locations.get(node_id, default)

    def neighbors_of(self, node_id: str) -> List[str]:
        """Other nodes ordered by (distance, id) from node_id."""
        origin = self[node_id]
        ranked = sorted(
            (great_circle_km(origin, p), other)
            for other, p in self._locations.items()
            if other != node_id
        )
        return [other for _, other in ranked]


DEFAULT_PHYSICAL_RANGES = {
    PropertyKind.AIR_TEMPERATURE: (-10.0, 60.0),
    PropertyKind.RELATIVE_HUMIDITY: (0.0, 100.0),
    PropertyKind.WIND_SPEED: (0.0, 75.0),
}

DEFAULT_RESIDUAL_THRESHOLDS = {
    PropertyKind.AIR_TEMPERATURE: 5.0,
    PropertyKind.RELATIVE_HUMIDITY: 20.0,
    PropertyKind.WIND_SPEED: 8.0,
}


@dataclass(frozen=True)
class CleanConfig:
    physical_range: Dict[PropertyKind, Tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_PHYSICAL_RANGES)
    )
    residual_threshold: Dict[PropertyKind, float] = field(
        default_factory=lambda: dict(DEFAULT_RESIDUAL_THRESHOLDS)
    )
    neighbor_count: int = 3
    policy: str = "drop"  # drop removes outliers; flag only reports them

    def __post_init__(self) -> None:
        if self.neighbor_count < 1:
            raise DomainError(f"neighbor_count must be >= 1, got {self.neighbor_count}")
        if self.policy not in ("drop", "flag"):
            raise DomainError(f"policy must be drop or flag, got {self.policy!r}")
        for kind, (lo, hi) in self.physical_range.items():
            if not lo < hi:
                raise DomainError(f"physical range for {kind.csv_name} must have min < max")
        for kind, threshold in self.residual_threshold.items():
            if not threshold > 0:
                raise DomainError(f"residual threshold for {kind.csv_name} must be > 0")


REASON_RANGE = "range"
REASON_NEIGHBOR = "neighbor_residual"


@dataclass
class OutlierReport:
    removed: List[Tuple[Observation, str]] = field(default_factory=list)

    def counts(self) -> Dict[str, int]:
        out = {REASON_RANGE: 0, REASON_NEIGHBOR: 0}
        for _, reason in self.removed:
            out[reason] += 1
        return out

    def __len__(self) -> int:
        return len(self.removed)

    def to_csv(self) -> str:
        lines = []
        for obs, reason in self.removed:
            local = obs.time  # report keeps UTC; consumers convert as needed
            lines.append(
                f"{local.strftime('%Y-%m-%d %H:%M:%S')},{obs.property.csv_name},"
                f"{obs.sensor_id},{obs.node_id},{obs.value},{reason}"
            )
        return "\n".join(lines) + ("\n" if lines else "")


def parse_observation_line(
    line: str,
    line_no: int = 1,
    utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES,
) -> Observation:
    """Parse one CSV record; fields are positional, spaces after commas ok."""
    fields = [f.strip() for f in line.split(",")]
    if len(fields) != 6:
        raise ParseError(line_no, f"expected 6 fields, got {len(fields)}")
    raw_time, raw_property, sensor_id, node_id, raw_value, unit = fields
    try:
        local = datetime.strptime(raw_time, "%Y-%m-%d %H:%M:%S")
    except ValueError:
        raise ParseError(line_no, f"unparsable timestamp: {raw_time!r}") from None
    try:
        kind = PropertyKind.from_csv_name(raw_property)
    except DomainError:
        raise ParseError(line_no, f"unknown property: {raw_property!r}") from None
    try:
        value = float(raw_value)
    except ValueError:
        raise ParseError(line_no, f"unparsable value: {raw_value!r}") from None
    if not math.isfinite(value):
        raise ParseError(line_no, f"non-finite value: {raw_value!r}")
    if unit != kind.unit:
        raise ParseError(line_no, f"unit {unit!r} does not match {kind.csv_name}")
    if not sensor_id or not node_id:
        raise ParseError(line_no, "empty sensor or node id")
    return Observation(
        time=local_to_utc(local, utc_offset_minutes),
        property=kind,
        sensor_id=sensor_id,
        node_id=node_id,
        value=value,
        unit=unit,
    )


def parse_csv(
    text: str, utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES
) -> List[Observation]:
    """Parse a whole CSV document, skipping blank lines."""
    out = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        out.append(parse_observation_line(line, line_no, utc_offset_minutes))
    return out


def serialize_observation(obs: Observation, utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES) -> str:
    """Inverse of parse_observation_line (canonical spacing, local time)."""
    local = obs.time + timedelta(minutes=utc_offset_minutes)
    return (
        f"{local.strftime('%Y-%m-%d %H:%M:%S')}, {obs.property.csv_name}, "
        f"{obs.sensor_id}, {obs.node_id}, {obs.value:g}, {obs.unit}"
    )


def clean_stream(
    observations: Sequence[Observation],
    nodes: NodeRegistry,
    cfg: Optional[CleanConfig] = None,
) -> Tuple[List[Observation], OutlierReport]:
    """Two-stage outlier removal against the input snapshot.

    Stage 1 drops values outside the instrument range. Stage 2 compares each
    surviving value with the median of same-slot readings at the k nearest
    other nodes; the neighbor test is skipped when fewer than k neighbor
    nodes report in the slot. Neighbor medians are computed over the
    stage-1 survivors, so stage-2 removals do not cascade.
    """
    cfg = cfg or CleanConfig()
    report = OutlierReport()
    for obs in observations:
        if obs.node_id not in nodes:
            raise DomainError(f"unknown node id: {obs.node_id!r}")

    in_range: List[Observation] = []
    for obs in observations:
        lo, hi = cfg.physical_range[obs.property]
        if obs.value < lo or obs.value > hi:
            report.removed.append((obs, REASON_RANGE))
        else:
            in_range.append(obs)

    # (property, slot) -> node -> values reported in that slot
    slot_values: Dict[Tuple[PropertyKind, datetime], Dict[str, List[float]]] = {}
    for obs in in_range:
        key = (obs.property, floor_to_slot(obs.time))
        slot_values.setdefault(key, {}).setdefault(obs.node_id, []).append(obs.value)

    neighbor_order: Dict[str, List[str]] = {}

    clean: List[Observation] = []
    for obs in in_range:
        key = (obs.property, floor_to_slot(obs.time))
        per_node = slot_values[key]
        if obs.node_id not in neighbor_order:
            neighbor_order[obs.node_id] = nodes.neighbors_of(obs.node_id)
        neighbor_vals = []
        for other in neighbor_order[obs.node_id]:
            if other in per_node:
                neighbor_vals.append(statistics.median(per_node[other]))
                if len(neighbor_vals) == cfg.neighbor_count:
                    break
        if len(neighbor_vals) >= cfg.neighbor_count:
            median = statistics.median(neighbor_vals)
            if abs(obs.value - median) > cfg.residual_threshold[obs.property]:
                report.removed.append((obs, REASON_NEIGHBOR))
                continue
        clean.append(obs)

    if cfg.policy == "flag":
        return list(observations), report
    return clean, report


# Synthetic stream model: each property follows a diurnal sinusoid with a
# small per-node offset and seeded noise. Peaks: temperature 15:00, humidity
# 03:00 (anti-phase), wind 18:00 local.
SYNTH_MODEL = {
    PropertyKind.AIR_TEMPERATURE: {"mean": 24.0, "amp": 7.0, "noise": 0.3, "node_step": 0.6, "clamp": (None, None)},
    PropertyKind.RELATIVE_HUMIDITY: {"mean": 60.0, "amp": -20.0, "noise": 1.2, "node_step": 1.2, "clamp": (5.0, 100.0)},
    PropertyKind.WIND_SPEED: {"mean": 5.5, "amp": 3.0, "noise": 0.35, "node_step": 0.25, "clamp": (0.2, 24.0)},
}

_SENSOR_PREFIX = {
    PropertyKind.AIR_TEMPERATURE: "AT",
    PropertyKind.RELATIVE_HUMIDITY: "RH",
    PropertyKind.WIND_SPEED: "WS",
}

_PROPERTY_ORDER = [
    PropertyKind.AIR_TEMPERATURE,
    PropertyKind.RELATIVE_HUMIDITY,
    PropertyKind.WIND_SPEED,
]


def sensor_id_for(kind: PropertyKind, node_id: str) -> str:
    """AT_1 for node SN_1 and so on; falls back to the full node id."""
    suffix = node_id.rsplit("_", 1)[-1]
    return f"{_SENSOR_PREFIX[kind]}_{suffix}"


def default_node_registry(n_nodes: int = 5) -> NodeRegistry:
    """SN_1..SN_n spread across the study-region bounding box."""
    south, west, north, east = STUDY_BBOX
    registry = NodeRegistry()
    for i in range(n_nodes):
        frac = (i + 0.5) / n_nodes
        lat = south + frac * (north - south)
        lon = west + ((i * 2 + 1) % n_nodes + 0.5) / n_nodes * (east - west)
        registry.add(f"SN_{i + 1}", GeoPoint(round(lat, 6), round(lon, 6)))
    return registry


def generate_synthetic_stream(
    nodes: NodeRegistry,
    time_range: TimeRange,
    seed: int,
    fault_rate: float = 0.0,
    utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES,
    return_faults: bool = False,
):
    """Emit a deterministic CSV stream of 10-minute observations.

    Faults replace a record's value with a gross outlier at 5-8x that
    property's residual threshold, in a random direction. With
    return_faults=True, also returns the set of (time, property, node_id)
    keys that were faulted, for recall measurement.
    """
    if len(nodes) == 0:
        raise DomainError("node registry is empty")
    if not 0.0 <= fault_rate < 1.0:
        raise DomainError(f"fault_rate must be in [0, 1), got {fault_rate}")
    rng = random.Random(seed)
    node_ids = nodes.ids()
    n = len(node_ids)
    lines: List[str] = []
    faults: Set[Tuple[datetime, PropertyKind, str]] = set()
    for slot in time_range.slots():
        local_minutes = utc_to_local_minutes(slot, utc_offset_minutes)
        hfrac = local_minutes / 60.0
        base = math.sin(2.0 * math.pi * (hfrac - 9.0) / 24.0)
        base_wind = math.sin(2.0 * math.pi * (hfrac - 12.0) / 24.0)
        local_text = (slot + timedelta(minutes=utc_offset_minutes)).strftime("%Y-%m-%d %H:%M:%S")
        for node_index, node_id in enumerate(node_ids):
            centered = node_index - (n - 1) / 2.0
            for kind in _PROPERTY_ORDER:
                m = SYNTH_MODEL[kind]
                wave = base_wind if kind is PropertyKind.WIND_SPEED else base
                value = m["mean"] + m["amp"] * wave + m["node_step"] * centered + rng.gauss(0.0, m["noise"])
                lo, hi = m["clamp"]
                if lo is not None:
                    value = max(lo, value)
                if hi is not None:
                    value = min(hi, value)
                if fault_rate > 0.0 and rng.random() < fault_rate:
                    magnitude = (5.0 + 3.0 * rng.random()) * DEFAULT_RESIDUAL_THRESHOLDS[kind]
                    value += magnitude if rng.random() < 0.5 else -magnitude
                    faults.add((slot, kind, node_id))
                lines.append(
                    f"{local_text}, {kind.csv_name}, {sensor_id_for(kind, node_id)}, "
                    f"{node_id}, {value:.1f}, {kind.unit}"
                )
    text = "\n".join(lines) + "\n"
    if return_faults:
        return text, faults
    return text
