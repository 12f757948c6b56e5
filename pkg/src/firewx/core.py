"""Shared domain types: locations, time ranges, sensor properties, and the
15-level fire-weather classification lattice.

All timestamps are timezone-aware UTC internally. Sensor files carry local
study-region time; conversion uses a configurable fixed UTC offset (default
+10:00, no DST handling).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Iterator, Optional, Tuple

DEFAULT_UTC_OFFSET_MINUTES = 600  # study region is UTC+10, no DST
SLOT_MINUTES = 10  # sensor sampling interval

# Default synthetic-deployment bounding box (south, west, north, east).
STUDY_BBOX = (-28.2400, 153.2600, -28.2200, 153.2800)


class DomainError(ValueError):
    """A value violates a domain contract (range, finiteness, ordering)."""


def _require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 point in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        lat = _require_finite("lat_deg", self.lat_deg)
        lon = _require_finite("lon_deg", self.lon_deg)
        if not -90.0 <= lat <= 90.0:
            raise DomainError(f"lat_deg out of range [-90, 90]: {lat}")
        if not -180.0 <= lon <= 180.0:
            raise DomainError(f"lon_deg out of range [-180, 180]: {lon}")


def ensure_utc(t: datetime) -> datetime:
    """Normalize a datetime to aware UTC; naive input is taken as UTC."""
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; 'Z' suffix and missing seconds accepted."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        t = datetime.fromisoformat(s)
    except ValueError as exc:
        raise DomainError(f"unparsable timestamp: {text!r}") from exc
    return ensure_utc(t)


def format_utc(t: datetime) -> str:
    """Canonical wire form: YYYY-MM-DDTHH:MM:SSZ."""
    return ensure_utc(t).strftime("%Y-%m-%dT%H:%M:%SZ")


def local_to_utc(local: datetime, utc_offset_minutes: int) -> datetime:
    """Convert a naive local study-region time to aware UTC."""
    if local.tzinfo is not None:
        return ensure_utc(local)
    return (local - timedelta(minutes=utc_offset_minutes)).replace(tzinfo=timezone.utc)


def utc_to_local_minutes(t: datetime, utc_offset_minutes: int) -> int:
    """Local time-of-day in minutes since midnight (for day/night splits)."""
    local = ensure_utc(t) + timedelta(minutes=utc_offset_minutes)
    return local.hour * 60 + local.minute


def floor_to_slot(t: datetime, slot_minutes: int = SLOT_MINUTES) -> datetime:
    """Floor a timestamp onto the sampling-slot grid."""
    t = ensure_utc(t)
    minute = (t.minute // slot_minutes) * slot_minutes
    return t.replace(minute=minute, second=0, microsecond=0)


def ceil_to_slot(t: datetime, slot_minutes: int = SLOT_MINUTES) -> datetime:
    floored = floor_to_slot(t, slot_minutes)
    if floored == ensure_utc(t).replace(microsecond=0) and t.second == 0 and t.microsecond == 0:
        return floored
    return floored + timedelta(minutes=slot_minutes)


@dataclass(frozen=True)
class TimeRange:
    """Half-open interval [start, end) of aware UTC timestamps."""

    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", ensure_utc(self.start))
        object.__setattr__(self, "end", ensure_utc(self.end))
        if not self.start < self.end:
            raise DomainError(f"TimeRange requires start < end, got [{self.start}, {self.end})")

    def contains(self, t: datetime) -> bool:
        t = ensure_utc(t)
        return self.start <= t < self.end

    def intersects(self, other: "TimeRange") -> bool:
        return self.start < other.end and other.start < self.end

    def duration(self) -> timedelta:
        return self.end - self.start

    def aligned(self, slot_minutes: int = SLOT_MINUTES) -> "TimeRange":
        """Expand outward onto the slot grid."""
        return TimeRange(floor_to_slot(self.start, slot_minutes), ceil_to_slot(self.end, slot_minutes))

    def slots(self, slot_minutes: int = SLOT_MINUTES) -> Iterator[datetime]:
        """Slot starts covering [start, end), assuming aligned bounds."""
        step = timedelta(minutes=slot_minutes)
        t = floor_to_slot(self.start, slot_minutes)
        while t < self.end:
            yield t
            t += step


class PropertyKind(Enum):
    """The three weather variables the engine consumes."""

    AIR_TEMPERATURE = ("air_temperature", "°C")
    RELATIVE_HUMIDITY = ("relative_humidity", "%")
    WIND_SPEED = ("wind_speed", "m/s")

    def __init__(self, csv_name: str, unit: str) -> None:
        self.csv_name = csv_name
        self.unit = unit

    @classmethod
    def from_csv_name(cls, name: str) -> "PropertyKind":
        for kind in cls:
            if kind.csv_name == name:
                return kind
        raise DomainError(f"unknown property: {name!r}")


class Major(Enum):
    """The five top-level danger categories, ascending."""

    LOW = (0, "low")
    MODERATE = (1, "moderate")
    HIGH = (2, "high")
    VERY_HIGH = (3, "very high")
    EXTREME = (4, "extreme")

    def __init__(self, index: int, display: str) -> None:
        self.index = index
        self.display = display


class SubLevel(Enum):
    """Min/Mid/Max refinement within a major category."""

    MIN = (0, "-")
    MID = (1, "")
    MAX = (2, "+")

    def __init__(self, index: int, suffix: str) -> None:
        self.index = index
        self.suffix = suffix


_MAJORS = list(Major)
_SUBS = list(SubLevel)


@dataclass(frozen=True)
class FwiClass:
    """One of the 15 ordered fire-weather classes (5 majors x Min/Mid/Max).

    Total order follows the ordinal (1..15).
    """

    major: Major
    sub: SubLevel

    def __lt__(self, other: "FwiClass") -> bool:
        return self.ordinal < other.ordinal

    def __le__(self, other: "FwiClass") -> bool:
        return self.ordinal <= other.ordinal

    def __gt__(self, other: "FwiClass") -> bool:
        return self.ordinal > other.ordinal

    def __ge__(self, other: "FwiClass") -> bool:
        return self.ordinal >= other.ordinal

    @property
    def ordinal(self) -> int:
        return 3 * self.major.index + self.sub.index + 1

    @property
    def label(self) -> str:
        return self.major.display + self.sub.suffix

    @property
    def ontology_name(self) -> str:
        """Class-IRI local name, e.g. Min-VeryHigh."""
        camel = {"low": "Low", "moderate": "Moderate", "high": "High",
                 "very high": "VeryHigh", "extreme": "Extreme"}[self.major.display]
        sub = {0: "Min", 1: "Mid", 2: "Max"}[self.sub.index]
        return f"{sub}-{camel}"

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "FwiClass":
        if not 1 <= ordinal <= 15:
            raise DomainError(f"ordinal out of range 1..15: {ordinal}")
        return cls(_MAJORS[(ordinal - 1) // 3], _SUBS[(ordinal - 1) % 3])

    @classmethod
    def from_ontology_name(cls, name: str) -> "FwiClass":
        """Accepts both 15-level names (Min-Low) and bare majors (High).

        A bare major maps to its Mid sub-level, whose label is the plain
        major name, so expert-style rules asserting fwi:High read back as
        "high".
        """
        majors = {"Low": Major.LOW, "Moderate": Major.MODERATE, "High": Major.HIGH,
                  "VeryHigh": Major.VERY_HIGH, "Extreme": Major.EXTREME}
        subs = {"Min": SubLevel.MIN, "Mid": SubLevel.MID, "Max": SubLevel.MAX}
        if name in majors:
            return cls(majors[name], SubLevel.MID)
        if "-" in name:
            sub_part, _, major_part = name.partition("-")
            if sub_part in subs and major_part in majors:
                return cls(majors[major_part], subs[sub_part])
        raise DomainError(f"unknown fire-weather class name: {name!r}")


ALL_CLASSES: Tuple[FwiClass, ...] = tuple(
    FwiClass.from_ordinal(i) for i in range(1, 16)
)
ALL_LABELS: Tuple[str, ...] = tuple(c.label for c in ALL_CLASSES)


def label(cls: FwiClass) -> str:
    """Display label, lowercase: Min->"-" suffix, Mid->none, Max->"+"."""
    return cls.label


def parse_label(text: str) -> FwiClass:
    """Inverse of label(); exact lowercase match required."""
    for cls in ALL_CLASSES:
        if cls.label == text:
            return cls
    raise DomainError(f"unknown class label: {text!r}")


@dataclass(frozen=True)
class ClassBands:
    """Numeric score bands behind the 15 classes.

    major_edges are the five ascending lower edges of the majors; each
    bounded major splits into three equal-width sub-bands, and the unbounded
    Extreme major splits at extreme_sub_edges (its last band is open above).
    All bands are half-open [lo, hi).
    """

    major_edges: Tuple[float, float, float, float, float] = (0.0, 6.0, 12.0, 25.0, 50.0)
    extreme_sub_edges: Tuple[float, float, float] = (50.0, 75.0, 100.0)

    def __post_init__(self) -> None:
        edges = tuple(_require_finite("major edge", e) for e in self.major_edges)
        subs = tuple(_require_finite("extreme sub-edge", e) for e in self.extreme_sub_edges)
        if len(edges) != 5 or any(a >= b for a, b in zip(edges, edges[1:])):
            raise DomainError(f"major_edges must be 5 strictly increasing values: {edges}")
        if len(subs) != 3 or any(a >= b for a, b in zip(subs, subs[1:])):
            raise DomainError(f"extreme_sub_edges must be 3 strictly increasing values: {subs}")
        if subs[0] != edges[4]:
            raise DomainError("extreme_sub_edges must start at the Extreme lower edge")
        object.__setattr__(self, "major_edges", edges)
        object.__setattr__(self, "extreme_sub_edges", subs)

    def lower_edges(self) -> Tuple[float, ...]:
        """The 15 ascending band lower edges, index i -> ordinal i+1."""
        out = []
        for m in range(4):
            lo, hi = self.major_edges[m], self.major_edges[m + 1]
            width = (hi - lo) / 3.0
            out.extend([lo, lo + width, lo + 2.0 * width])
        out.extend(self.extreme_sub_edges)
        return tuple(out)

    def band(self, cls: FwiClass) -> Tuple[float, float]:
        """[lo, hi) for a class; the top band's hi is +inf."""
        edges = self.lower_edges()
        i = cls.ordinal - 1
        hi = edges[i + 1] if i + 1 < len(edges) else math.inf
        return edges[i], hi


DEFAULT_BANDS = ClassBands()


def class_from_score(score: float, bands: ClassBands = DEFAULT_BANDS) -> FwiClass:
    """Map a numeric fire-danger score into its class band.

    Bands are half-open [lo, hi); scores below the lowest edge are a domain
    error, the top band has no upper bound.
    """
    score = _require_finite("score", score)
    edges = bands.lower_edges()
    if score < edges[0]:
        raise DomainError(f"score {score} below lowest band edge {edges[0]}")
    return FwiClass.from_ordinal(bisect_right(edges, score))


def mps_to_kmh(v: float) -> float:
    """Convert a wind speed from m/s to km/h."""
    v = _require_finite("speed", v)
    if v < 0:
        raise DomainError(f"speed must be non-negative, got {v}")
    return v * 3.6


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value
