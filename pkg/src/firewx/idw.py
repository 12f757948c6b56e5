"""Great-circle distance and inverse-distance-weighted interpolation.

Node fire-weather classes are scattered point samples; a raster frame
interpolates their ordinals (1..15) onto a lat/lon grid so the map can show
a continuous danger surface. Interpolation operates on class ordinals by
default; a score mode is available for interpolating raw numeric indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import List, Mapping, Sequence, Tuple

from .core import (
    ClassBands,
    DEFAULT_BANDS,
    DomainError,
    FwiClass,
    GeoPoint,
    clamp,
    class_from_score,
    format_utc,
)

EARTH_RADIUS_KM = 6373.8


@dataclass(frozen=True)
class Sample:
    """A known value at a sensor-node location."""

    location: GeoPoint
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise DomainError(f"sample value must be finite, got {self.value!r}")


@dataclass(frozen=True)
class IdwConfig:
    power: float = 2.0
    earth_radius_km: float = EARTH_RADIUS_KM
    snap_epsilon_km: float = 1e-6

    def __post_init__(self) -> None:
        if not (self.power > 0 and math.isfinite(self.power)):
            raise DomainError(f"power must be positive, got {self.power}")
        if not (self.earth_radius_km > 0 and math.isfinite(self.earth_radius_km)):
            raise DomainError(f"earth radius must be positive, got {self.earth_radius_km}")


DEFAULT_IDW = IdwConfig()


def great_circle_km(a: GeoPoint, b: GeoPoint, r: float = EARTH_RADIUS_KM) -> float:
    """Spherical-law-of-cosines distance in km.

    The acos argument is clamped to [-1, 1]: rounding can push it a few ulp
    outside on near-identical or antipodal points, which would raise.
    """
    xa, ya = math.radians(a.lat_deg), math.radians(a.lon_deg)
    xb, yb = math.radians(b.lat_deg), math.radians(b.lon_deg)
    arg = math.sin(xa) * math.sin(xb) + math.cos(xa) * math.cos(xb) * math.cos(ya - yb)
    return r * math.acos(clamp(arg, -1.0, 1.0))


def idw_estimate(samples: Sequence[Sample], at: GeoPoint, cfg: IdwConfig = DEFAULT_IDW) -> float:
    """Normalized 1/d^p weighted mean of sample values at `at`.

    A sample within snap_epsilon_km of `at` is returned exactly (the weight
    formula is undefined at d=0). The result always lies within the sample
    min/max because the weights form a convex combination.
    """
    if not samples:
        raise DomainError("idw_estimate requires at least one sample")
    distances = [great_circle_km(s.location, at, cfg.earth_radius_km) for s in samples]
    for s, d in zip(samples, distances):
        if d <= cfg.snap_epsilon_km:
            return s.value
    num = 0.0
    den = 0.0
    for s, d in zip(samples, distances):
        w = 1.0 / d ** cfg.power
        num += w * s.value
        den += w
    return num / den


@dataclass(frozen=True)
class RasterGrid:
    """One interpolated frame: row-major cell values over a bbox.

    Rows run south to north, columns west to east; values[row][col] is the
    interpolated ordinal (or score) at the cell center, labels hold the
    matching class label. An empty frame (no events at the timestamp) has
    empty=True and no cells.
    """

    bbox: Tuple[float, float, float, float]  # south, west, north, east
    nx: int
    ny: int
    time: datetime
    values: Tuple[Tuple[float, ...], ...] = ()
    labels: Tuple[Tuple[str, ...], ...] = ()
    empty: bool = False

    def to_json_dict(self) -> dict:
        return {
            "time": format_utc(self.time),
            "bbox": list(self.bbox),
            "nx": self.nx,
            "ny": self.ny,
            "empty": self.empty,
            "values": [list(row) for row in self.values],
            "labels": [list(row) for row in self.labels],
        }


def _validate_grid(bbox: Tuple[float, float, float, float], nx: int, ny: int) -> None:
    south, west, north, east = bbox
    GeoPoint(south, west)
    GeoPoint(north, east)
    if not (south < north and west < east):
        raise DomainError(f"bbox must satisfy south < north and west < east: {bbox}")
    if not (1 <= nx and 1 <= ny):
        raise DomainError(f"grid size must be at least 1x1: {nx}x{ny}")


def cell_centers(bbox: Tuple[float, float, float, float], nx: int, ny: int) -> List[List[GeoPoint]]:
    """Row-major cell-center points, south-to-north rows."""
    south, west, north, east = bbox
    dlat = (north - south) / ny
    dlon = (east - west) / nx
    return [
        [GeoPoint(south + (j + 0.5) * dlat, west + (i + 0.5) * dlon) for i in range(nx)]
        for j in range(ny)
    ]


def ordinal_to_class(value: float) -> FwiClass:
    """Round an interpolated ordinal back onto the class lattice."""
    return FwiClass.from_ordinal(int(clamp(round(value), 1, 15)))


def raster_frame(
    node_values: Mapping[str, float],
    nodes: Mapping[str, GeoPoint],
    bbox: Tuple[float, float, float, float],
    nx: int,
    ny: int,
    time: datetime,
    bands: ClassBands = DEFAULT_BANDS,
    cfg: IdwConfig = DEFAULT_IDW,
    mode: str = "ordinal",
) -> RasterGrid:
    """Interpolate per-node values onto an nx-by-ny grid at one timestamp.

    node_values maps node_id -> class ordinal (mode="ordinal", default) or
    raw score (mode="score"); every node must be registered. No values means
    an empty frame, which the UI renders as a coverage gap.
    """
    _validate_grid(bbox, nx, ny)
    if mode not in ("ordinal", "score"):
        raise DomainError(f"unknown raster mode: {mode!r}")
    if not node_values:
        return RasterGrid(bbox=bbox, nx=nx, ny=ny, time=time, empty=True)
    samples = []
    for node_id, value in sorted(node_values.items()):
        if node_id not in nodes:
            raise DomainError(f"node {node_id!r} not in registry")
        samples.append(Sample(nodes[node_id], float(value)))
    values: List[Tuple[float, ...]] = []
    labels: List[Tuple[str, ...]] = []
    for row in cell_centers(bbox, nx, ny):
        vrow: List[float] = []
        lrow: List[str] = []
        for center in row:
            v = idw_estimate(samples, center, cfg)
            vrow.append(v)
            if mode == "ordinal":
                lrow.append(ordinal_to_class(v).label)
            else:
                lrow.append(class_from_score(max(v, bands.lower_edges()[0]), bands).label)
        values.append(tuple(vrow))
        labels.append(tuple(lrow))
    return RasterGrid(
        bbox=bbox, nx=nx, ny=ny, time=time, values=tuple(values), labels=tuple(labels)
    )
