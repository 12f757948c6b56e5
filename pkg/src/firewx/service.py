"""HTTP facade: CSV ingestion, fire-weather queries with raster frames,
per-node timelines, day/night statistics, and KML export.

Responses are byte-deterministic: payload dicts are built in fixed key
order and serialized by json_bytes, which renders every float with four
decimals, so identical store state plus an identical request yields an
identical body. Query windows are widened outward onto the 10-minute slot
grid before anything else happens.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from xml.sax.saxutils import escape

from fastapi import FastAPI, Request, Response
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from .core import (
    DEFAULT_UTC_OFFSET_MINUTES,
    SLOT_MINUTES,
    STUDY_BBOX,
    DomainError,
    FwiClass,
    GeoPoint,
    Major,
    PropertyKind,
    SubLevel,
    TimeRange,
    floor_to_slot,
    format_utc,
    parse_label,
    parse_utc,
    utc_to_local_minutes,
)
from .idw import RasterGrid, raster_frame
from .infer import FwiEvent, InferenceEngine
from .ingest import CleanConfig, NodeRegistry, ParseError, clean_stream, parse_csv
from .rules import RuleSet
from .store import MODE_MULTI, RepositorySet

DAY_START_MINUTES = 6 * 60
DAY_END_MINUTES = 18 * 60
MAX_GRID_CELLS = 512


# -- class colors -----------------------------------------------------------

# One hue per major class (the classic fire-danger meter palette), with the
# Min sub-level lightened and the Max sub-level darkened. The web frontend
# and the KML styles share this table; tests pin the exact hex values.
_MAJOR_RGB = {
    Major.LOW: (46, 125, 50),
    Major.MODERATE: (21, 101, 192),
    Major.HIGH: (249, 168, 37),
    Major.VERY_HIGH: (239, 108, 0),
    Major.EXTREME: (198, 40, 40),
}


def _blend(rgb: Tuple[int, int, int], toward: Tuple[int, int, int], frac: float) -> Tuple[int, int, int]:
    return tuple(int(c + (t - c) * frac + 0.5) for c, t in zip(rgb, toward))


def class_color(cls: FwiClass) -> str:
    """#rrggbb fill color for a fire-weather class."""
    base = _MAJOR_RGB[cls.major]
    if cls.sub is SubLevel.MIN:
        base = _blend(base, (255, 255, 255), 0.30)
    elif cls.sub is SubLevel.MAX:
        base = _blend(base, (0, 0, 0), 0.25)
    return "#%02x%02x%02x" % base


CLASS_COLORS: Tuple[str, ...] = tuple(
    class_color(FwiClass.from_ordinal(i)) for i in range(1, 16)
)


# -- deterministic JSON -----------------------------------------------------

def _render_json(obj, out: List[str]) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise DomainError(f"non-finite number in payload: {obj!r}")
        # normalize -0.0 so the sign bit cannot leak into the bytes
        out.append(format(obj if obj != 0 else 0.0, ".4f"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise DomainError(f"payload keys must be strings, got {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _render_json(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(",")
            _render_json(value, out)
        out.append("]")
    else:
        raise DomainError(f"unserializable payload value: {obj!r}")


def json_bytes(payload) -> bytes:
    """Compact JSON with insertion-ordered keys and floats at 4 decimals."""
    out: List[str] = []
    _render_json(payload, out)
    return "".join(out).encode("utf-8")


def _json_response(payload, status_code: int = 200) -> Response:
    return Response(
        content=json_bytes(payload),
        status_code=status_code,
        media_type="application/json",
    )


# -- error model ------------------------------------------------------------

class ApiError(Exception):
    """Request failure carrying the HTTP status and the JSON error body."""

    def __init__(self, status: int, code: str, message: str, field: Optional[str] = None) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field = field

    def body(self) -> dict:
        body = {"code": self.code, "message": self.message}
        if self.field is not None:
            body["field"] = self.field
        return body


# -- request parsing --------------------------------------------------------

@dataclass(frozen=True)
class QueryRequest:
    """Validated raster query: slot-aligned window, bbox, grid, node filter."""

    window: TimeRange
    bbox: Tuple[float, float, float, float] = STUDY_BBOX
    nx: int = 8
    ny: int = 8
    node: Optional[str] = None
    stride: int = 1

    def __post_init__(self) -> None:
        south, west, north, east = self.bbox
        GeoPoint(south, west)
        GeoPoint(north, east)
        if not (south < north and west < east):
            raise DomainError(f"bbox must satisfy south < north and west < east: {self.bbox}")
        if not (1 <= self.nx <= MAX_GRID_CELLS and 1 <= self.ny <= MAX_GRID_CELLS):
            raise DomainError(f"grid size must be within 1..{MAX_GRID_CELLS}: {self.nx}x{self.ny}")
        if self.stride < 1:
            raise DomainError(f"stride must be >= 1, got {self.stride}")


def _require(params, name: str) -> str:
    value = params.get(name)
    if value is None or value == "":
        raise ApiError(400, "missing_parameter", f"query parameter {name!r} is required", name)
    return value


def _parse_time_param(params, name: str) -> datetime:
    text = _require(params, name)
    try:
        return parse_utc(text)
    except (DomainError, ValueError) as exc:
        raise ApiError(400, "invalid_parameter", f"{name}: {exc}", name) from None


def _parse_window(params) -> TimeRange:
    start = _parse_time_param(params, "from")
    end = _parse_time_param(params, "to")
    try:
        return TimeRange(start, end).aligned()
    except DomainError as exc:
        raise ApiError(400, "invalid_parameter", str(exc), "to") from None


def _parse_int_param(params, name: str, default: int, lo: int, hi: int) -> int:
    text = params.get(name)
    if text is None or text == "":
        return default
    try:
        value = int(text)
    except ValueError:
        raise ApiError(400, "invalid_parameter", f"{name} must be an integer, got {text!r}", name) from None
    if not lo <= value <= hi:
        raise ApiError(400, "invalid_parameter", f"{name} must be in [{lo}, {hi}], got {value}", name)
    return value


def _parse_bbox_param(params) -> Tuple[float, float, float, float]:
    text = params.get("bbox")
    if text is None or text == "":
        return STUDY_BBOX
    parts = text.split(",")
    if len(parts) != 4:
        raise ApiError(400, "invalid_parameter", f"bbox must be S,W,N,E, got {text!r}", "bbox")
    try:
        south, west, north, east = (float(p) for p in parts)
    except ValueError:
        raise ApiError(400, "invalid_parameter", f"bbox must be numeric, got {text!r}", "bbox") from None
    try:
        GeoPoint(south, west)
        GeoPoint(north, east)
        if not (south < north and west < east):
            raise DomainError("bbox must satisfy south < north and west < east")
    except DomainError as exc:
        raise ApiError(400, "invalid_parameter", f"bbox: {exc}", "bbox") from None
    return (south, west, north, east)


def _parse_hhmm(text: str) -> int:
    hh, sep, mm = text.partition(":")
    if sep and hh.isdigit() and mm.isdigit() and len(mm) == 2:
        minutes = int(hh) * 60 + int(mm)
        if 0 <= minutes <= 24 * 60:
            return minutes
    raise DomainError(f"expected HH:MM between 00:00 and 24:00, got {text!r}")


def _parse_hhmm_param(params, name: str, default: int) -> int:
    text = params.get(name)
    if text is None or text == "":
        return default
    try:
        return _parse_hhmm(text)
    except DomainError as exc:
        raise ApiError(400, "invalid_parameter", f"{name}: {exc}", name) from None


def _minutes_to_hhmm(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def _query_request_from(params) -> QueryRequest:
    window = _parse_window(params)
    bbox = _parse_bbox_param(params)
    nx = _parse_int_param(params, "nx", 8, 1, MAX_GRID_CELLS)
    ny = _parse_int_param(params, "ny", 8, 1, MAX_GRID_CELLS)
    stride = _parse_int_param(params, "stride", 1, 1, 1_000_000)
    node = params.get("node") or None
    return QueryRequest(window=window, bbox=bbox, nx=nx, ny=ny, node=node, stride=stride)


# -- query core (shared by HTTP handlers and the CLI) -----------------------

def query_frames(
    engine: InferenceEngine, registry: NodeRegistry, req: QueryRequest
) -> Tuple[List[RasterGrid], List[FwiEvent], List[TimeRange]]:
    """Lazy-infer the window, then rasterize one frame per stride-th slot.

    Gaps are the coalesced native slots with no events at all; their frames
    come out empty so the map can hatch them instead of painting stale data.
    """
    events = engine.query(req.window, req.node)
    by_slot: Dict[datetime, Dict[str, int]] = {}
    for e in events:
        slot_nodes = by_slot.setdefault(floor_to_slot(e.time), {})
        prev = slot_nodes.get(e.node_id, 0)
        slot_nodes[e.node_id] = max(prev, e.fwi_class.ordinal)

    frames: List[RasterGrid] = []
    gaps: List[TimeRange] = []
    gap_start: Optional[datetime] = None
    for i, slot in enumerate(req.window.slots()):
        slot_nodes = {n: v for n, v in by_slot.get(slot, {}).items() if n in registry}
        if not slot_nodes:
            if gap_start is None:
                gap_start = slot
        elif gap_start is not None:
            gaps.append(TimeRange(gap_start, slot))
            gap_start = None
        if i % req.stride == 0:
            frames.append(
                raster_frame(slot_nodes, registry, req.bbox, req.nx, req.ny, slot)
            )
    if gap_start is not None:
        gaps.append(TimeRange(gap_start, req.window.end))
    return frames, events, gaps


def fwi_payload(engine: InferenceEngine, registry: NodeRegistry, req: QueryRequest) -> dict:
    """The /fwi response: frames plus per-node point events plus gap ranges."""
    frames, events, gaps = query_frames(engine, registry, req)
    event_rows = []
    for e in events:
        point = registry.get(e.node_id)
        event_rows.append(
            {
                "event": e.event_iri,
                "node": e.node_id,
                "time": format_utc(e.time),
                "ordinal": e.fwi_class.ordinal,
                "label": e.fwi_class.label,
                "rule": e.rule_name,
                "lat": point.lat_deg if point else None,
                "lon": point.lon_deg if point else None,
            }
        )
    return {
        "window": {"from": format_utc(req.window.start), "to": format_utc(req.window.end)},
        "bbox": [float(x) for x in req.bbox],
        "nx": req.nx,
        "ny": req.ny,
        "stride": req.stride,
        "frames": [f.to_json_dict() for f in frames],
        "events": event_rows,
        "gaps": [{"from": format_utc(g.start), "to": format_utc(g.end)} for g in gaps],
    }


def timeline_payload(engine: InferenceEngine, window: TimeRange, node: str) -> List[list]:
    """[(time, ordinal, label)] rows for one node, chronological."""
    events = engine.query(window, node)
    return [[format_utc(e.time), e.fwi_class.ordinal, e.fwi_class.label] for e in events]


# -- statistics -------------------------------------------------------------

@dataclass(frozen=True)
class StatsReport:
    """Per-label event counts for a window, split into local day and night.

    Count rows are (label, count) ordered by class ordinal; percentages are
    derived on serialization so day + night always recombine to entire.
    """

    window: TimeRange
    day_start_minutes: int
    day_end_minutes: int
    utc_offset_minutes: int
    entire: Tuple[Tuple[str, int], ...]
    day: Tuple[Tuple[str, int], ...]
    night: Tuple[Tuple[str, int], ...]

    def to_json_dict(self) -> dict:
        return {
            "window": {
                "from": format_utc(self.window.start),
                "to": format_utc(self.window.end),
            },
            "day_window": {
                "start": _minutes_to_hhmm(self.day_start_minutes),
                "end": _minutes_to_hhmm(self.day_end_minutes),
                "utc_offset_minutes": self.utc_offset_minutes,
            },
            "entire": _distribution_dict(self.entire),
            "day": _distribution_dict(self.day),
            "night": _distribution_dict(self.night),
        }


def _distribution_dict(counts: Tuple[Tuple[str, int], ...]) -> dict:
    total = sum(n for _, n in counts)
    return {
        "total": total,
        "counts": {label: n for label, n in counts},
        "percentages": {label: 100.0 * n / total for label, n in counts},
    }


def compute_stats(
    events: Sequence[FwiEvent],
    window: TimeRange,
    day_start_minutes: int = DAY_START_MINUTES,
    day_end_minutes: int = DAY_END_MINUTES,
    utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES,
) -> StatsReport:
    """Partition events by local wall-clock time-of-day and count labels.

    Day is [day_start, day_end) local; night is the complement of the day
    window within the 24-hour cycle, not a contiguous range.
    """
    if not 0 <= day_start_minutes < day_end_minutes <= 24 * 60:
        raise DomainError(
            "day window must satisfy 0 <= start < end <= 24h, got "
            f"[{day_start_minutes}, {day_end_minutes}) minutes"
        )
    entire: Dict[int, int] = {}
    day: Dict[int, int] = {}
    night: Dict[int, int] = {}
    for e in events:
        ordinal = e.fwi_class.ordinal
        minutes = utc_to_local_minutes(e.time, utc_offset_minutes)
        entire[ordinal] = entire.get(ordinal, 0) + 1
        bucket = day if day_start_minutes <= minutes < day_end_minutes else night
        bucket[ordinal] = bucket.get(ordinal, 0) + 1

    def rows(counter: Dict[int, int]) -> Tuple[Tuple[str, int], ...]:
        return tuple((FwiClass.from_ordinal(o).label, counter[o]) for o in sorted(counter))

    return StatsReport(
        window=window,
        day_start_minutes=day_start_minutes,
        day_end_minutes=day_end_minutes,
        utc_offset_minutes=utc_offset_minutes,
        entire=rows(entire),
        day=rows(day),
        night=rows(night),
    )


def stats_payload(
    engine: InferenceEngine,
    window: TimeRange,
    day_start_minutes: int = DAY_START_MINUTES,
    day_end_minutes: int = DAY_END_MINUTES,
    utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES,
) -> dict:
    events = engine.query(window)
    report = compute_stats(events, window, day_start_minutes, day_end_minutes, utc_offset_minutes)
    return report.to_json_dict()


# -- KML export -------------------------------------------------------------

KML_FILL_ALPHA = "b3"  # ~70% opaque cell fills


def _kml_color(hex_rgb: str) -> str:
    """KML wants aabbggrr."""
    r, g, b = hex_rgb[1:3], hex_rgb[3:5], hex_rgb[5:7]
    return KML_FILL_ALPHA + b + g + r


def kml_document(
    frames: Sequence[RasterGrid],
    name: str = "fire weather frames",
    frame_minutes: int = SLOT_MINUTES,
) -> str:
    """Render frames as time-spanned folders of colored grid-cell polygons.

    Empty frames become empty folders so the frame count (and the animation
    step count in external viewers) matches the JSON payload.
    """
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<kml xmlns="http://www.opengis.net/kml/2.2">',
        "<Document>",
        f"<name>{escape(name)}</name>",
    ]
    for ordinal, color in enumerate(CLASS_COLORS, start=1):
        out.append(
            f'<Style id="c{ordinal}"><PolyStyle><color>{_kml_color(color)}</color>'
            "<outline>0</outline></PolyStyle></Style>"
        )
    for frame in frames:
        begin = format_utc(frame.time)
        end = format_utc(frame.time + timedelta(minutes=frame_minutes))
        out.append("<Folder>")
        out.append(f"<name>{escape(begin)}</name>")
        out.append(f"<TimeSpan><begin>{begin}</begin><end>{end}</end></TimeSpan>")
        if not frame.empty:
            south, west, north, east = frame.bbox
            dlat = (north - south) / frame.ny
            dlon = (east - west) / frame.nx
            for j, label_row in enumerate(frame.labels):
                lat_s = south + j * dlat
                lat_n = lat_s + dlat
                for i, cell_label in enumerate(label_row):
                    ordinal = parse_label(cell_label).ordinal
                    lon_w = west + i * dlon
                    lon_e = lon_w + dlon
                    coords = (
                        f"{lon_w:.6f},{lat_s:.6f},0 {lon_e:.6f},{lat_s:.6f},0 "
                        f"{lon_e:.6f},{lat_n:.6f},0 {lon_w:.6f},{lat_n:.6f},0 "
                        f"{lon_w:.6f},{lat_s:.6f},0"
                    )
                    out.append(
                        f'<Placemark><styleUrl>#c{ordinal}</styleUrl><Polygon>'
                        "<outerBoundaryIs><LinearRing>"
                        f"<coordinates>{coords}</coordinates>"
                        "</LinearRing></outerBoundaryIs></Polygon></Placemark>"
                    )
        out.append("</Folder>")
    out.append("</Document>")
    out.append("</kml>")
    return "\n".join(out) + "\n"


# -- ingestion --------------------------------------------------------------

def ingest_csv(
    repos: RepositorySet,
    registry: NodeRegistry,
    kind: PropertyKind,
    text: str,
    utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES,
    clean_cfg: Optional[CleanConfig] = None,
) -> dict:
    """Parse, clean and store one single-property CSV batch.

    Returns the stored context id, its triple count, and the number of
    records the cleaner dropped. A batch that cleans down to nothing stores
    no graph and reports context null.
    """
    observations = parse_csv(text, utc_offset_minutes)
    if not observations:
        raise DomainError("empty observation batch")
    for obs in observations:
        if obs.property is not kind:
            raise DomainError(
                f"batch declared {kind.csv_name} but contains {obs.property.csv_name}"
            )
    clean, report = clean_stream(observations, registry, clean_cfg)
    if clean:
        context = repos.store_graph(clean, kind)
        triples = len(repos.graph(context))
    else:
        context, triples = None, 0
    return {"context": context, "triples": triples, "outliers_removed": len(report)}


# -- app factory ------------------------------------------------------------

def create_app(
    store: Union[str, Path, RepositorySet],
    ruleset: RuleSet,
    registry: NodeRegistry,
    utc_offset_minutes: int = DEFAULT_UTC_OFFSET_MINUTES,
    store_mode: str = MODE_MULTI,
    clean_cfg: Optional[CleanConfig] = None,
    ui_dir: Optional[Union[str, Path]] = None,
) -> FastAPI:
    """Build the HTTP app around one repository set and one rule set.

    The engine and repositories hang off app.state so tests and operators
    can watch the rule-evaluation counter. A process-wide lock serializes
    store access: one in-flight inference, everyone else waits.
    """
    repos = store if isinstance(store, RepositorySet) else RepositorySet(store, store_mode)
    engine = InferenceEngine(repos, ruleset)
    app = FastAPI(title="firewx", openapi_url=None, docs_url=None, redoc_url=None)
    app.state.repos = repos
    app.state.engine = engine
    app.state.registry = registry
    app.state.utc_offset_minutes = utc_offset_minutes
    app.state.lock = threading.Lock()

    @app.exception_handler(ApiError)
    def _handle_api_error(request: Request, exc: ApiError) -> Response:
        return _json_response(exc.body(), exc.status)

    @app.exception_handler(DomainError)
    def _handle_domain_error(request: Request, exc: DomainError) -> Response:
        return _json_response({"code": "domain_error", "message": str(exc)}, 400)

    @app.exception_handler(ParseError)
    def _handle_parse_error(request: Request, exc: ParseError) -> Response:
        return _json_response(
            {"code": "parse_error", "message": str(exc), "field": "body"}, 400
        )

    @app.exception_handler(Exception)
    def _handle_internal_error(request: Request, exc: Exception) -> Response:
        return _json_response({"code": "internal_error", "message": str(exc)}, 500)

    @app.post("/ingest")
    async def ingest(request: Request) -> Response:
        name = request.query_params.get("property")
        if not name:
            raise ApiError(400, "missing_parameter", "query parameter 'property' is required", "property")
        try:
            kind = PropertyKind.from_csv_name(name)
        except DomainError as exc:
            raise ApiError(400, "invalid_parameter", str(exc), "property") from None
        data = await request.body()

        def work() -> dict:
            try:
                text = data.decode("utf-8")
            except UnicodeDecodeError:
                raise ApiError(400, "invalid_parameter", "body must be UTF-8 text", "body") from None
            with app.state.lock:
                return ingest_csv(repos, registry, kind, text, utc_offset_minutes, clean_cfg)

        return _json_response(await run_in_threadpool(work))

    @app.get("/fwi")
    def fwi(request: Request) -> Response:
        req = _query_request_from(request.query_params)
        with app.state.lock:
            payload = fwi_payload(engine, registry, req)
        return _json_response(payload)

    @app.get("/fwi/timeline")
    def timeline(request: Request) -> Response:
        params = request.query_params
        window = _parse_window(params)
        node = _require(params, "node")
        with app.state.lock:
            payload = timeline_payload(engine, window, node)
        return _json_response(payload)

    @app.get("/fwi/stats")
    def stats(request: Request) -> Response:
        params = request.query_params
        window = _parse_window(params)
        day_start = _parse_hhmm_param(params, "day_start", DAY_START_MINUTES)
        day_end = _parse_hhmm_param(params, "day_end", DAY_END_MINUTES)
        if not day_start < day_end:
            raise ApiError(400, "invalid_parameter", "day_start must be before day_end", "day_end")
        with app.state.lock:
            payload = stats_payload(engine, window, day_start, day_end, utc_offset_minutes)
        return _json_response(payload)

    @app.get("/export/kml")
    def export_kml(request: Request) -> Response:
        req = _query_request_from(request.query_params)
        with app.state.lock:
            frames, _, _ = query_frames(engine, registry, req)
        doc = kml_document(
            frames,
            name=f"fire weather {format_utc(req.window.start)} to {format_utc(req.window.end)}",
            frame_minutes=SLOT_MINUTES * req.stride,
        )
        return Response(
            content=doc.encode("utf-8"),
            media_type="application/vnd.google-earth.kml+xml",
        )

    @app.get("/nodes")
    def nodes(request: Request) -> Response:
        rows = [
            {"id": node_id, "lat": point.lat_deg, "lon": point.lon_deg}
            for node_id, point in registry.items()
        ]
        return _json_response({"nodes": rows, "bbox": [float(x) for x in STUDY_BBOX]})

    if ui_dir is not None:
        ui_path = Path(ui_dir)
        if not ui_path.is_dir():
            raise DomainError(f"ui_dir is not a directory: {ui_path}")
        app.mount("/ui", StaticFiles(directory=str(ui_path), html=True), name="ui")

    return app
