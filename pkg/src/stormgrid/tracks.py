"""Best-track ingestion: HURDAT2 and canonical CSV parsing, validity
filtering, and per-storm summary statistics.

A raw archive may contain special non-synoptic rows (landfall fixes and
the like) and sentinel values for missing wind/pressure. Parsing keeps
every row as written; :func:`filter_valid` is the canonicalization step
that drops points failing the validity rules and storms too short to
form a trajectory step.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .geo import GeoPoint, track_length_km

SYNOPTIC_HOURS = (0, 6, 12, 18)

CSV_COLUMNS = ("storm_id", "name", "timestamp", "lat", "lon", "wind_kt", "pressure_mb")


class TrackFormatError(ValueError):
    """Malformed archive input. ``line`` is the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class HeaderError(TrackFormatError):
    """Storm header with the wrong shape."""


class StructureError(TrackFormatError):
    """Row count disagrees with the header's declared count."""


class FieldError(TrackFormatError):
    """Unparseable field value; carries the raw token."""

    def __init__(self, message: str, token: str, line: int | None = None):
        self.token = token
        super().__init__(f"{message}: {token!r}", line)


class SchemaError(TrackFormatError):
    """CSV input missing a required column."""


class OrderingError(TrackFormatError):
    """Timestamps not strictly increasing within a storm."""

    def __init__(self, storm_id: str, message: str):
        self.storm_id = storm_id
        super().__init__(f"storm {storm_id}: {message}")


@dataclass(frozen=True)
class TrackPoint:
    """One best-track fix. ``wind``/``pressure`` are None when the archive
    marked them missing."""

    time: datetime
    lat: float
    lon: float
    wind: int | None
    pressure: int | None
    status: str = ""

    def is_valid(self) -> bool:
        """All fields present, in physical range, and on the 6-hourly
        synoptic cadence."""
        return (
            -90.0 <= self.lat <= 90.0
            and -180.0 <= self.lon <= 180.0
            and self.wind is not None
            and self.wind >= 0
            and self.pressure is not None
            and 800 <= self.pressure <= 1100
            and self.time.hour in SYNOPTIC_HOURS
            and self.time.minute == 0
        )

    def geo(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)


@dataclass(frozen=True)
class StormTrack:
    storm_id: str
    name: str
    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        for a, b in zip(self.points, self.points[1:]):
            if b.time <= a.time:
                raise OrderingError(
                    self.storm_id, f"timestamp {b.time.isoformat()} does not increase"
                )

    @property
    def year(self) -> int:
        return int(self.storm_id[4:8])

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class FilterReport:
    points_in: int = 0
    points_dropped: int = 0
    storms_in: int = 0
    storms_dropped_short: int = 0
    storms_dropped_window: int = 0

    @property
    def points_kept(self) -> int:
        return self.points_in - self.points_dropped


def _parse_signed_coord(token: str, line: int) -> float:
    """``38.8N`` / ``70.9W`` style coordinate to signed decimal degrees."""
    token = token.strip()
    if len(token) < 2 or token[-1].upper() not in "NSEW":
        raise FieldError("bad coordinate", token, line)
    hemi = token[-1].upper()
    try:
        value = float(token[:-1])
    except ValueError:
        raise FieldError("bad coordinate", token, line) from None
    return -value if hemi in ("S", "W") else value


def _parse_sentinel_int(token: str, line: int) -> int | None:
    token = token.strip()
    if token in ("", "-999", "-99"):
        return None
    try:
        return int(token)
    except ValueError:
        raise FieldError("bad integer field", token, line) from None


def parse_hurdat2(text: str | io.TextIOBase) -> list[StormTrack]:
    """Parse HURDAT2-format text into one StormTrack per header.

    Headers look like ``AL182012, SANDY, 45,`` and are followed by exactly
    that many data rows. Hemisphere suffixes become signed degrees (W/S
    negative); ``-999`` pressure and ``-99`` wind become missing values.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = text.read().splitlines()

    storms: list[StormTrack] = []
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        header = [p.strip() for p in raw.rstrip(",").split(",")]
        if len(header) != 3:
            raise HeaderError(f"expected 'id, name, count' header, got {raw!r}", i)
        storm_id, name = header[0], header[1]
        try:
            count = int(header[2])
        except ValueError:
            raise HeaderError(f"bad row count in header {raw!r}", i) from None

        points = []
        for _ in range(count):
            if i >= len(lines) or _looks_like_header(lines[i]):
                raise StructureError(
                    f"storm {storm_id} declares {count} rows but has {len(points)}", i
                )
            row = [p.strip() for p in lines[i].split(",")]
            i += 1
            if len(row) < 8:
                raise StructureError(f"data row with {len(row)} fields (need >= 8)", i)
            try:
                when = datetime.strptime(row[0] + row[1], "%Y%m%d%H%M").replace(
                    tzinfo=timezone.utc
                )
            except ValueError:
                raise FieldError("bad date/time", f"{row[0]} {row[1]}", i) from None
            points.append(
                TrackPoint(
                    time=when,
                    lat=_parse_signed_coord(row[4], i),
                    lon=_parse_signed_coord(row[5], i),
                    wind=_parse_sentinel_int(row[6], i),
                    pressure=_parse_sentinel_int(row[7], i),
                    status=row[3],
                )
            )
        storms.append(StormTrack(storm_id, name, tuple(points)))
    return storms


def _looks_like_header(line: str) -> bool:
    first = line.split(",", 1)[0].strip()
    return len(first) == 8 and first[:2].isalpha() and first[2:].isdigit()


def parse_track_csv(text: str | io.TextIOBase) -> list[StormTrack]:
    """Parse the canonical CSV form (see :func:`write_track_csv`).

    Required columns: ``storm_id,name,timestamp,lat,lon,wind_kt,pressure_mb``.
    A ``status`` column is honored when present. Empty wind/pressure fields
    mean missing.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        return []
    missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise SchemaError(f"canonical CSV missing column(s): {', '.join(missing)}", 1)

    by_storm: dict[str, tuple[str, list[TrackPoint]]] = {}
    for lineno, row in enumerate(reader, start=2):
        sid = row["storm_id"].strip()
        stamp = row["timestamp"].strip()
        try:
            when = datetime.fromisoformat(stamp.replace("Z", "+00:00"))
        except ValueError:
            raise FieldError("bad timestamp", stamp, lineno) from None
        if when.tzinfo is None:
            when = when.replace(tzinfo=timezone.utc)
        try:
            lat = float(row["lat"])
            lon = float(row["lon"])
        except ValueError:
            raise FieldError("bad coordinate", f"{row['lat']},{row['lon']}", lineno) from None
        wind = row["wind_kt"].strip()
        pressure = row["pressure_mb"].strip()
        point = TrackPoint(
            time=when,
            lat=lat,
            lon=lon,
            wind=int(wind) if wind else None,
            pressure=int(pressure) if pressure else None,
            status=(row.get("status") or "").strip(),
        )
        by_storm.setdefault(sid, (row["name"].strip(), []))[1].append(point)

    storms = []
    for sid, (name, points) in by_storm.items():
        for a, b in zip(points, points[1:]):
            if b.time <= a.time:
                raise OrderingError(sid, f"timestamp {b.time.isoformat()} does not increase")
        storms.append(StormTrack(sid, name, tuple(points)))
    return storms


def _format_coord(value: float) -> str:
    # tenths precision like the source archives; repr() exact otherwise
    return f"{value:.4f}".rstrip("0").rstrip(".")


def write_track_csv(storms: list[StormTrack], stream: io.TextIOBase) -> None:
    """Write the canonical CSV. Timestamps are ISO-8601 UTC; missing
    wind/pressure are empty fields; a trailing ``status`` column makes the
    round trip lossless."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + ("status",))
    for storm in storms:
        for p in storm.points:
            writer.writerow(
                [
                    storm.storm_id,
                    storm.name,
                    p.time.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    _format_coord(p.lat),
                    _format_coord(p.lon),
                    "" if p.wind is None else p.wind,
                    "" if p.pressure is None else p.pressure,
                    p.status,
                ]
            )


def tracks_to_csv(storms: list[StormTrack]) -> str:
    buf = io.StringIO()
    write_track_csv(storms, buf)
    return buf.getvalue()


def filter_valid(
    storms: list[StormTrack], window: tuple[int, int] | None = None
) -> tuple[list[StormTrack], FilterReport]:
    """Drop invalid points, storms left with < 2 points, and storms outside
    the year window. Idempotent; an empty result is legal."""
    report = FilterReport(storms_in=len(storms))
    kept: list[StormTrack] = []
    for storm in storms:
        report.points_in += len(storm.points)
        if window is not None and not (window[0] <= storm.year <= window[1]):
            report.storms_dropped_window += 1
            report.points_dropped += len(storm.points)
            continue
        valid = tuple(p for p in storm.points if p.is_valid())
        report.points_dropped += len(storm.points) - len(valid)
        if len(valid) < 2:
            report.storms_dropped_short += 1
            report.points_dropped += len(valid)
            continue
        kept.append(StormTrack(storm.storm_id, storm.name, valid))
    return kept, report


@dataclass
class TrackStats:
    point_counts: dict[str, int] = field(default_factory=dict)
    distances_km: dict[str, float] = field(default_factory=dict)
    median_points: float = 0.0
    longest_id: str = ""
    shortest_id: str = ""

    @property
    def longest_km(self) -> float:
        return self.distances_km[self.longest_id]

    @property
    def shortest_km(self) -> float:
        return self.distances_km[self.shortest_id]


def track_stats(storms: list[StormTrack]) -> TrackStats:
    """Per-storm point counts and great-circle track lengths, the median
    count, and the extreme-distance storms."""
    if not storms:
        raise ValueError("track_stats needs at least one storm")
    stats = TrackStats()
    for storm in storms:
        stats.point_counts[storm.storm_id] = len(storm.points)
        stats.distances_km[storm.storm_id] = track_length_km(
            [p.geo() for p in storm.points]
        )
    stats.median_points = statistics.median(stats.point_counts.values())
    stats.longest_id = max(stats.distances_km, key=stats.distances_km.get)
    stats.shortest_id = min(stats.distances_km, key=stats.distances_km.get)
    return stats
