"""Great-circle geometry on a spherical Earth.

Distances use the haversine formula, directions the spherical forward
azimuth, both on the mean Earth radius. Inputs are degrees, distances
kilometers, bearings degrees clockwise from true north in [0, 360).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0088

KM_PER_MILE = 1.609344
KM_PER_DEGREE = EARTH_RADIUS_KM * math.pi / 180.0  # meridian arc of one degree


class UndefinedBearingError(ValueError):
    """Bearing requested between coincident points."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in kilometers."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Forward azimuth at ``a`` of the great circle toward ``b``, in [0, 360)."""
    if a.lat == b.lat and a.lon == b.lon:
        raise UndefinedBearingError(f"bearing undefined for coincident points {a}")
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlmb = math.radians(b.lon - a.lon)
    y = math.sin(dlmb) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlmb)
    return math.degrees(math.atan2(y, x)) % 360.0


def track_length_km(points) -> float:
    """Cumulative great-circle length of an ordered point sequence."""
    total = 0.0
    for p, q in zip(points, points[1:]):
        total += haversine_distance(p, q)
    return total
