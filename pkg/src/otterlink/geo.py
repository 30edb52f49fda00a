"""Equirectangular lat/lon <-> local north/east conversion.

Adequate for the <10 km scale this stack operates at; not an
ellipsoidal geodesy library.
"""

from __future__ import annotations

import math

EARTH_RADIUS = 6_371_000.0  # m


def latlon_to_local(lat: float, lon: float,
                    origin_lat: float, origin_lon: float) -> tuple[float, float]:
    """Project (lat, lon) to (north, east) meters about the origin."""
    if abs(lat) > 90.0 or abs(origin_lat) > 90.0:
        raise ValueError("latitude out of [-90, 90]")
    north = EARTH_RADIUS * math.radians(lat - origin_lat)
    east = (EARTH_RADIUS * math.cos(math.radians(origin_lat))
            * math.radians(lon - origin_lon))
    return north, east


def local_to_latlon(north: float, east: float,
                    origin_lat: float, origin_lon: float) -> tuple[float, float]:
    """Inverse of latlon_to_local."""
    lat = origin_lat + math.degrees(north / EARTH_RADIUS)
    lon = origin_lon + math.degrees(
        east / (EARTH_RADIUS * math.cos(math.radians(origin_lat))))
    return lat, lon
