"""Writer for the swath interchange format (.swt).

The pipeline that consumes these files documents the layout
(little-endian): magic "SWT1", version u16 = 1, sensor name as u16
length + UTF-8, acquired_at i64 UTC seconds, day/night u8 (0 day,
1 night), n_pixels u32, n_bands u16, a band table of (name, resolution
code u8, kind code u8), then f32 lat and lon planes and one payload per
band in table order: u8 per pixel for fire masks, f32 otherwise.

This module is written against that byte layout alone, so the emitted
files stand on their own; the test suite reads them back with the
consuming pipeline's parser to prove conformance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConversionError

MAGIC = b"SWT1"
VERSION = 1

DAY = 0
NIGHT = 1

# resolution codes from the format doc
RES_250M = 0
RES_375M = 1
RES_500M = 2
RES_750M = 3
RES_1KM = 4
RES_GEODETIC = 5

# band kind codes from the format doc
KIND_REFLECTIVE = 0
KIND_EMISSIVE = 1
KIND_FIREMASK = 2
KIND_WEATHER = 3
KIND_DROUGHT = 4


@dataclass(frozen=True)
class PointBand:
    name: str
    resolution: int
    kind: int
    values: np.ndarray


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def write_point_swath(
    path,
    sensor: str,
    acquired_at: int,
    daynight: int,
    lat: np.ndarray,
    lon: np.ndarray,
    bands: tuple[PointBand, ...],
) -> None:
    """Serialize scattered geolocated points as one swath file.

    Raises ConversionError rather than writing a file the downstream
    parser would reject.
    """
    lat = np.asarray(lat, dtype="<f4").ravel()
    lon = np.asarray(lon, dtype="<f4").ravel()
    n = lat.size
    if lon.size != n:
        raise ConversionError(f"lat/lon length mismatch: {n} vs {lon.size}")
    if n and (not np.isfinite(lat).all() or np.abs(lat).max() > 90):
        raise ConversionError("latitudes must be finite and within [-90, 90]")
    if n and (not np.isfinite(lon).all() or np.abs(lon).max() > 180):
        raise ConversionError("longitudes must be finite and within [-180, 180]")
    if daynight not in (DAY, NIGHT):
        raise ConversionError(f"bad day/night code {daynight}")

    parts = [MAGIC, struct.pack("<H", VERSION), _pack_name(sensor)]
    parts.append(struct.pack("<qBIH", int(acquired_at), daynight, n, len(bands)))
    payloads = []
    seen = set()
    for band in bands:
        if band.name in seen:
            raise ConversionError(f"duplicate band name {band.name!r}")
        seen.add(band.name)
        if band.kind == KIND_REFLECTIVE and daynight == NIGHT:
            raise ConversionError(f"night swath cannot carry reflective band {band.name!r}")
        if band.kind == KIND_FIREMASK:
            values = np.asarray(band.values, dtype=np.uint8).ravel()
            if values.size and values.max() > 9:
                raise ConversionError(f"fire-mask band {band.name!r} has class codes above 9")
        else:
            values = np.asarray(band.values, dtype="<f4").ravel()
        if values.size != n:
            raise ConversionError(
                f"band {band.name!r} has {values.size} values for {n} pixels"
            )
        parts.append(_pack_name(band.name))
        parts.append(struct.pack("<BB", band.resolution, band.kind))
        payloads.append(values.tobytes())
    parts.append(lat.tobytes())
    parts.append(lon.tobytes())
    parts.extend(payloads)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))
