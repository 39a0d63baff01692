"""The swath interchange format (.swt): one geolocated sensor overpass.

This file format is the input boundary of the pipeline; upstream
acquisition tools emit it and everything downstream consumes it.

Layout (all little-endian):

    magic "SWT1" (4 bytes)
    version          u16 = 1
    sensor name      u16 length + UTF-8 bytes
    acquired_at      i64, UTC seconds since the epoch
    daynight         u8 (0 = day, 1 = night)
    n_pixels         u32
    n_bands          u16
    band table       per band: name (u16 length + UTF-8),
                     resolution code u8, kind code u8
    lat              f32[n_pixels]
    lon              f32[n_pixels]
    band payloads    in table order: u8[n_pixels] for fire-mask bands,
                     f32[n_pixels] otherwise

Resolution codes: 250m=0, 375m=1, 500m=2, 750m=3, 1km=4, geodetic=5.
Kind codes: reflective=0, emissive=1, firemask=2, weather=3, drought=4.
Missing values are NaN in real bands and class 0 in fire masks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .bands import BandKind, BandSpec, DayNight
from .errors import FormatError, ValidationError
from .grid import ResolutionClass

MAGIC = b"SWT1"
VERSION = 1

_RES_CODE = {
    ResolutionClass.RC_250M: 0,
    ResolutionClass.RC_375M: 1,
    ResolutionClass.RC_500M: 2,
    ResolutionClass.RC_750M: 3,
    ResolutionClass.RC_1KM: 4,
    ResolutionClass.RC_GEODETIC: 5,
}
_RES_FROM_CODE = {v: k for k, v in _RES_CODE.items()}

_KIND_CODE = {
    BandKind.REFLECTIVE: 0,
    BandKind.EMISSIVE: 1,
    BandKind.FIREMASK: 2,
    BandKind.WEATHER: 3,
    BandKind.DROUGHT: 4,
}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODE.items()}

_DAYNIGHT_CODE = {DayNight.DAY: 0, DayNight.NIGHT: 1}
_DAYNIGHT_FROM_CODE = {v: k for k, v in _DAYNIGHT_CODE.items()}


@dataclass(frozen=True)
class Swath:
    """One geolocated granule: per-pixel lon/lat plus band values.

    Coordinate and real-band arrays are canonicalized to float32 and fire
    masks to uint8 on construction, matching what the file format stores.
    """

    sensor: str
    acquired_at: int  # UTC seconds
    daynight: DayNight
    lat: np.ndarray
    lon: np.ndarray
    bands: tuple[tuple[BandSpec, np.ndarray], ...] = field(default_factory=tuple)

    def __post_init__(self):
        lat = np.asarray(self.lat, dtype=np.float32).ravel()
        lon = np.asarray(self.lon, dtype=np.float32).ravel()
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)
        canon = []
        for spec, values in self.bands:
            dtype = np.uint8 if spec.kind is BandKind.FIREMASK else np.float32
            canon.append((spec, np.asarray(values, dtype=dtype).ravel()))
        object.__setattr__(self, "bands", tuple(canon))
        validate_swath(self)

    @property
    def n_pixels(self) -> int:
        return int(self.lat.size)

    def band_values(self, name: str) -> np.ndarray:
        for spec, values in self.bands:
            if spec.name == name:
                return values
        raise ValidationError(f"band {name!r} not present in swath")

    def band_spec(self, name: str) -> BandSpec:
        for spec, _ in self.bands:
            if spec.name == name:
                return spec
        raise ValidationError(f"band {name!r} not present in swath")


def validate_swath(swath: Swath) -> None:
    """Enforce the swath invariants; raise ValidationError on violation."""
    n = swath.lat.size
    if swath.lon.size != n:
        raise ValidationError(
            f"lat/lon length mismatch: {n} vs {swath.lon.size}"
        )
    if np.any(~np.isfinite(swath.lat)) or np.any(np.abs(swath.lat) > 90):
        raise ValidationError("latitudes must be finite and within [-90, 90]")
    if np.any(~np.isfinite(swath.lon)) or np.any(np.abs(swath.lon) > 180):
        raise ValidationError("longitudes must be finite and within [-180, 180]")
    seen = set()
    for spec, values in swath.bands:
        if spec.name in seen:
            raise ValidationError(f"duplicate band name {spec.name!r}")
        seen.add(spec.name)
        if values.size != n:
            raise ValidationError(
                f"band {spec.name!r} has {values.size} values for {n} pixels"
            )
        if swath.daynight is DayNight.NIGHT and spec.kind is BandKind.REFLECTIVE:
            raise ValidationError(
                f"night swath cannot carry reflective band {spec.name!r}"
            )
        if spec.kind is BandKind.FIREMASK and values.size and values.max() > 9:
            raise ValidationError(
                f"fire-mask band {spec.name!r} has class codes above 9"
            )


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValidationError(f"name too long: {name[:32]!r}...")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    """Byte cursor that raises FormatError instead of over-reading."""

    def __init__(self, data: bytes, path) -> None:
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def name(self) -> str:
        (length,) = self.unpack("H")
        return self.take(length).decode("utf-8")

    def array(self, dtype, count: int) -> np.ndarray:
        raw = self.take(count * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=dtype).copy()


def write_swath(path, swath: Swath) -> None:
    """Serialize a swath; the in-memory invariants are re-checked first."""
    validate_swath(swath)
    parts = [MAGIC, struct.pack("<H", VERSION), _pack_name(swath.sensor)]
    parts.append(
        struct.pack(
            "<qBIH",
            int(swath.acquired_at),
            _DAYNIGHT_CODE[swath.daynight],
            swath.n_pixels,
            len(swath.bands),
        )
    )
    for spec, _ in swath.bands:
        parts.append(_pack_name(spec.name))
        parts.append(struct.pack("<BB", _RES_CODE[spec.resolution], _KIND_CODE[spec.kind]))
    parts.append(swath.lat.astype("<f4").tobytes())
    parts.append(swath.lon.astype("<f4").tobytes())
    for spec, values in swath.bands:
        if spec.kind is BandKind.FIREMASK:
            parts.append(values.astype(np.uint8).tobytes())
        else:
            parts.append(values.astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_swath(path) -> Swath:
    """Parse and validate a .swt file."""
    with open(path, "rb") as fh:
        data = fh.read()
    rd = _Reader(data, path)
    if rd.take(4) != MAGIC:
        raise FormatError(f"{path}: bad magic, not a swath file")
    (version,) = rd.unpack("H")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    sensor = rd.name()
    acquired_at, dn_code, n_pixels, n_bands = rd.unpack("qBIH")
    if dn_code not in _DAYNIGHT_FROM_CODE:
        raise FormatError(f"{path}: bad day/night code {dn_code}")
    specs = []
    for _ in range(n_bands):
        name = rd.name()
        res_code, kind_code = rd.unpack("BB")
        if res_code not in _RES_FROM_CODE or kind_code not in _KIND_FROM_CODE:
            raise FormatError(f"{path}: bad band table entry for {name!r}")
        specs.append(BandSpec(name, _RES_FROM_CODE[res_code], _KIND_FROM_CODE[kind_code]))
    lat = rd.array("<f4", n_pixels)
    lon = rd.array("<f4", n_pixels)
    bands = []
    for spec in specs:
        if spec.kind is BandKind.FIREMASK:
            bands.append((spec, rd.array(np.uint8, n_pixels)))
        else:
            bands.append((spec, rd.array("<f4", n_pixels)))
    if rd.pos != len(data):
        raise FormatError(f"{path}: {len(data) - rd.pos} trailing bytes")
    try:
        return Swath(sensor, acquired_at, _DAYNIGHT_FROM_CODE[dn_code], lat, lon, tuple(bands))
    except ValidationError as exc:
        raise FormatError(f"{path}: invalid swath content: {exc}") from exc
