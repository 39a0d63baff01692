"""Gridded patch storage: the .rst raster format and the on-disk store.

A raster holds one cell's patch for one product as named channels over a
square pixel grid, north up (row 0 is the northern edge). The store lays
rasters out as

    <root>/<product>/<YYYY-MM-DD>/<D|N>/<x>_<y>.rst

keyed by product name, local calendar date, day/night half, and grid cell.

.rst layout (little-endian):

    magic "RST1" (4 bytes)
    size        u16 (patch is size x size pixels)
    n_channels  u16
    channel table: per channel, name as u16 length + UTF-8 bytes
    payload     f32[n_channels * size * size], channel-major, row-major
                within a channel
"""

from __future__ import annotations

import datetime as dt
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bands import DayNight
from .errors import FormatError, NotFoundError, ValidationError
from .grid import CellId

MAGIC = b"RST1"

_CELL_FILE = re.compile(r"^(-?\d+)_(-?\d+)\.rst$")


@dataclass(frozen=True)
class PatchRaster:
    """Named float32 channels over one square patch."""

    channels: tuple[str, ...]
    values: np.ndarray  # (n_channels, size, size) float32

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValidationError(
                f"raster values must be (channels, size, size), got {values.shape}"
            )
        if values.shape[0] != len(self.channels):
            raise ValidationError(
                f"{len(self.channels)} channel names for {values.shape[0]} planes"
            )
        if len(set(self.channels)) != len(self.channels):
            raise ValidationError("duplicate channel names")
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return int(self.values.shape[1])

    def channel(self, name: str) -> np.ndarray:
        try:
            idx = self.channels.index(name)
        except ValueError:
            raise ValidationError(f"no channel named {name!r}") from None
        return self.values[idx]


def write_raster(path, raster: PatchRaster) -> None:
    """Write a .rst file atomically (tmp file + rename in the same dir)."""
    path = Path(path)
    parts = [MAGIC, struct.pack("<HH", raster.size, len(raster.channels))]
    for name in raster.channels:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"channel name too long: {name[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)) + raw)
    parts.append(raster.values.astype("<f4").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


def read_raster(path) -> PatchRaster:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise NotFoundError(f"{path}: no such raster") from None
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"{path}: truncated file")
        out = data[pos : pos + n]
        pos += n
        return out

    if take(4) != MAGIC:
        raise FormatError(f"{path}: bad magic, not a raster file")
    size, n_channels = struct.unpack("<HH", take(4))
    names = []
    for _ in range(n_channels):
        (length,) = struct.unpack("<H", take(2))
        names.append(take(length).decode("utf-8"))
    payload = np.frombuffer(take(n_channels * size * size * 4), dtype="<f4")
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    values = payload.reshape(n_channels, size, size).copy()
    return PatchRaster(tuple(names), values)


def local_date(utc_seconds: int, offset_hours: float) -> dt.date:
    """Calendar date at a longitude-based UTC offset.

    The offset is longitude / 15 hours; observations group into days by
    the clock at the cell they cover, not by UTC.
    """
    shifted = float(utc_seconds) + offset_hours * 3600.0
    return (
        dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)
        + dt.timedelta(seconds=shifted)
    ).date()


class PatchStore:
    """Filesystem-backed map from (product, date, half, cell) to rasters."""

    def __init__(self, root) -> None:
        self.root = Path(root)

    def path_for(
        self, product: str, date: dt.date, daynight: DayNight, cell: CellId
    ) -> Path:
        return (
            self.root
            / product
            / date.isoformat()
            / daynight.value
            / f"{cell.x}_{cell.y}.rst"
        )

    def write(
        self,
        product: str,
        date: dt.date,
        daynight: DayNight,
        cell: CellId,
        raster: PatchRaster,
    ) -> Path:
        path = self.path_for(product, date, daynight, cell)
        write_raster(path, raster)
        return path

    def read(
        self, product: str, date: dt.date, daynight: DayNight, cell: CellId
    ) -> PatchRaster:
        return read_raster(self.path_for(product, date, daynight, cell))

    def exists(
        self, product: str, date: dt.date, daynight: DayNight, cell: CellId
    ) -> bool:
        return self.path_for(product, date, daynight, cell).is_file()

    def products(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def dates(self, product: str) -> list[dt.date]:
        base = self.root / product
        if not base.is_dir():
            return []
        out = []
        for entry in base.iterdir():
            if not entry.is_dir():
                continue
            try:
                out.append(dt.date.fromisoformat(entry.name))
            except ValueError:
                continue
        return sorted(out)

    def cells(self, product: str, date: dt.date, daynight: DayNight) -> list[CellId]:
        base = self.root / product / date.isoformat() / daynight.value
        if not base.is_dir():
            return []
        out = []
        for entry in base.iterdir():
            match = _CELL_FILE.match(entry.name)
            if match:
                out.append(CellId(int(match.group(1)), int(match.group(2))))
        return sorted(out)
