"""Turn active-fire granules into swath files.

Supported input: VIIRS 375 m active-fire granules (VNP14IMG on Suomi
NPP, VJ114IMG on NOAA-20), which are HDF5 files carrying per-detection
fire-pixel tables. Each detection becomes one swath point with its
4 um brightness temperature (band "T4") and confidence class (band
"FM", classes 7/8/9 = low/nominal/high).

MODIS equivalents ship as HDF4, which has no reader in this
environment; they are recognized by magic bytes and rejected with a
message saying so.
"""

from __future__ import annotations

import datetime as dt
import re
from pathlib import Path

import h5py
import numpy as np

from .errors import ConversionError
from .swt import DAY, KIND_EMISSIVE, KIND_FIREMASK, NIGHT, RES_375M, PointBand, write_point_swath

HDF4_MAGIC = b"\x0e\x03\x13\x01"

_TIME_ATTRS = ("time_coverage_start", "StartTime", "PGE_StartTime")
_FLAG_ATTRS = ("DayNightFlag", "day_night_flag", "Day Night Flag")
_NAME_TIME = re.compile(r"\.A(\d{4})(\d{3})\.(\d{2})(\d{2})\.")

_CONFIDENCE_LETTERS = {b"l": 7, b"n": 8, b"h": 9}


def _decode(value) -> str:
    if isinstance(value, bytes):
        return value.decode("utf-8", "replace")
    if isinstance(value, np.ndarray) and value.size == 1:
        return _decode(value.reshape(-1)[0])
    return str(value)


def _attr(f: h5py.File, names) -> str | None:
    for name in names:
        if name in f.attrs:
            return _decode(f.attrs[name]).strip()
    return None


def _acquired_at(f: h5py.File, filename: str) -> int:
    """Acquisition start as UTC seconds, from attributes or the
    A<year><doy>.<hhmm> token standard granule names carry."""
    stamp = _attr(f, _TIME_ATTRS)
    if stamp:
        text = stamp.replace(" ", "T").removesuffix("Z")
        try:
            parsed = dt.datetime.fromisoformat(text)
        except ValueError as exc:
            raise ConversionError(f"{filename}: unparseable time attribute {stamp!r}") from exc
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=dt.timezone.utc)
        return int(parsed.timestamp())
    match = _NAME_TIME.search(filename)
    if match:
        year, doy, hour, minute = (int(g) for g in match.groups())
        day = dt.datetime(year, 1, 1, hour, minute, tzinfo=dt.timezone.utc)
        return int((day + dt.timedelta(days=doy - 1)).timestamp())
    raise ConversionError(f"{filename}: no acquisition time in attributes or name")


def _classes(conf, n: int, filename: str) -> np.ndarray:
    """Fire-pixel confidence as mask classes 7/8/9.

    Accepts the class codes directly, or the letter categories l/n/h.
    Granules without a confidence table get the nominal class for every
    detection.
    """
    if conf is None:
        return np.full(n, 8, dtype=np.uint8)
    conf = np.asarray(conf).ravel()
    if conf.dtype.kind in "iu":
        values = conf.astype(np.int64)
        if np.isin(values, (7, 8, 9)).all():
            return values.astype(np.uint8)
        bad = sorted(set(values[~np.isin(values, (7, 8, 9))].tolist()))
        raise ConversionError(f"{filename}: unexpected confidence codes {bad}")
    if conf.dtype.kind in "SU":
        letters = np.char.lower(conf.astype("S1"))
        out = np.zeros(n, dtype=np.uint8)
        for letter, code in _CONFIDENCE_LETTERS.items():
            out[letters == letter] = code
        if (out == 0).any():
            bad = sorted(set(letters[out == 0].tolist()))
            raise ConversionError(f"{filename}: unexpected confidence letters {bad}")
        return out
    raise ConversionError(f"{filename}: confidence table has dtype {conf.dtype}")


def _halves(flag: str | None, sol_zen, n: int, filename: str):
    """Which detections belong to which overpass half.

    Granules that straddle the terminator are flagged "Both" and split
    by solar zenith (day below 90 degrees); that needs the per-pixel
    angle table.
    """
    normalized = (flag or "").lower()
    if normalized == "day":
        return [(DAY, np.ones(n, dtype=bool))]
    if normalized == "night":
        return [(NIGHT, np.ones(n, dtype=bool))]
    if normalized in ("both", ""):
        if sol_zen is None:
            what = "mixed day/night granule" if normalized else "granule without a day/night flag"
            raise ConversionError(f"{filename}: {what} and no solar zenith table to split by")
        sol_zen = np.asarray(sol_zen, dtype=np.float64).ravel()
        return [(DAY, sol_zen < 90.0), (NIGHT, sol_zen >= 90.0)]
    raise ConversionError(f"{filename}: unrecognized day/night flag {flag!r}")


def convert_granule(path, out_dir) -> list[Path]:
    """Emit one swath file per overpass half with any detections.

    Returns the written paths; a granule with no fire pixels produces
    nothing and returns an empty list.
    """
    path = Path(path)
    if not path.exists():
        raise ConversionError(f"{path}: no such file")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == HDF4_MAGIC:
        raise ConversionError(
            f"{path.name}: HDF4 granule (MODIS distribution format); no HDF4 "
            "reader is installed here, use the VIIRS HDF5 equivalent or "
            "install pyhdf"
        )
    if not h5py.is_hdf5(path):
        raise ConversionError(f"{path.name}: not an HDF5 granule")

    with h5py.File(path, "r") as f:
        if "FP_latitude" not in f or "FP_longitude" not in f:
            raise ConversionError(
                f"{path.name}: no fire-pixel tables; expected a VIIRS "
                "active-fire granule (VNP14IMG or VJ114IMG)"
            )
        lat = np.asarray(f["FP_latitude"]).ravel().astype(np.float32)
        lon = np.asarray(f["FP_longitude"]).ravel().astype(np.float32)
        t4 = np.asarray(f["FP_T4"]).ravel() if "FP_T4" in f else None
        conf = f["FP_confidence"][...] if "FP_confidence" in f else None
        sol_zen = f["FP_SolZenAng"][...] if "FP_SolZenAng" in f else None
        flag = _attr(f, _FLAG_ATTRS)
        acquired = _acquired_at(f, path.name)

    n = lat.size
    if lon.size != n or (t4 is not None and t4.size != n):
        raise ConversionError(f"{path.name}: fire-pixel tables disagree on length")
    if n == 0:
        return []
    classes = _classes(conf, n, path.name)

    # detections with broken geolocation can't be gridded; drop them
    valid = (
        np.isfinite(lat) & np.isfinite(lon) & (np.abs(lat) <= 90) & (np.abs(lon) <= 180)
    )
    if not valid.any():
        return []

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for code, mask in _halves(flag, sol_zen, n, path.name):
        mask = mask & valid
        if not mask.any():
            continue
        bands = []
        if t4 is not None:
            bands.append(PointBand("T4", RES_375M, KIND_EMISSIVE, t4[mask]))
        bands.append(PointBand("FM", RES_375M, KIND_FIREMASK, classes[mask]))
        half = "D" if code == DAY else "N"
        target = out_dir / f"{path.stem}_{half}.swt"
        write_point_swath(target, "viirs", acquired, code, lat[mask], lon[mask], tuple(bands))
        written.append(target)
    return written
