"""Synthetic fire spread and synthetic sensors.

A small cellular automaton provides ground-truth fire evolution; two
observation models turn it into swaths the rest of the pipeline can
ingest. The coherent sensor reports every burning pixel; the stochastic
sensor thins detections at random, reproducing the flickering masks
that plague one of the real detection products. Everything here is a
pure function of its parameters and seed.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bands import (
    FIRE_CLASS_DETECTED,
    FIRE_CLASS_NONFIRE,
    BandKind,
    BandSpec,
    DayNight,
)
from .errors import ValidationError
from .grid import (
    CellId,
    GeoGrid,
    ResolutionClass,
    cell_local_date_offset_hours,
    patch_size_for,
)
from .swath import Swath

_OFFSETS = [
    (ox, oy)
    for oy in (-1, 0, 1)
    for ox in (-1, 0, 1)
    if not (ox == 0 and oy == 0)
]


@dataclass(frozen=True)
class FireSimParams:
    """Cellular-automaton fire model over one grid_px x grid_px cell."""

    grid_px: int
    ignitions: tuple[tuple[tuple[int, int], int], ...]  # ((col, row), day)
    p_spread: float
    wind: tuple[float, float] = (0.0, 0.0)  # (dx, dy), dy positive = southward push
    burn_days: int | None = None  # None = burns forever
    seed: int = 0

    def __post_init__(self):
        if self.grid_px < 1:
            raise ValidationError("grid_px must be positive")
        if not 0.0 <= self.p_spread <= 1.0:
            raise ValidationError("p_spread must be within [0, 1]")
        if self.burn_days is not None and self.burn_days < 1:
            raise ValidationError("burn_days must be at least 1")
        for (col, row), day in self.ignitions:
            if not (0 <= col < self.grid_px and 0 <= row < self.grid_px):
                raise ValidationError(f"ignition ({col}, {row}) outside raster")
            if day < 0:
                raise ValidationError("ignition day must be non-negative")


def _shift(mask: np.ndarray, ox: int, oy: int) -> np.ndarray:
    """mask sampled at (row+oy, col+ox), zero beyond the border."""
    out = np.zeros_like(mask)
    h, w = mask.shape
    src_r = slice(max(oy, 0), h + min(oy, 0))
    src_c = slice(max(ox, 0), w + min(ox, 0))
    dst_r = slice(max(-oy, 0), h + min(-oy, 0))
    dst_c = slice(max(-ox, 0), w + min(-ox, 0))
    out[dst_r, dst_c] = mask[src_r, src_c]
    return out


def simulate_fire(params: FireSimParams, n_days: int) -> np.ndarray:
    """Run the automaton; returns (n_days, grid_px, grid_px) burning masks.

    Day 0 holds the day-0 ignitions. On each later day an unburned pixel
    ignites with probability 1 minus the product, over its burning
    8-neighbors, of (1 - spread probability toward this pixel); wind
    shifts that per-direction probability. A pixel burns for burn_days
    then goes out for good.
    """
    if n_days < 1:
        raise ValidationError("n_days must be at least 1")
    g = params.grid_px
    rng = np.random.default_rng(params.seed)
    dx, dy = params.wind
    # per-offset spread probability: offset points target -> neighbor, so
    # the travel direction is its negation
    q = {}
    for ox, oy in _OFFSETS:
        norm = float(np.hypot(ox, oy))
        bias = (dx * -ox + dy * -oy) / norm
        q[(ox, oy)] = float(np.clip(params.p_spread + bias, 0.0, 1.0))

    ignite_day = np.full((g, g), -1, dtype=np.int32)
    for (col, row), day in params.ignitions:
        if day == 0:
            ignite_day[row, col] = 0

    def burning_at(d: int) -> np.ndarray:
        lit = ignite_day >= 0
        active = lit & (ignite_day <= d)
        if params.burn_days is not None:
            active &= d < ignite_day + params.burn_days
        return active

    out = np.zeros((n_days, g, g), dtype=bool)
    out[0] = burning_at(0)
    for d in range(1, n_days):
        prev = out[d - 1]
        survive = np.ones((g, g), dtype=np.float64)
        for off in _OFFSETS:
            survive *= np.where(_shift(prev, *off), 1.0 - q[off], 1.0)
        p_ignite = 1.0 - survive
        u = rng.random((g, g))
        fresh = (ignite_day < 0) & (u < p_ignite)
        ignite_day[fresh] = d
        for (col, row), day in params.ignitions:
            if day == d and ignite_day[row, col] < 0:
                ignite_day[row, col] = d
        out[d] = burning_at(d)
    return out


class ObservationMode(Enum):
    COHERENT = "coherent"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class SensorModel:
    """How a synthetic sensor reports the true fire state."""

    name: str
    mode: ObservationMode
    resolution: ResolutionClass = ResolutionClass.RC_1KM
    detect_prob: float | None = None  # default: 1.0 coherent, 0.5 stochastic
    false_alarm_prob: float = 0.0
    jitter_px: float = 0.0

    def __post_init__(self):
        if self.detect_prob is None:
            prob = 1.0 if self.mode is ObservationMode.COHERENT else 0.5
            object.__setattr__(self, "detect_prob", prob)
        if not 0.0 <= self.detect_prob <= 1.0:
            raise ValidationError("detect_prob must be within [0, 1]")
        if not 0.0 <= self.false_alarm_prob <= 1.0:
            raise ValidationError("false_alarm_prob must be within [0, 1]")
        if self.mode is ObservationMode.COHERENT and self.detect_prob != 1.0:
            raise ValidationError("a coherent sensor detects everything")


PROXY_BAND_NAME = "T4"
FIRE_BAND_NAME = "FM"

_OVERPASS_LOCAL_HOUR = {DayNight.DAY: 13.5, DayNight.NIGHT: 1.5}


def observe(
    states: np.ndarray,
    model: SensorModel,
    grid: GeoGrid,
    cell: CellId,
    day: int,
    daynight: DayNight,
    seed: int,
    base_date: dt.date = dt.date(2020, 1, 1),
) -> Swath:
    """One synthetic overpass of one cell on one day.

    The swath carries a thermal proxy band (hot where the fire truly
    burns, noise elsewhere) and a fire-mask band from the sensor's
    detector. The random stream draws the same shapes in the same order
    for every model, so a coherent sensor's detections are a superset of
    a stochastic sensor's under the same seed.
    """
    if not 0 <= day < len(states):
        raise ValidationError(f"day {day} outside simulated range")
    n_px = patch_size_for(model.resolution)
    g = states.shape[1]
    rng = np.random.default_rng(seed)
    u_det = rng.random((n_px, n_px))
    u_fa = rng.random((n_px, n_px))
    jitter = rng.normal(0.0, 1.0, (2, n_px, n_px))
    noise = rng.normal(0.0, 1.0, (n_px, n_px))

    # point-sample the true state at sensor pixel centers
    src = np.minimum((np.arange(n_px) + 0.5) * g // n_px, g - 1).astype(int)
    burn = states[day][np.ix_(src, src)]

    flagged = (burn & (u_det < model.detect_prob)) | (
        ~burn & (u_fa < model.false_alarm_prob)
    )
    fm = np.where(flagged, FIRE_CLASS_DETECTED, FIRE_CLASS_NONFIRE).astype(np.uint8)
    proxy = (290.0 + 80.0 * burn + 2.0 * noise).astype(np.float32)

    cols = np.arange(n_px) + 0.5
    rows = np.arange(n_px) + 0.5
    col_coord = cols[None, :] + model.jitter_px * jitter[0]
    row_coord = rows[:, None] + model.jitter_px * jitter[1]
    lon0, lat0, lon1, lat1 = grid.cell_bounds(cell)
    lon = lon0 + col_coord / n_px * grid.cell_deg
    lat = lat1 - row_coord / n_px * grid.cell_deg
    lon = np.clip(lon, -180.0, 180.0).astype(np.float32)
    lat = np.clip(lat, -90.0, 90.0).astype(np.float32)

    date = base_date + dt.timedelta(days=day)
    local_secs = (date - dt.date(1970, 1, 1)).days * 86400.0
    local_secs += _OVERPASS_LOCAL_HOUR[daynight] * 3600.0
    acquired = int(
        round(local_secs - cell_local_date_offset_hours(grid, cell) * 3600.0)
    )

    bands = (
        (BandSpec(PROXY_BAND_NAME, model.resolution, BandKind.EMISSIVE), proxy.ravel()),
        (BandSpec(FIRE_BAND_NAME, model.resolution, BandKind.FIREMASK), fm.ravel()),
    )
    return Swath(model.name, acquired, daynight, lat.ravel(), lon.ravel(), bands)


_WEATHER_BASE = {
    "t2m": (295.0, 12.0),
    "d2m": (283.0, 8.0),
    "u10": (0.0, 6.0),
    "v10": (0.0, 6.0),
    "sp": (1000.0, 25.0),
    "tp": (2.0, 2.0),
    "ssrd": (220.0, 70.0),
    "swvl1": (0.25, 0.15),
    "e": (3.0, 1.5),
    "skt": (300.0, 14.0),
    "kbdi": (350.0, 180.0),
}


def synthetic_weather(
    grid: GeoGrid, date: dt.date, var: str, spacing_deg: float = 0.25
):
    """A smooth, fully deterministic geodetic field for one variable.

    Varies with position and date so normalization statistics and the
    daily ingest path are exercised, without any randomness to track.
    """
    from .resample import GeodeticRaster

    if var not in _WEATHER_BASE:
        raise ValidationError(f"unknown synthetic weather variable {var!r}")
    base, amp = _WEATHER_BASE[var]
    # distinct spatial phase per variable so channels are not collinear
    phase = sum(ord(ch) for ch in var) * 0.7
    n_cols = int(np.ceil((grid.lon_max - grid.lon_min) / spacing_deg))
    n_rows = int(np.ceil((grid.lat_max - grid.lat_min) / spacing_deg))
    lon = grid.lon_min + (np.arange(n_cols) + 0.5) * spacing_deg
    lat = grid.lat_max - (np.arange(n_rows) + 0.5) * spacing_deg
    t = date.toordinal()
    field = (
        np.sin(lon[None, :] / 9.0 + phase + 0.15 * t)
        + np.cos(lat[:, None] / 7.0 + 0.5 * phase)
        + 0.3 * np.sin(0.31 * t + phase)
    )
    values = (base + amp * field / 2.3).astype(np.float32)
    return GeodeticRaster(values, grid.lon_min, grid.lat_max, spacing_deg, spacing_deg)
