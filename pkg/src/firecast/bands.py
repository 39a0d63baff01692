"""Band metadata for both sensors, plus the fire-mask class convention.

Band tables follow the instrument documentation: MODIS bands B1-B36
(B1-B2 at 250 m, B3-B7 at 500 m, the rest at 1 km) and VIIRS I1-I5
(375 m) / M01-M16 (750 m). Reflective bands exist only in daytime
swaths; emissive bands fly day and night.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ValidationError
from .grid import ResolutionClass


class BandKind(enum.Enum):
    REFLECTIVE = "reflective"
    EMISSIVE = "emissive"
    FIREMASK = "firemask"
    WEATHER = "weather"
    DROUGHT = "drought"


class DayNight(enum.Enum):
    DAY = "D"
    NIGHT = "N"


@dataclass(frozen=True, slots=True)
class BandSpec:
    """One band: its identifier, ground resolution, and kind."""

    name: str
    resolution: ResolutionClass
    kind: BandKind


# Fire-mask class codes (0-9). Codes 7/8/9 are low/nominal/high confidence
# fire; everything else (missing, cloud, water, non-fire, unknown) is not.
FIRE_CLASSES = frozenset({7, 8, 9})
FIRE_CLASS_DETECTED = 8
FIRE_CLASS_NONFIRE = 5
FIRE_CLASS_MISSING = 0


def is_fire(code):
    """Binarize fire-mask class codes. Accepts scalars or numpy arrays.

    This is the single place class codes are interpreted; downstream
    modules must call it rather than re-deriving the rule.
    """
    return (code == 7) | (code == 8) | (code == 9)


def _modis_bands() -> list[BandSpec]:
    out = []
    for i in range(1, 37):
        name = f"B{i}"
        if i <= 2:
            rc = ResolutionClass.RC_250M
        elif i <= 7:
            rc = ResolutionClass.RC_500M
        else:
            rc = ResolutionClass.RC_1KM
        emissive = (20 <= i <= 25) or (27 <= i <= 36)
        kind = BandKind.EMISSIVE if emissive else BandKind.REFLECTIVE
        out.append(BandSpec(name, rc, kind))
    return out


def _viirs_bands() -> list[BandSpec]:
    out = []
    for i in range(1, 6):
        kind = BandKind.EMISSIVE if i >= 4 else BandKind.REFLECTIVE
        out.append(BandSpec(f"I{i}", ResolutionClass.RC_375M, kind))
    for i in range(1, 17):
        emissive = i in (7, 8) or (10 <= i <= 16)
        kind = BandKind.EMISSIVE if emissive else BandKind.REFLECTIVE
        out.append(BandSpec(f"M{i:02d}", ResolutionClass.RC_750M, kind))
    return out


_SENSOR_BANDS = {
    "MODIS": _modis_bands(),
    "VIIRS": _viirs_bands(),
}

FIRE_MASK_BAND = {
    "MODIS": BandSpec("FM", ResolutionClass.RC_1KM, BandKind.FIREMASK),
    "VIIRS": BandSpec("FM", ResolutionClass.RC_375M, BandKind.FIREMASK),
}


# Daily weather variables in their canonical channel order, and the
# drought index stored as its own single-channel product.
WEATHER_VARS = ("t2m", "d2m", "u10", "v10", "sp", "tp", "ssrd", "swvl1", "e", "skt")
WEATHER_PRODUCT = "era5"
DROUGHT_VAR = "kbdi"
DROUGHT_PRODUCT = "kbdi"

RESOLUTION_LABEL = {
    ResolutionClass.RC_250M: "250m",
    ResolutionClass.RC_375M: "375m",
    ResolutionClass.RC_500M: "500m",
    ResolutionClass.RC_750M: "750m",
    ResolutionClass.RC_1KM: "1km",
    ResolutionClass.RC_GEODETIC: "geo",
}


def band_product(sensor: str, resolution: ResolutionClass) -> str:
    """Store product name for one sensor's bands at one resolution."""
    return f"{sensor.lower()}-{RESOLUTION_LABEL[resolution]}"


def fire_product(sensor: str) -> str:
    """Store product name for a sensor's fire-mask product.

    Kept separate from the band products because the mask shares a
    resolution with reflectance bands but is categorical.
    """
    return f"{sensor.lower()}-fire"


def band_manifest(sensor: str, daynight: DayNight) -> list[BandSpec]:
    """List the raw bands a sensor delivers for one overpass kind.

    Night swaths carry only the emissive bands.
    """
    try:
        bands = _SENSOR_BANDS[sensor]
    except KeyError:
        raise ValidationError(f"unknown sensor {sensor!r}") from None
    if daynight is DayNight.DAY:
        return list(bands)
    return [b for b in bands if b.kind is BandKind.EMISSIVE]
