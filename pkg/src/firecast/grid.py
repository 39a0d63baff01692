"""Geodetic grid, cell indexing, and patch geometry.

The study area is tiled into fixed-degree cells (0.75 deg by default).
Cell (x, y) spans the half-open box
``[lon_min + x*cell_deg, lon_min + (x+1)*cell_deg)`` by
``[lat_min + y*cell_deg, lat_min + (y+1)*cell_deg)``, so every in-bounds
point belongs to exactly one cell. Rasters over a cell are north-up:
row 0 sits at the cell's maximum latitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ValidationError

DEFAULT_CELL_DEG = 0.75

# Default study bounding box: mainland Australia plus Tasmania.
AUSTRALIA_BBOX = (112.0, -44.0, 154.0, -10.0)


class ResolutionClass(enum.Enum):
    """Nominal ground resolution of a band, keyed to a fixed patch size."""

    RC_250M = "250m"
    RC_375M = "375m"
    RC_500M = "500m"
    RC_750M = "750m"
    RC_1KM = "1km"
    RC_GEODETIC = "geo"


# Pixels per cell edge for each resolution class. 1 km data maps to 64
# pixels; the others keep the resolution ratio against that anchor.
_PATCH_SIZES = {
    ResolutionClass.RC_250M: 256,
    ResolutionClass.RC_375M: 192,
    ResolutionClass.RC_500M: 128,
    ResolutionClass.RC_750M: 96,
    ResolutionClass.RC_1KM: 64,
    ResolutionClass.RC_GEODETIC: 64,
}


def patch_size_for(rc: ResolutionClass) -> int:
    """Return the per-cell patch edge length in pixels for a resolution class."""
    return _PATCH_SIZES[rc]


@dataclass(frozen=True, slots=True, order=True)
class CellId:
    """Column/row index of one grid cell (x east, y north)."""

    x: int
    y: int


@dataclass(frozen=True, slots=True)
class GeoGrid:
    """A plate carree tiling of a lon/lat bounding box into square cells."""

    lon_min: float
    lat_min: float
    cell_deg: float
    n_cols: int
    n_rows: int

    def __post_init__(self) -> None:
        if self.cell_deg <= 0:
            raise ValidationError(f"cell_deg must be positive, got {self.cell_deg}")
        if self.n_cols < 1 or self.n_rows < 1:
            raise ValidationError(
                f"grid must have at least one cell, got {self.n_cols}x{self.n_rows}"
            )

    @property
    def lon_max(self) -> float:
        return self.lon_min + self.n_cols * self.cell_deg

    @property
    def lat_max(self) -> float:
        return self.lat_min + self.n_rows * self.cell_deg

    def cell_bounds(self, cell: CellId) -> tuple[float, float, float, float]:
        """Return (lon_min, lat_min, lon_max, lat_max) of one cell."""
        lon0 = self.lon_min + cell.x * self.cell_deg
        lat0 = self.lat_min + cell.y * self.cell_deg
        return (lon0, lat0, lon0 + self.cell_deg, lat0 + self.cell_deg)

    def cells(self):
        """Iterate all cells in row-major (y, then x) order."""
        for y in range(self.n_rows):
            for x in range(self.n_cols):
                yield CellId(x, y)


def make_grid(
    lon_min: float,
    lat_min: float,
    lon_max: float,
    lat_max: float,
    cell_deg: float = DEFAULT_CELL_DEG,
) -> GeoGrid:
    """Build the grid covering a bounding box, rounding cell counts up.

    The last column/row may overhang the box so the full box is covered.
    """
    if not (lon_max > lon_min and lat_max > lat_min and cell_deg > 0):
        raise ValidationError(
            f"invalid bounds: lon [{lon_min}, {lon_max}], "
            f"lat [{lat_min}, {lat_max}], cell {cell_deg}"
        )
    n_cols = math.ceil((lon_max - lon_min) / cell_deg)
    n_rows = math.ceil((lat_max - lat_min) / cell_deg)
    return GeoGrid(lon_min, lat_min, cell_deg, n_cols, n_rows)


def cell_of(grid: GeoGrid, lon: float, lat: float) -> CellId | None:
    """Return the cell whose half-open span contains (lon, lat), or None."""
    if not (math.isfinite(lon) and math.isfinite(lat)):
        return None
    x = math.floor((lon - grid.lon_min) / grid.cell_deg)
    y = math.floor((lat - grid.lat_min) / grid.cell_deg)
    if 0 <= x < grid.n_cols and 0 <= y < grid.n_rows:
        return CellId(x, y)
    return None


def pixel_coord(
    grid: GeoGrid,
    cell: CellId,
    lon: float,
    lat: float,
    patch_px: int,
) -> tuple[float, float]:
    """Map a point inside a cell to fractional (col, row) patch coordinates.

    Row 0 is the north edge; corners map exactly to 0 and patch_px. The
    result is deliberately kept fractional so later resampling can weight
    by true sub-pixel distance.
    """
    lon0, lat0, lon1, lat1 = grid.cell_bounds(cell)
    if not (lon0 <= lon < lon1 and lat0 <= lat < lat1):
        raise ValidationError(
            f"point ({lon}, {lat}) lies outside cell ({cell.x}, {cell.y})"
        )
    col = patch_px * (lon - lon0) / grid.cell_deg
    row = patch_px * (lat1 - lat) / grid.cell_deg
    return (col, row)


def cell_local_date_offset_hours(grid: GeoGrid, cell: CellId) -> float:
    """Solar-time offset (hours east of UTC) at the cell center."""
    lon0, _, lon1, _ = grid.cell_bounds(cell)
    return (lon0 + lon1) / 2.0 / 15.0


def pixel_index(
    grid: GeoGrid,
    cell: CellId,
    lon: float,
    lat: float,
    patch_px: int,
) -> tuple[int, int]:
    """Integer (col, row) of the patch pixel containing an in-cell point.

    Flooring the south-up fraction before flipping keeps the cell's own
    southern edge (which the half-open span includes) inside the bottom
    row instead of one past it.
    """
    lon0, lat0, lon1, lat1 = grid.cell_bounds(cell)
    if not (lon0 <= lon < lon1 and lat0 <= lat < lat1):
        raise ValidationError(
            f"point ({lon}, {lat}) lies outside cell ({cell.x}, {cell.y})"
        )
    col = math.floor(patch_px * (lon - lon0) / grid.cell_deg)
    south_row = math.floor(patch_px * (lat - lat0) / grid.cell_deg)
    col = min(col, patch_px - 1)
    south_row = min(south_row, patch_px - 1)
    return (col, patch_px - 1 - south_row)
