"""Swath-to-patch resampling.

Continuous bands use inverse-distance weighting over the k nearest
sources; fire masks use nearest-neighbor class transfer; geodetic
rasters (weather, drought) are patchified by direct nearest sampling.
Distances are measured in target pixel units after projecting source
coordinates through the cell's affine transform, so the neighborhood
is isotropic in patch space rather than in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .bands import BandKind
from .errors import EmptyDataError, ValidationError
from .grid import CellId, GeoGrid, cell_of, patch_size_for
from .swath import Swath


@dataclass(frozen=True)
class ResampleParams:
    k_neighbors: int = 4
    power: float = 2.0
    radius_px: float = 2.0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be at least 1")
        if not self.power > 0:
            raise ValidationError("power must be positive")
        if not self.radius_px > 0:
            raise ValidationError("radius_px must be positive")


def source_patch_coords(
    grid: GeoGrid, cell: CellId, lon: np.ndarray, lat: np.ndarray, patch_px: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fractional (col, row) patch coordinates for source points.

    Unlike pixel lookups, this is deliberately unchecked: sources just
    outside the cell still fall within the search radius of edge pixels
    and must contribute.
    """
    lon0, lat0, lon1, lat1 = grid.cell_bounds(cell)
    col = patch_px * (np.asarray(lon, dtype=np.float64) - lon0) / grid.cell_deg
    row = patch_px * (lat1 - np.asarray(lat, dtype=np.float64)) / grid.cell_deg
    return col, row


def _target_centers(patch_px: int) -> np.ndarray:
    cols, rows = np.meshgrid(
        np.arange(patch_px) + 0.5, np.arange(patch_px) + 0.5, indexing="xy"
    )
    return np.column_stack([cols.ravel(), rows.ravel()])


def _clip_sources(
    cols: np.ndarray, rows: np.ndarray, patch_px: int, radius: float
) -> np.ndarray:
    margin = radius + 1.0
    return (
        (cols > -margin)
        & (cols < patch_px + margin)
        & (rows > -margin)
        & (rows < patch_px + margin)
    )


def idw_patch(
    src_cols: np.ndarray,
    src_rows: np.ndarray,
    values: np.ndarray,
    patch_px: int,
    params: ResampleParams,
) -> np.ndarray:
    """Inverse-distance interpolation onto a patch; NaN where no source.

    Each target pixel is a convex combination of its <= k nearest non-NaN
    sources within radius_px. A source sitting exactly on the pixel
    center wins outright (lowest source index among coincident ones).
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    cols = np.asarray(src_cols, dtype=np.float64).ravel()
    rows = np.asarray(src_rows, dtype=np.float64).ravel()
    keep = np.isfinite(values)
    keep &= _clip_sources(cols, rows, patch_px, params.radius_px)
    out = np.full(patch_px * patch_px, np.nan, dtype=np.float64)
    if keep.any():
        pts = np.column_stack([cols[keep], rows[keep]])
        vals = values[keep]
        tree = cKDTree(pts)
        targets = _target_centers(patch_px)
        k = min(params.k_neighbors, len(pts))
        dist, idx = tree.query(
            targets,
            k=k,
            distance_upper_bound=np.nextafter(params.radius_px, np.inf),
        )
        if k == 1:
            dist = dist[:, None]
            idx = idx[:, None]
        hit = np.isfinite(dist)
        any_hit = hit.any(axis=1)
        with np.errstate(divide="ignore"):
            w = np.where(hit, np.power(dist, -params.power, where=hit), 0.0)
        wsum = w.sum(axis=1)
        vneigh = vals[np.where(hit, idx, 0)]
        # anchor on the nearest neighbor and clip to the neighbor range:
        # keeps constant fields exactly constant and the output convex
        v0 = vneigh[:, 0]
        with np.errstate(invalid="ignore"):
            delta = ((w * np.where(hit, vneigh - v0[:, None], 0.0)).sum(axis=1)) / wsum
            lo = np.where(hit, vneigh, np.inf).min(axis=1)
            hi = np.where(hit, vneigh, -np.inf).max(axis=1)
            out = np.where(any_hit, np.clip(v0 + delta, lo, hi), np.nan)
        coincident = np.flatnonzero(any_hit & (dist[:, 0] == 0.0))
        for t in coincident:
            exact = tree.query_ball_point(targets[t], 0.0)
            out[t] = vals[min(exact)]
    return out.reshape(patch_px, patch_px).astype(np.float32)


def nearest_class_patch(
    src_cols: np.ndarray,
    src_rows: np.ndarray,
    codes: np.ndarray,
    patch_px: int,
    radius_px: float,
) -> np.ndarray:
    """Nearest-source class transfer; class 0 where no source in radius.

    Distance ties go to the lowest source index. Ties can only extend
    past the k probed neighbors when all k sit at the same distance, so
    only those pixels need the exhaustive ball rescan.
    """
    codes = np.asarray(codes, dtype=np.uint8).ravel()
    cols = np.asarray(src_cols, dtype=np.float64).ravel()
    rows = np.asarray(src_rows, dtype=np.float64).ravel()
    keep = _clip_sources(cols, rows, patch_px, radius_px)
    out = np.zeros(patch_px * patch_px, dtype=np.uint8)
    if keep.any():
        pts = np.column_stack([cols[keep], rows[keep]])
        kept_codes = codes[keep]
        n_src = len(pts)
        tree = cKDTree(pts)
        targets = _target_centers(patch_px)
        k = min(8, n_src)
        dist, idx = tree.query(
            targets, k=k, distance_upper_bound=np.nextafter(radius_px, np.inf)
        )
        if k == 1:
            dist = dist[:, None]
            idx = idx[:, None]
        hit = np.isfinite(dist)
        any_hit = hit.any(axis=1)
        d_min = dist[:, 0]
        at_min = hit & (dist == d_min[:, None])
        candidate = np.where(at_min, idx, n_src)
        chosen = candidate.min(axis=1)
        out = np.where(any_hit, kept_codes[np.minimum(chosen, n_src - 1)], 0)
        unresolved = np.flatnonzero(any_hit & at_min.all(axis=1) & (k < n_src))
        for t in unresolved:
            ball = np.array(
                tree.query_ball_point(targets[t], np.nextafter(d_min[t], np.inf))
            )
            d_ball = np.hypot(*(pts[ball] - targets[t]).T)
            out[t] = kept_codes[ball[d_ball == d_ball.min()].min()]
        out = out.astype(np.uint8)
    return out.reshape(patch_px, patch_px)


def idw_resample(
    swath: Swath,
    band_name: str,
    grid: GeoGrid,
    cell: CellId,
    params: ResampleParams | None = None,
    patch_px: int | None = None,
) -> np.ndarray:
    params = params or ResampleParams()
    spec = swath.band_spec(band_name)
    if spec.kind is BandKind.FIREMASK:
        raise ValidationError(f"{band_name!r} is a class band, not interpolatable")
    if patch_px is None:
        patch_px = patch_size_for(spec.resolution)
    cols, rows = source_patch_coords(grid, cell, swath.lon, swath.lat, patch_px)
    return idw_patch(cols, rows, swath.band_values(band_name), patch_px, params)


def nn_resample(
    swath: Swath,
    band_name: str,
    grid: GeoGrid,
    cell: CellId,
    radius_px: float = 2.0,
    patch_px: int | None = None,
) -> np.ndarray:
    spec = swath.band_spec(band_name)
    if spec.kind is not BandKind.FIREMASK:
        raise ValidationError(f"{band_name!r} is not a class band")
    if patch_px is None:
        patch_px = patch_size_for(spec.resolution)
    cols, rows = source_patch_coords(grid, cell, swath.lon, swath.lat, patch_px)
    return nearest_class_patch(
        cols, rows, swath.band_values(band_name), patch_px, radius_px
    )


def swath_cells(grid: GeoGrid, swath: Swath) -> list[CellId]:
    """Sorted unique grid cells containing at least one swath pixel."""
    found = set()
    for lon, lat in zip(swath.lon, swath.lat):
        cell = cell_of(grid, float(lon), float(lat))
        if cell is not None:
            found.add(cell)
    return sorted(found)


@dataclass(frozen=True)
class GeodeticRaster:
    """North-up regular lon/lat raster (weather or drought fields)."""

    values: np.ndarray  # (rows, cols) float32
    lon_min: float
    lat_max: float
    dlon: float
    dlat: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise ValidationError("geodetic raster values must be 2-D")
        if not (self.dlon > 0 and self.dlat > 0):
            raise ValidationError("geodetic raster spacing must be positive")
        object.__setattr__(self, "values", values)

    @property
    def lon_max(self) -> float:
        return self.lon_min + self.values.shape[1] * self.dlon

    @property
    def lat_min(self) -> float:
        return self.lat_max - self.values.shape[0] * self.dlat


def patchify_geodetic(
    raster: GeodeticRaster, grid: GeoGrid, patch_px: int = 64
) -> dict[CellId, np.ndarray]:
    """Nearest-sample a geodetic raster into per-cell patches.

    Covers every grid cell whose bounds overlap the raster extent; patch
    pixels falling outside the raster are NaN. Raises when nothing
    overlaps at all.
    """
    h, w = raster.values.shape
    out: dict[CellId, np.ndarray] = {}
    frac = (np.arange(patch_px) + 0.5) / patch_px
    for cell in grid.cells():
        lon0, lat0, lon1, lat1 = grid.cell_bounds(cell)
        if lon1 <= raster.lon_min or lon0 >= raster.lon_max:
            continue
        if lat1 <= raster.lat_min or lat0 >= raster.lat_max:
            continue
        lon_c = lon0 + frac * grid.cell_deg
        lat_r = lat1 - frac * grid.cell_deg
        j = np.floor((lon_c - raster.lon_min) / raster.dlon).astype(int)
        i = np.floor((raster.lat_max - lat_r) / raster.dlat).astype(int)
        jj, ii = np.meshgrid(j, i)
        inside = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
        patch = np.full((patch_px, patch_px), np.nan, dtype=np.float32)
        patch[inside] = raster.values[ii[inside], jj[inside]]
        out[cell] = patch
    if not out:
        raise EmptyDataError("geodetic raster does not overlap the grid")
    return out
