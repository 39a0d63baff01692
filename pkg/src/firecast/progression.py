"""Fire tracking over time: events, days-since-ignition rasters, and
temporal-consistency statistics.

Individual fires are connected components of daily detections linked
when they sit within one pixel of each other (8-neighborhood, across
cell borders via global pixel coordinates) and at most `max_gap_days`
apart in time. Progression rasters show, per pixel, how many days after
its event's ignition the pixel was first seen burning.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .bands import DayNight
from .dataset import TARGET_PX, daily_fire_mask
from .errors import EmptyDataError, NotFoundError, ValidationError
from .grid import CellId
from .metrics import evaluate_pairs
from .store import PatchStore


@dataclass(frozen=True, slots=True, order=True)
class Detection:
    """One burning pixel on one day, in cell-local mask coordinates."""

    cell: CellId
    pixel: tuple[int, int]  # (col, row), row 0 at the cell's north edge
    date: dt.date

    def __post_init__(self):
        col, row = self.pixel
        if not (0 <= col < TARGET_PX and 0 <= row < TARGET_PX):
            raise ValidationError(f"pixel {self.pixel} outside {TARGET_PX}px patch")

    @property
    def global_xy(self) -> tuple[int, int]:
        """Grid-wide pixel coordinates; y grows northward so adjacency
        works across cell borders (cell y indexes south to north while
        raster rows run north to south)."""
        col, row = self.pixel
        return (
            self.cell.x * TARGET_PX + col,
            self.cell.y * TARGET_PX + (TARGET_PX - 1 - row),
        )


@dataclass(frozen=True, slots=True)
class TrackerParams:
    max_gap_days: int = 2

    def __post_init__(self):
        if self.max_gap_days < 0:
            raise ValidationError("max_gap_days must be >= 0")


@dataclass(frozen=True)
class FireEvent:
    """One tracked fire: a disjoint set of detections and its start day."""

    id: int
    detections: frozenset[Detection] = field(repr=False)
    ignition_date: dt.date

    @property
    def last_date(self) -> dt.date:
        return max(d.date for d in self.detections)


def detections_from_mask(cell: CellId, date: dt.date, mask) -> list[Detection]:
    """All burning pixels of one 64x64 daily mask as detections."""
    mask = np.asarray(mask)
    if mask.shape != (TARGET_PX, TARGET_PX):
        raise ValidationError(f"mask must be {TARGET_PX}x{TARGET_PX}, got {mask.shape}")
    return [
        Detection(cell, (int(c), int(r)), date) for r, c in np.argwhere(mask > 0)
    ]


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[rj] = ri


def track_events(detections, params: TrackerParams = TrackerParams()) -> list[FireEvent]:
    """Partition detections into fires by spatio-temporal connectivity.

    Two detections link iff their global pixels are identical or
    8-adjacent and their dates differ by at most max_gap_days. Events
    are the connected components, with ids assigned in
    (ignition_date, southernmost y, westernmost x) order so output is
    independent of input order.
    """
    dets = list(detections)
    index = {}
    for i, det in enumerate(dets):
        gx, gy = det.global_xy
        key = (det.date, gx, gy)
        if key in index:
            raise ValidationError(f"duplicate detection at {key}")
        index[key] = i
    uf = _UnionFind(len(dets))
    for i, det in enumerate(dets):
        gx, gy = det.global_xy
        for gap in range(params.max_gap_days + 1):
            date2 = det.date + dt.timedelta(days=gap)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if gap == 0 and dx == 0 and dy == 0:
                        continue
                    j = index.get((date2, gx + dx, gy + dy))
                    if j is not None:
                        uf.union(i, j)
    groups: dict[int, list[Detection]] = {}
    for i, det in enumerate(dets):
        groups.setdefault(uf.find(i), []).append(det)

    def order_key(members):
        xs, ys = zip(*(m.global_xy for m in members))
        return (min(m.date for m in members), min(ys), min(xs))

    events = []
    for members in sorted(groups.values(), key=order_key):
        events.append(
            FireEvent(len(events), frozenset(members), min(m.date for m in members))
        )
    return events


def _ignition_of(events) -> dict[Detection, dt.date]:
    out = {}
    for event in events:
        for det in event.detections:
            out[det] = event.ignition_date
    return out


def progression_cells(events) -> dict[CellId, np.ndarray]:
    """Days-since-ignition per covered cell; untouched pixels are NaN.

    Each pixel takes its value from the earliest detection covering it,
    measured from that detection's own event ignition, so independent
    fires each restart at zero.
    """
    ignition = _ignition_of(events)
    first: dict[tuple[CellId, tuple[int, int]], Detection] = {}
    for det in ignition:
        key = (det.cell, det.pixel)
        cur = first.get(key)
        if cur is None or det.date < cur.date:
            first[key] = det
    out: dict[CellId, np.ndarray] = {}
    for (cell, (col, row)), det in first.items():
        patch = out.setdefault(cell, np.full((TARGET_PX, TARGET_PX), np.nan, np.float32))
        patch[row, col] = (det.date - ignition[det]).days
    return out


def progression_raster(events, region=None) -> np.ndarray:
    """North-up mosaic of days-since-ignition over a cell range.

    `region` is an inclusive ((x0, y0), (x1, y1)) cell-index rectangle;
    by default the bounding box of all covered cells. NaN marks pixels
    never detected burning.
    """
    patches = progression_cells(events)
    if region is None:
        if not patches:
            raise EmptyDataError("no detections to rasterize")
        xs = [c.x for c in patches]
        ys = [c.y for c in patches]
        region = ((min(xs), min(ys)), (max(xs), max(ys)))
    (x0, y0), (x1, y1) = region
    if x1 < x0 or y1 < y0:
        raise ValidationError(f"bad cell region {region}")
    nx, ny = x1 - x0 + 1, y1 - y0 + 1
    mosaic = np.full((ny * TARGET_PX, nx * TARGET_PX), np.nan, np.float32)
    for cell, patch in patches.items():
        if not (x0 <= cell.x <= x1 and y0 <= cell.y <= y1):
            continue
        # row blocks run north to south: the highest cell y sits on top
        top = (y1 - cell.y) * TARGET_PX
        left = (cell.x - x0) * TARGET_PX
        mosaic[top : top + TARGET_PX, left : left + TARGET_PX] = patch
    return mosaic


def persistence_stats(store: PatchStore, product: str, date_range=None):
    """Temporal consistency of one fire product: score each day's mask
    as a prediction of the next day's, over consecutive-day pairs in
    cells that show fire on the first day.

    Returns (f1, iou, counts).
    """
    dates = store.dates(product)
    if date_range is not None:
        start, end = date_range
        dates = [d for d in dates if start <= d <= end]
    present = set(dates)
    pairs = []
    for date in dates:
        nxt = date + dt.timedelta(days=1)
        if nxt not in present:
            continue
        cells = set(store.cells(product, date, DayNight.DAY))
        cells |= set(store.cells(product, date, DayNight.NIGHT))
        for cell in sorted(cells):
            today = daily_fire_mask(store, product, date, cell)
            if not today.any():
                continue
            try:
                tomorrow = daily_fire_mask(store, product, nxt, cell)
            except NotFoundError:
                continue
            pairs.append((today.astype(np.float64), tomorrow))
    if not pairs:
        raise EmptyDataError(f"no consecutive-day pairs with fire for {product!r}")
    return evaluate_pairs(pairs)
