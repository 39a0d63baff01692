import datetime as dt

import numpy as np
import pytest

from firecast.bands import DayNight
from firecast.errors import EmptyDataError, NotFoundError, ValidationError
from firecast.grid import CellId
from firecast.progression import (
    Detection,
    TrackerParams,
    detections_from_mask,
    persistence_stats,
    progression_cells,
    progression_raster,
    track_events,
)
from firecast.store import PatchRaster, PatchStore
from firecast.synth import FireSimParams, simulate_fire

D0 = dt.date(2020, 2, 1)


def day(i):
    return D0 + dt.timedelta(days=i)


def _det(x, y, col, row, d):
    return Detection(CellId(x, y), (col, row), day(d))


def partition_oracle(detections, max_gap_days):
    """All-pairs link test plus BFS components; quadratic on purpose."""
    dets = list(detections)
    n = len(dets)
    linked = [[False] * n for _ in range(n)]
    for i in range(n):
        xi, yi = dets[i].global_xy
        for j in range(i + 1, n):
            xj, yj = dets[j].global_xy
            close = max(abs(xi - xj), abs(yi - yj)) <= 1
            near_time = abs((dets[i].date - dets[j].date).days) <= max_gap_days
            linked[i][j] = linked[j][i] = close and near_time
    unseen = set(range(n))
    parts = []
    while unseen:
        frontier = [unseen.pop()]
        comp = set(frontier)
        while frontier:
            i = frontier.pop()
            for j in list(unseen):
                if linked[i][j]:
                    unseen.remove(j)
                    comp.add(j)
                    frontier.append(j)
        parts.append(frozenset(dets[i] for i in comp))
    return frozenset(parts)


class TestDetection:
    def test_pixel_bounds(self):
        with pytest.raises(ValidationError):
            Detection(CellId(0, 0), (64, 0), D0)
        with pytest.raises(ValidationError):
            Detection(CellId(0, 0), (0, -1), D0)

    def test_global_coords_cross_border(self):
        # north edge of cell (0,0) touches south edge of cell (0,1)
        below = _det(0, 0, 5, 0, 0)  # row 0 = north edge
        above = _det(0, 1, 5, 63, 0)  # row 63 = south edge
        bx, by = below.global_xy
        ax, ay = above.global_xy
        assert bx == ax
        assert ay == by + 1

    def test_east_border(self):
        west = _det(0, 0, 63, 10, 0)
        east = _det(1, 0, 0, 10, 0)
        assert east.global_xy[0] == west.global_xy[0] + 1
        assert east.global_xy[1] == west.global_xy[1]

    def test_from_mask(self):
        mask = np.zeros((64, 64), np.uint8)
        mask[3, 7] = 1
        mask[60, 0] = 1
        dets = detections_from_mask(CellId(2, 1), day(4), mask)
        assert {d.pixel for d in dets} == {(7, 3), (0, 60)}
        assert all(d.date == day(4) for d in dets)
        with pytest.raises(ValidationError):
            detections_from_mask(CellId(0, 0), D0, np.zeros((32, 32)))


class TestTrackEvents:
    def test_single_pixel_over_days(self):
        dets = [_det(0, 0, 10, 10, i) for i in range(5)]
        events = track_events(dets)
        assert len(events) == 1
        assert events[0].ignition_date == day(0)
        assert events[0].last_date == day(4)

    def test_far_apart_same_day(self):
        events = track_events([_det(0, 0, 10, 10, 0), _det(0, 0, 20, 10, 0)])
        assert len(events) == 2

    def test_gap_tolerance(self):
        linked = track_events(
            [_det(0, 0, 10, 10, 0), _det(0, 0, 10, 10, 2)], TrackerParams(max_gap_days=2)
        )
        assert len(linked) == 1
        split = track_events(
            [_det(0, 0, 10, 10, 0), _det(0, 0, 10, 10, 3)], TrackerParams(max_gap_days=2)
        )
        assert len(split) == 2

    def test_diagonal_adjacency_counts(self):
        events = track_events([_det(0, 0, 10, 10, 0), _det(0, 0, 11, 11, 1)])
        assert len(events) == 1

    def test_fire_spanning_cells_is_one_event(self):
        dets = [_det(0, 0, 63, 10, 0), _det(1, 0, 0, 10, 1)]
        assert len(track_events(dets)) == 1

    def test_ids_ordered_and_input_order_free(self):
        rng = np.random.default_rng(0)
        dets = [
            _det(int(x), int(y), int(c), int(r), int(d))
            for x, y, c, r, d in zip(
                rng.integers(0, 3, 40),
                rng.integers(0, 3, 40),
                rng.integers(0, 64, 40),
                rng.integers(0, 64, 40),
                rng.integers(0, 6, 40),
            )
        ]
        dets = list({(d.cell, d.pixel, d.date): d for d in dets}.values())
        a = track_events(dets)
        b = track_events(list(reversed(dets)))
        assert [e.detections for e in a] == [e.detections for e in b]
        keys = [
            (e.ignition_date, min(d.global_xy[1] for d in e.detections))
            for e in a
        ]
        assert keys == sorted(keys)
        assert [e.id for e in a] == list(range(len(a)))

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(25):
            n = int(rng.integers(2, 60))
            gap = int(rng.integers(0, 3))
            dets = list(
                {
                    (d.cell, d.pixel, d.date): d
                    for d in (
                        _det(int(x), int(y), int(c), int(r), int(t))
                        for x, y, c, r, t in zip(
                            rng.integers(0, 2, n),
                            rng.integers(0, 2, n),
                            rng.integers(0, 64, n),
                            rng.integers(0, 64, n),
                            rng.integers(0, 10, n),
                        )
                    )
                }.values()
            )
            got = frozenset(e.detections for e in track_events(dets, TrackerParams(gap)))
            want = partition_oracle(dets, gap)
            assert got == want, f"trial {trial}"

    def test_duplicate_detection_rejected(self):
        with pytest.raises(ValidationError):
            track_events([_det(0, 0, 1, 1, 0), _det(0, 0, 1, 1, 0)])

    def test_params_validation(self):
        with pytest.raises(ValidationError):
            TrackerParams(max_gap_days=-1)


class TestProgression:
    def test_single_day_fire_is_zero(self):
        events = track_events([_det(0, 0, 10, 10, 3), _det(0, 0, 11, 10, 3)])
        patches = progression_cells(events)
        patch = patches[CellId(0, 0)]
        assert patch[10, 10] == 0 and patch[10, 11] == 0
        assert np.isnan(patch[0, 0])

    def test_independent_fires_restart_at_zero(self):
        dets = [_det(0, 0, 5, 5, 0), _det(0, 0, 50, 50, 4), _det(0, 0, 50, 51, 5)]
        patches = progression_cells(track_events(dets))
        patch = patches[CellId(0, 0)]
        assert patch[5, 5] == 0
        assert patch[50, 50] == 0
        assert patch[51, 50] == 1

    def test_earliest_detection_wins(self):
        dets = [_det(0, 0, 5, 5, 0), _det(0, 0, 5, 5, 1), _det(0, 0, 6, 5, 1)]
        patch = progression_cells(track_events(dets))[CellId(0, 0)]
        assert patch[5, 5] == 0  # not overwritten by the day-1 revisit
        assert patch[5, 6] == 1

    def test_chebyshev_growth_on_deterministic_spread(self):
        params = FireSimParams(
            grid_px=64, ignitions=(((20, 30), 0),), p_spread=1.0, seed=0
        )
        states = simulate_fire(params, n_days=6)
        dets = []
        for t in range(6):
            dets.extend(detections_from_mask(CellId(0, 0), day(t), states[t]))
        # first-seen day per pixel equals its Chebyshev ring index
        patch = progression_cells(track_events(dets))[CellId(0, 0)]
        cols, rows = np.meshgrid(np.arange(64), np.arange(64))
        cheb = np.maximum(np.abs(cols - 20), np.abs(rows - 30))
        covered = ~np.isnan(patch)
        assert covered.sum() == (cheb <= 5).sum()
        np.testing.assert_array_equal(patch[covered], cheb[covered])

    def test_mosaic_layout(self):
        dets = [_det(0, 1, 0, 0, 0), _det(1, 0, 63, 63, 0)]
        events = track_events(dets)
        mosaic = progression_raster(events)
        assert mosaic.shape == (128, 128)
        # cell (0,1) is the north-west block; its row 0 is mosaic row 0
        assert mosaic[0, 0] == 0
        # cell (1,0) is the south-east block; its row 63 is mosaic row 127
        assert mosaic[127, 127] == 0
        assert np.isnan(mosaic).sum() == 128 * 128 - 2

    def test_mosaic_region_filter(self):
        events = track_events([_det(0, 0, 1, 1, 0), _det(3, 3, 1, 1, 0)])
        mosaic = progression_raster(events, region=((0, 0), (0, 0)))
        assert mosaic.shape == (64, 64)
        assert np.nansum(mosaic) == 0 and (~np.isnan(mosaic)).sum() == 1
        with pytest.raises(ValidationError):
            progression_raster(events, region=((1, 1), (0, 0)))

    def test_empty_events(self):
        with pytest.raises(EmptyDataError):
            progression_raster([])


def _write_mask(store, product, date, cell, mask):
    store.write(
        product,
        date,
        DayNight.DAY,
        cell,
        PatchRaster(("FM",), np.where(mask, 8.0, 5.0)[np.newaxis].astype(np.float32)),
    )


class TestPersistenceStats:
    def test_identical_masks_score_one(self, tmp_path):
        store = PatchStore(tmp_path)
        mask = np.zeros((64, 64), bool)
        mask[10:14, 10:14] = True
        for i in range(3):
            _write_mask(store, "p", day(i), CellId(0, 0), mask)
        f1, iou, counts = persistence_stats(store, "p")
        assert f1 == 1.0 and iou == 1.0
        assert counts.tp == 2 * 16

    def test_alternating_disjoint_masks_score_zero(self, tmp_path):
        store = PatchStore(tmp_path)
        a = np.zeros((64, 64), bool)
        a[0:4, 0:4] = True
        b = np.zeros((64, 64), bool)
        b[30:34, 30:34] = True
        for i in range(4):
            _write_mask(store, "p", day(i), CellId(0, 0), a if i % 2 == 0 else b)
        f1, iou, _ = persistence_stats(store, "p")
        assert f1 == 0.0 and iou == 0.0

    def test_skips_fire_free_days_and_gaps(self, tmp_path):
        store = PatchStore(tmp_path)
        mask = np.zeros((64, 64), bool)
        mask[5, 5] = True
        _write_mask(store, "p", day(0), CellId(0, 0), mask)
        _write_mask(store, "p", day(1), CellId(0, 0), mask)
        # day 2 missing entirely; day 3 has no fire
        _write_mask(store, "p", day(3), CellId(0, 0), np.zeros((64, 64), bool))
        _write_mask(store, "p", day(4), CellId(0, 0), mask)
        f1, iou, counts = persistence_stats(store, "p")
        assert counts.tp == 1  # only the day0 -> day1 pair qualifies
        assert f1 == 1.0

    def test_date_range(self, tmp_path):
        store = PatchStore(tmp_path)
        mask = np.zeros((64, 64), bool)
        mask[5, 5] = True
        for i in range(4):
            _write_mask(store, "p", day(i), CellId(0, 0), mask)
        _, _, counts = persistence_stats(store, "p", (day(0), day(1)))
        assert counts.tp == 1

    def test_no_pairs_raises(self, tmp_path):
        store = PatchStore(tmp_path)
        mask = np.zeros((64, 64), bool)
        mask[5, 5] = True
        _write_mask(store, "p", day(0), CellId(0, 0), mask)
        with pytest.raises(EmptyDataError):
            persistence_stats(store, "p")
