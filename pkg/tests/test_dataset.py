import datetime as dt

import numpy as np
import pytest

from firecast.bands import BandKind, DayNight
from firecast.dataset import (
    ChannelManifest,
    ChannelRef,
    NormalizationStats,
    SampleKey,
    Split,
    area_resize,
    bilinear_resize,
    build_dataset,
    build_input,
    build_target,
    compute_normalization,
    load_arrays,
    modis_manifest,
    nearest_resize,
    read_dataset_info,
    read_sample,
    resize_channel,
    select_samples,
    split_cells,
    viirs_manifest,
)
from firecast.errors import EmptyDataError, NotFoundError, ValidationError
from firecast.grid import CellId
from firecast.store import PatchRaster, PatchStore

DAY, NIGHT = DayNight.DAY, DayNight.NIGHT
D0 = dt.date(2020, 1, 5)


def bilinear_oracle(values, out_px):
    """Per-pixel reference: center-aligned 2-tap interpolation, both axes."""
    src = np.asarray(values, dtype=float)
    src_px = src.shape[0]

    def taps(t):
        s = (t + 0.5) * src_px / out_px - 0.5
        s0 = int(np.floor(s))
        f = s - s0
        lo = min(max(s0, 0), src_px - 1)
        hi = min(max(s0 + 1, 0), src_px - 1)
        return ((lo, 1.0 - f), (hi, f))

    out = np.zeros((out_px, out_px))
    for ty in range(out_px):
        for tx in range(out_px):
            acc = 0.0
            for sy, wy in taps(ty):
                for sx, wx in taps(tx):
                    acc += wy * wx * src[sy, sx]
            out[ty, tx] = acc
    return out


class TestManifests:
    def test_default_channel_counts(self):
        assert len(modis_manifest()) == 65
        assert len(viirs_manifest()) == 43

    def test_idents_unique_and_ordered(self):
        for manifest in (modis_manifest(), viirs_manifest()):
            idents = manifest.idents
            assert len(set(idents)) == len(idents)
            # two builds agree channel for channel
            rebuilt = modis_manifest() if manifest.name == "modis" else viirs_manifest()
            assert rebuilt.idents == idents
            assert rebuilt.version == manifest.version

    def test_night_channels_not_reflective(self):
        for manifest in (modis_manifest(), viirs_manifest()):
            for ref in manifest.channels:
                if ref.daynight is NIGHT:
                    assert ref.kind is not BandKind.REFLECTIVE

    def test_composition(self):
        kinds = [c.kind for c in modis_manifest().channels]
        assert kinds.count(BandKind.FIREMASK) == 2
        assert kinds.count(BandKind.WEATHER) == 10
        assert kinds.count(BandKind.DROUGHT) == 1
        kinds = [c.kind for c in viirs_manifest().channels]
        assert kinds.count(BandKind.FIREMASK) == 2
        assert kinds.count(BandKind.WEATHER) == 8
        assert kinds.count(BandKind.DROUGHT) == 1

    def test_rejects_duplicates_and_empty(self):
        ref = ChannelRef("p", "b", DAY, BandKind.EMISSIVE)
        with pytest.raises(ValidationError):
            ChannelManifest("m", 1, (ref, ref))
        with pytest.raises(ValidationError):
            ChannelManifest("m", 1, ())


class TestSplitCells:
    def test_deterministic_and_order_free(self):
        cells = [CellId(x, y) for x in range(6) for y in range(6)]
        a = split_cells(cells, seed=3)
        b = split_cells(list(reversed(cells)), seed=3)
        assert a == b

    def test_fraction_on_large_population(self):
        cells = [CellId(x, y) for x in range(100) for y in range(100)]
        assignment = split_cells(cells, seed=0)
        share = sum(v is Split.VAL for v in assignment.values()) / len(cells)
        assert 0.235 <= share <= 0.265

    def test_seed_changes_assignment(self):
        cells = [CellId(x, y) for x in range(20) for y in range(20)]
        a = split_cells(cells, seed=0)
        b = split_cells(cells, seed=1)
        assert any(a[c] != b[c] for c in cells)

    def test_fraction_validation(self):
        with pytest.raises(ValidationError):
            split_cells([CellId(0, 0)], seed=0, val_fraction=0.0)
        with pytest.raises(ValidationError):
            split_cells([CellId(0, 0)], seed=0, val_fraction=1.0)


class TestResize:
    def test_bilinear_matches_oracle(self):
        rng = np.random.default_rng(0)
        for src_px in (64, 96, 128):
            values = rng.normal(0, 1, (src_px, src_px))
            got = bilinear_resize(values, 192)
            want = bilinear_oracle(values, 192)
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)

    def test_bilinear_preserves_constant(self):
        out = bilinear_resize(np.full((64, 64), 3.25), 192)
        np.testing.assert_array_equal(out, np.full((192, 192), 3.25))

    def test_bright_pixel_lands_in_its_block(self):
        values = np.zeros((64, 64))
        values[17, 40] = 5.0
        out = bilinear_resize(values, 192)
        ty, tx = np.unravel_index(np.argmax(out), out.shape)
        assert 17 * 3 <= ty < 18 * 3 and 40 * 3 <= tx < 41 * 3

    def test_area_preserves_constant_and_mean(self):
        out = area_resize(np.full((256, 256), -1.5), 192)
        np.testing.assert_allclose(out, np.full((192, 192), -1.5), atol=1e-12)
        rng = np.random.default_rng(1)
        values = rng.normal(0, 1, (256, 256))
        out = area_resize(values, 192)
        assert out.shape == (192, 192)
        assert abs(out.mean() - values.mean()) < 1e-9

    def test_nearest_is_pixel_replication(self):
        rng = np.random.default_rng(2)
        values = rng.integers(0, 9, (64, 64))
        out = nearest_resize(values, 192)
        np.testing.assert_array_equal(out, np.repeat(np.repeat(values, 3, 0), 3, 1))

    def test_nan_source_pixel_stays_contained(self):
        values = np.ones((64, 64))
        values[10, 20] = np.nan
        out = bilinear_resize(values, 192)
        bad = np.argwhere(~np.isfinite(out))
        # renormalization fills every target that still has a finite tap;
        # only the one output centered exactly on the hole stays NaN
        np.testing.assert_array_equal(bad, [[31, 61]])
        finite = out[np.isfinite(out)]
        np.testing.assert_array_equal(finite, np.ones_like(finite))

    def test_firemask_routing_keeps_values_categorical(self):
        codes = np.zeros((64, 64))
        codes[5, 5] = 1.0
        out = resize_channel(codes, 192, BandKind.FIREMASK)
        assert set(np.unique(out)) == {0.0, 1.0}
        smooth = resize_channel(codes, 192, BandKind.EMISSIVE)
        assert ((smooth > 0) & (smooth < 1)).any()


def _band_raster(size, **channels):
    names = tuple(channels)
    planes = np.stack([np.full((size, size), v, np.float32) for v in channels.values()])
    return PatchRaster(names, planes)


def _fire_raster(size, fire_at=(), fill=5.0):
    codes = np.full((size, size), fill, np.float32)
    for r, c in fire_at:
        codes[r, c] = 8.0
    return PatchRaster(("FM",), codes[np.newaxis])


class TestNormalization:
    def _store(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        store.write("p", D0, DAY, cell, _band_raster(8, a=2.0, b=-1.0))
        second = _band_raster(8, a=4.0, b=-1.0)
        store.write("p", D0 + dt.timedelta(days=1), DAY, cell, second)
        return store, cell

    def test_mean_and_std(self, tmp_path):
        store, cell = self._store(tmp_path)
        manifest = ChannelManifest(
            "m",
            1,
            (
                ChannelRef("p", "a", DAY, BandKind.EMISSIVE),
                ChannelRef("p", "b", DAY, BandKind.EMISSIVE),
            ),
        )
        keys = [SampleKey(cell, D0), SampleKey(cell, D0 + dt.timedelta(days=1))]
        stats = compute_normalization(store, keys, manifest)
        assert stats.mean[0] == pytest.approx(3.0)
        assert stats.std[0] == pytest.approx(1.0)  # half 2s, half 4s
        assert stats.mean[1] == pytest.approx(-1.0)
        assert stats.std[1] == 1.0  # constant channel falls back to 1

    def test_missing_channel_defaults(self, tmp_path):
        store, cell = self._store(tmp_path)
        manifest = ChannelManifest(
            "m", 1, (ChannelRef("absent", "a", DAY, BandKind.EMISSIVE),)
        )
        stats = compute_normalization(store, [SampleKey(cell, D0)], manifest)
        assert stats.mean[0] == 0.0 and stats.std[0] == 1.0

    def test_nan_excluded(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        vals = np.full((4, 4), 7.0, np.float32)
        vals[0, 0] = np.nan
        store.write("p", D0, DAY, cell, PatchRaster(("a",), vals[np.newaxis]))
        manifest = ChannelManifest("m", 1, (ChannelRef("p", "a", DAY, BandKind.EMISSIVE),))
        stats = compute_normalization(store, [SampleKey(cell, D0)], manifest)
        assert stats.mean[0] == pytest.approx(7.0)

    def test_stats_validation(self):
        with pytest.raises(ValidationError):
            NormalizationStats(np.zeros(3), np.zeros(3))
        with pytest.raises(ValidationError):
            NormalizationStats(np.zeros(3), np.ones(2))
        with pytest.raises(ValidationError):
            NormalizationStats(np.array([np.nan]), np.ones(1))


class TestBuildInput:
    def _manifest(self):
        return ChannelManifest(
            "m",
            1,
            (
                ChannelRef("bands", "a", DAY, BandKind.EMISSIVE),
                ChannelRef("bands", "b", DAY, BandKind.EMISSIVE),
                ChannelRef("bands-night", "c", NIGHT, BandKind.EMISSIVE),
                ChannelRef("firep", "FM", DAY, BandKind.FIREMASK),
            ),
        )

    def _unit_stats(self, n):
        return NormalizationStats(np.zeros(n), np.ones(n))

    def test_stack_order_and_constant_planes(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(1, 2)
        store.write("bands", D0, DAY, cell, _band_raster(64, a=2.0, b=-3.0))
        store.write("bands-night", D0, NIGHT, cell, _band_raster(96, c=0.5))
        store.write("firep", D0, DAY, cell, _fire_raster(64, fire_at=[(0, 0)]))
        key = SampleKey(cell, D0)
        x, nodata = build_input(store, key, self._manifest(), self._unit_stats(4))
        assert x.shape == (192, 192, 4) and x.dtype == np.float32
        np.testing.assert_array_equal(x[..., 0], np.full((192, 192), 2.0, np.float32))
        np.testing.assert_array_equal(x[..., 1], np.full((192, 192), -3.0, np.float32))
        np.testing.assert_array_equal(x[..., 2], np.full((192, 192), 0.5, np.float32))
        assert not nodata.any()

    def test_fire_channel_binarized_before_resize(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        store.write("bands", D0, DAY, cell, _band_raster(64, a=1.0, b=1.0))
        store.write("firep", D0, DAY, cell, _fire_raster(64, fire_at=[(10, 10)]))
        x, _ = build_input(store, SampleKey(cell, D0), self._manifest(), self._unit_stats(4))
        fire_plane = x[..., 3]
        assert set(np.unique(fire_plane)) == {0.0, 1.0}
        assert fire_plane[31, 31] == 1.0  # nearest keeps the 3x3 block set

    def test_missing_overpass_is_zero_with_mask(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        store.write("bands", D0, DAY, cell, _band_raster(64, a=1.0, b=2.0))
        store.write("firep", D0, DAY, cell, _fire_raster(64))
        x, nodata = build_input(store, SampleKey(cell, D0), self._manifest(), self._unit_stats(4))
        np.testing.assert_array_equal(x[..., 2], np.zeros((192, 192), np.float32))
        assert nodata.all()  # the night plane is missing everywhere

    def test_normalization_applied(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        store.write("bands", D0, DAY, cell, _band_raster(64, a=5.0, b=0.0))
        store.write("bands-night", D0, NIGHT, cell, _band_raster(64, c=0.0))
        store.write("firep", D0, DAY, cell, _fire_raster(64))
        stats = NormalizationStats(np.array([3.0, 0, 0, 0]), np.array([2.0, 1, 1, 1]))
        x, _ = build_input(store, SampleKey(cell, D0), self._manifest(), stats)
        np.testing.assert_allclose(x[..., 0], np.ones((192, 192)), atol=1e-6)

    def test_all_missing_raises(self, tmp_path):
        store = PatchStore(tmp_path)
        with pytest.raises(NotFoundError):
            build_input(store, SampleKey(CellId(0, 0), D0), self._manifest(), self._unit_stats(4))

    def test_stats_length_must_match(self, tmp_path):
        store = PatchStore(tmp_path)
        with pytest.raises(ValidationError):
            build_input(store, SampleKey(CellId(0, 0), D0), self._manifest(), self._unit_stats(3))


class TestBuildTarget:
    def test_single_pixel_block_arithmetic(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        key = SampleKey(cell, D0)
        store.write("f", key.target_date, DAY, cell, _fire_raster(192, fire_at=[(100, 37)]))
        target = build_target(store, key, "f")
        assert target.shape == (64, 64)
        expected = np.zeros((64, 64), np.uint8)
        expected[100 // 3, 37 // 3] = 1
        np.testing.assert_array_equal(target, expected)

    def test_native_64_identity(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        key = SampleKey(cell, D0)
        store.write("f", key.target_date, DAY, cell, _fire_raster(64, fire_at=[(9, 61)]))
        target = build_target(store, key, "f")
        expected = np.zeros((64, 64), np.uint8)
        expected[9, 61] = 1
        np.testing.assert_array_equal(target, expected)

    def test_96_px_floor_mapping(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        key = SampleKey(cell, D0)
        store.write("f", key.target_date, NIGHT, cell, _fire_raster(96, fire_at=[(95, 1)]))
        target = build_target(store, key, "f")
        expected = np.zeros((64, 64), np.uint8)
        expected[95 * 64 // 96, 1 * 64 // 96] = 1
        np.testing.assert_array_equal(target, expected)

    def test_day_night_max_merge(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        key = SampleKey(cell, D0)
        store.write("f", key.target_date, DAY, cell, _fire_raster(64, fire_at=[(0, 0)]))
        store.write("f", key.target_date, NIGHT, cell, _fire_raster(64, fire_at=[(63, 63)]))
        target = build_target(store, key, "f")
        assert target[0, 0] == 1 and target[63, 63] == 1
        assert target.sum() == 2

    def test_adding_fire_is_monotone(self, tmp_path):
        rng = np.random.default_rng(3)
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        key = SampleKey(cell, D0)
        base = [(int(r), int(c)) for r, c in rng.integers(0, 192, (12, 2))]
        store.write("f", key.target_date, DAY, cell, _fire_raster(192, fire_at=base))
        before = build_target(store, key, "f")
        store.write("f", key.target_date, DAY, cell, _fire_raster(192, fire_at=base + [(50, 50)]))
        after = build_target(store, key, "f")
        assert (after >= before).all()

    def test_missing_both_overpasses(self, tmp_path):
        store = PatchStore(tmp_path)
        with pytest.raises(NotFoundError):
            build_target(store, SampleKey(CellId(0, 0), D0), "f")


def _selection_oracle(store, products, date_range=None):
    """Independent full scan: enumerate everything, then filter."""
    from firecast.bands import is_fire

    halves = (DAY, NIGHT)
    seen = set()
    for product in products:
        for date in store.dates(product):
            for half in halves:
                for cell in store.cells(product, date, half):
                    seen.add((date, cell))
    out = []
    for date, cell in seen:
        if date_range is not None and not (date_range[0] <= date <= date_range[1]):
            continue
        good = True
        for product in products:
            burning = False
            for half in halves:
                if store.exists(product, date, half, cell):
                    vals = store.read(product, date, half, cell).values[0]
                    if is_fire(np.rint(vals[np.isfinite(vals)]).astype(int)).any():
                        burning = True
            has_next = any(
                store.exists(product, date + dt.timedelta(days=1), half, cell)
                for half in halves
            )
            if not (burning and has_next):
                good = False
        if good:
            out.append(SampleKey(cell, date))
    out.sort(key=lambda k: (k.date, k.cell.y, k.cell.x))
    return out


class TestSelectSamples:
    def test_handcrafted_cases(self, tmp_path):
        store = PatchStore(tmp_path)
        d1 = D0 + dt.timedelta(days=1)
        both = CellId(0, 0)  # fire in both products, next day present
        only_a = CellId(1, 0)  # fire in one product only
        cold = CellId(2, 0)  # no fire anywhere
        no_next = CellId(3, 0)  # fire in both, nothing on day t+1
        for cell, a_fire, b_fire in (
            (both, [(0, 0)], [(1, 1)]),
            (only_a, [(0, 0)], []),
            (cold, [], []),
            (no_next, [(2, 2)], [(3, 3)]),
        ):
            store.write("a-fire", D0, DAY, cell, _fire_raster(8, a_fire))
            store.write("b-fire", D0, NIGHT, cell, _fire_raster(8, b_fire))
            if cell is not no_next:
                store.write("a-fire", d1, DAY, cell, _fire_raster(8))
                store.write("b-fire", d1, DAY, cell, _fire_raster(8))
        keys = select_samples(store, ("a-fire", "b-fire"))
        assert keys == [SampleKey(both, D0)]

    def test_matches_exhaustive_scan(self, tmp_path):
        rng = np.random.default_rng(7)
        store = PatchStore(tmp_path)
        dates = [D0 + dt.timedelta(days=i) for i in range(4)]
        cells = [CellId(x, y) for x in range(3) for y in range(2)]
        for product in ("a-fire", "b-fire"):
            for date in dates:
                for cell in cells:
                    for half in (DAY, NIGHT):
                        if rng.random() < 0.35:
                            continue
                        fire = [(1, 1)] if rng.random() < 0.5 else []
                        store.write(product, date, half, cell, _fire_raster(8, fire))
        got = select_samples(store, ("a-fire", "b-fire"))
        want = _selection_oracle(store, ("a-fire", "b-fire"))
        assert got == want
        assert got == sorted(got, key=lambda k: (k.date, k.cell.y, k.cell.x))

    def test_date_range_filter(self, tmp_path):
        store = PatchStore(tmp_path)
        cell = CellId(0, 0)
        for i in range(3):
            date = D0 + dt.timedelta(days=i)
            store.write("a-fire", date, DAY, cell, _fire_raster(8, [(0, 0)]))
            store.write("b-fire", date, DAY, cell, _fire_raster(8, [(0, 0)]))
        all_keys = select_samples(store, ("a-fire", "b-fire"))
        assert [k.date for k in all_keys] == [D0, D0 + dt.timedelta(days=1)]
        ranged = select_samples(store, ("a-fire", "b-fire"), (D0, D0))
        assert [k.date for k in ranged] == [D0]

    def test_empty_store(self, tmp_path):
        store = PatchStore(tmp_path)
        with pytest.raises(EmptyDataError):
            select_samples(store, ("a-fire", "b-fire"))


class TestMaterialization:
    def _populate(self, tmp_path, n_days=3):
        store = PatchStore(tmp_path / "store")
        cells = [CellId(0, 0), CellId(1, 0), CellId(0, 1)]
        rng = np.random.default_rng(11)
        for i in range(n_days):
            date = D0 + dt.timedelta(days=i)
            for cell in cells:
                vals = rng.normal(0, 1, (2, 64, 64)).astype(np.float32)
                store.write("bands", date, DAY, cell, PatchRaster(("a", "b"), vals))
                fire = [(int(r), int(c)) for r, c in rng.integers(0, 64, (3, 2))]
                store.write("firep", date, DAY, cell, _fire_raster(64, fire))
        manifest = ChannelManifest(
            "m",
            1,
            (
                ChannelRef("bands", "a", DAY, BandKind.EMISSIVE),
                ChannelRef("bands", "b", DAY, BandKind.EMISSIVE),
                ChannelRef("firep", "FM", DAY, BandKind.FIREMASK),
            ),
        )
        keys = select_samples(store, ("firep",))
        split = split_cells(cells, seed=2)
        # make sure both halves are populated for the test
        split[CellId(0, 0)] = Split.TRAIN
        split[CellId(1, 0)] = Split.VAL
        split[CellId(0, 1)] = Split.TRAIN
        return store, manifest, keys, split

    def test_round_trip(self, tmp_path):
        store, manifest, keys, split = self._populate(tmp_path)
        out = tmp_path / "ds"
        info = build_dataset(out, store, keys, manifest, split, "firep")
        back = read_dataset_info(out)
        assert back.manifest == info.manifest
        assert back.keys == info.keys
        assert back.target_product == "firep"
        np.testing.assert_allclose(back.stats.mean, info.stats.mean)
        np.testing.assert_allclose(back.stats.std, info.stats.std)
        for key in info.keys:
            sample = read_sample(out, key, manifest)
            x, nodata = build_input(store, key, manifest, info.stats)
            np.testing.assert_array_equal(sample.input, x)
            np.testing.assert_array_equal(sample.nodata, nodata)
            np.testing.assert_array_equal(sample.target, build_target(store, key, "firep"))

    def test_load_arrays_split(self, tmp_path):
        store, manifest, keys, split = self._populate(tmp_path)
        out = tmp_path / "ds"
        info = build_dataset(out, store, keys, manifest, split, "firep")
        x, y, train_idx, val_idx = load_arrays(out, info)
        assert x.shape == (len(keys), 192, 192, 3)
        assert y.shape == (len(keys), 64, 64)
        assert set(train_idx) | set(val_idx) == set(range(len(keys)))
        assert not set(train_idx) & set(val_idx)
        for i in val_idx:
            assert split[info.keys[i].cell] is Split.VAL

    def test_reruns_byte_identical(self, tmp_path):
        store, manifest, keys, split = self._populate(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        build_dataset(out_a, store, keys, manifest, split, "firep")
        build_dataset(out_b, store, keys, manifest, split, "firep")
        files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes()

    def test_empty_keys(self, tmp_path):
        store, manifest, _, split = self._populate(tmp_path)
        with pytest.raises(EmptyDataError):
            build_dataset(tmp_path / "ds", store, [], manifest, split, "firep")

    def test_unassigned_cell(self, tmp_path):
        store, manifest, keys, _ = self._populate(tmp_path)
        with pytest.raises(ValidationError):
            build_dataset(tmp_path / "ds", store, keys, manifest, {}, "firep")
