"""Model-ready sample assembly from a patch store.

A sample pairs an input stack for calendar day t with a binary fire
target for day t+1. Inputs are every manifest channel resized to a
shared 192x192 grid and z-score normalized with statistics taken from
the training split only; targets are the day/night max of the next
day's fire mask, block-reduced to 64x64.

Cells split into TRAIN and VAL by a pure hash of (seed, x, y), so the
assignment never depends on enumeration order.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bands import (
    DROUGHT_PRODUCT,
    DROUGHT_VAR,
    FIRE_MASK_BAND,
    WEATHER_PRODUCT,
    WEATHER_VARS,
    BandKind,
    DayNight,
    band_manifest,
    band_product,
    fire_product,
    is_fire,
)
from .errors import EmptyDataError, NotFoundError, ValidationError
from .grid import CellId, ResolutionClass
from .store import PatchRaster, PatchStore

INPUT_PX = 192
TARGET_PX = 64

NODATA_CHANNEL = "nodata"
TARGET_CHANNEL = "fire"


@dataclass(frozen=True, slots=True)
class SampleKey:
    """One cell-day: inputs from `date`, target from the following day."""

    cell: CellId
    date: dt.date

    @property
    def target_date(self) -> dt.date:
        return self.date + dt.timedelta(days=1)


@dataclass(frozen=True, slots=True)
class ChannelRef:
    """One input channel: a named plane of one product at one overpass."""

    product: str
    band: str
    daynight: DayNight
    kind: BandKind

    @property
    def ident(self) -> str:
        return f"{self.product}/{self.band}/{self.daynight.value}"


@dataclass(frozen=True)
class ChannelManifest:
    """Ordered, versioned input channel list for one model configuration."""

    name: str
    version: int
    channels: tuple[ChannelRef, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ValidationError("manifest has no channels")
        idents = [c.ident for c in self.channels]
        if len(set(idents)) != len(idents):
            raise ValidationError("duplicate channel in manifest")

    def __len__(self) -> int:
        return len(self.channels)

    @property
    def idents(self) -> tuple[str, ...]:
        return tuple(c.ident for c in self.channels)


def _sensor_manifest(sensor: str, n_weather: int) -> ChannelManifest:
    refs = []
    for half in (DayNight.DAY, DayNight.NIGHT):
        for band in band_manifest(sensor, half):
            refs.append(
                ChannelRef(band_product(sensor, band.resolution), band.name, half, band.kind)
            )
    mask = FIRE_MASK_BAND[sensor]
    for half in (DayNight.DAY, DayNight.NIGHT):
        refs.append(ChannelRef(fire_product(sensor), mask.name, half, BandKind.FIREMASK))
    for var in WEATHER_VARS[:n_weather]:
        refs.append(ChannelRef(WEATHER_PRODUCT, var, DayNight.DAY, BandKind.WEATHER))
    refs.append(ChannelRef(DROUGHT_PRODUCT, DROUGHT_VAR, DayNight.DAY, BandKind.DROUGHT))
    return ChannelManifest(sensor.lower(), 1, tuple(refs))


def modis_manifest() -> ChannelManifest:
    """Default 65-channel input stack: 36 day + 16 night bands, both
    fire-mask overpasses, ten weather variables, one drought index."""
    return _sensor_manifest("MODIS", n_weather=10)


def viirs_manifest() -> ChannelManifest:
    """Default 43-channel input stack: 21 day + 11 night bands, both
    fire-mask overpasses, eight weather variables, one drought index."""
    return _sensor_manifest("VIIRS", n_weather=8)


def proxy_manifest(sensor: str, resolution: ResolutionClass) -> ChannelManifest:
    """Input stack for a synthetic sensor: its thermal proxy and fire
    mask for both overpasses, plus the full weather and drought set."""
    from .synth import FIRE_BAND_NAME, PROXY_BAND_NAME

    band = band_product(sensor, resolution)
    refs = []
    for half in (DayNight.DAY, DayNight.NIGHT):
        refs.append(ChannelRef(band, PROXY_BAND_NAME, half, BandKind.EMISSIVE))
    for half in (DayNight.DAY, DayNight.NIGHT):
        refs.append(
            ChannelRef(fire_product(sensor), FIRE_BAND_NAME, half, BandKind.FIREMASK)
        )
    for var in WEATHER_VARS:
        refs.append(ChannelRef(WEATHER_PRODUCT, var, DayNight.DAY, BandKind.WEATHER))
    refs.append(ChannelRef(DROUGHT_PRODUCT, DROUGHT_VAR, DayNight.DAY, BandKind.DROUGHT))
    return ChannelManifest(f"{sensor.lower()}-proxy", 1, tuple(refs))


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"


def split_cells(cells, seed: int, val_fraction: float = 0.25) -> dict[CellId, Split]:
    """Assign each cell to TRAIN or VAL by hashing (seed, x, y).

    Pure per cell: independent of list order, and every sample of a
    cell shares the cell's assignment.
    """
    from .seeds import unit_uniform

    if not 0.0 < val_fraction < 1.0:
        raise ValidationError(f"val_fraction must be in (0, 1), got {val_fraction}")
    out = {}
    for cell in cells:
        u = unit_uniform(seed, cell.x, cell.y)
        out[cell] = Split.VAL if u < val_fraction else Split.TRAIN
    return out


# -- resizing -----------------------------------------------------------

def _bilinear_weights(out_px: int, src_px: int) -> np.ndarray:
    """(out_px, src_px) row-stochastic matrix of center-aligned 2-tap
    interpolation weights; separable application covers both axes."""
    w = np.zeros((out_px, src_px))
    scale = src_px / out_px
    for t in range(out_px):
        s = (t + 0.5) * scale - 0.5
        s0 = int(np.floor(s))
        f = s - s0
        lo = min(max(s0, 0), src_px - 1)
        hi = min(max(s0 + 1, 0), src_px - 1)
        w[t, lo] += 1.0 - f
        w[t, hi] += f
    return w


def _area_weights(out_px: int, src_px: int) -> np.ndarray:
    """(out_px, src_px) row-stochastic matrix of fractional box-filter
    weights; each output pixel averages the source span it covers."""
    w = np.zeros((out_px, src_px))
    scale = src_px / out_px
    for t in range(out_px):
        lo = t * scale
        hi = (t + 1) * scale
        for s in range(int(np.floor(lo)), min(int(np.ceil(hi)), src_px)):
            overlap = min(hi, s + 1) - max(lo, s)
            if overlap > 0:
                w[t, s] = overlap / scale
    return w


def _apply_separable(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Resize with NaN-aware renormalization: missing taps drop out of
    the weighted average; a pixel is NaN only if all its taps are."""
    finite = np.isfinite(values)
    filled = np.where(finite, values, 0.0)
    num = weights @ filled @ weights.T
    den = weights @ finite.astype(float) @ weights.T
    out = np.full_like(num, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def bilinear_resize(values: np.ndarray, out_px: int) -> np.ndarray:
    """Center-aligned bilinear resize of a square plane; NaN-aware."""
    values = np.asarray(values, dtype=float)
    return _apply_separable(_bilinear_weights(out_px, values.shape[0]), values)


def area_resize(values: np.ndarray, out_px: int) -> np.ndarray:
    """Box-filter downsample of a square plane; NaN-aware, mean-preserving."""
    values = np.asarray(values, dtype=float)
    return _apply_separable(_area_weights(out_px, values.shape[0]), values)


def nearest_resize(values: np.ndarray, out_px: int) -> np.ndarray:
    """Nearest-center resize; keeps categorical values intact."""
    values = np.asarray(values)
    src_px = values.shape[0]
    idx = np.minimum(((np.arange(out_px) + 0.5) * src_px / out_px).astype(int), src_px - 1)
    return values[np.ix_(idx, idx)]


def resize_channel(values: np.ndarray, out_px: int, kind: BandKind) -> np.ndarray:
    """Route one channel plane through the interpolation its kind needs."""
    if kind is BandKind.FIREMASK:
        return np.asarray(nearest_resize(values, out_px), dtype=float)
    if values.shape[0] == out_px:
        return np.asarray(values, dtype=float).copy()
    if values.shape[0] > out_px:
        return area_resize(values, out_px)
    return bilinear_resize(values, out_px)


# -- normalization ------------------------------------------------------

@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel mean and standard deviation from the training split."""

    mean: np.ndarray  # (C,) float64
    std: np.ndarray  # (C,) float64

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValidationError("mean/std must be matching 1-D arrays")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()):
            raise ValidationError("non-finite normalization statistics")
        if (std <= 0).any():
            raise ValidationError("standard deviations must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


_STD_FLOOR = 1e-6


def _channel_plane(store: PatchStore, key: SampleKey, ref: ChannelRef):
    """Raw native-resolution plane for one channel, or None if the
    overpass raster is absent. Fire masks come back binarized."""
    try:
        raster = store.read(ref.product, key.date, ref.daynight, key.cell)
    except NotFoundError:
        return None
    vals = raster.channel(ref.band)
    if ref.kind is BandKind.FIREMASK:
        finite = np.isfinite(vals)
        binary = np.full(vals.shape, np.nan)
        binary[finite] = is_fire(np.rint(vals[finite]).astype(int)).astype(float)
        return binary
    return np.asarray(vals, dtype=float)


def compute_normalization(
    store: PatchStore, keys, manifest: ChannelManifest
) -> NormalizationStats:
    """Accumulate per-channel mean/std over the given (training) keys.

    NaNs are excluded; a channel with no finite values or a degenerate
    spread falls back to mean 0 / std 1 so normalization stays affine.
    """
    n = len(manifest)
    count = np.zeros(n)
    total = np.zeros(n)
    total_sq = np.zeros(n)
    for key in keys:
        for i, ref in enumerate(manifest.channels):
            plane = _channel_plane(store, key, ref)
            if plane is None:
                continue
            finite = plane[np.isfinite(plane)]
            count[i] += finite.size
            total[i] += finite.sum()
            total_sq[i] += np.square(finite).sum()
    mean = np.zeros(n)
    std = np.ones(n)
    seen = count > 0
    mean[seen] = total[seen] / count[seen]
    var = np.maximum(total_sq[seen] / count[seen] - mean[seen] ** 2, 0.0)
    sd = np.sqrt(var)
    std[seen] = np.where(sd < _STD_FLOOR, 1.0, sd)
    return NormalizationStats(mean, std)


# -- sample construction ------------------------------------------------

def build_input(
    store: PatchStore,
    key: SampleKey,
    manifest: ChannelManifest,
    stats: NormalizationStats,
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the (192, 192, C) normalized input stack for one key.

    Channels resize from their native patch size (bilinear for
    continuous bands, nearest for fire masks, area averaging above
    192 px). Missing overpasses become all-NaN planes. After z-scoring,
    NaNs flip to zero and are recorded in the returned (192, 192) mask.
    """
    if len(stats.mean) != len(manifest):
        raise ValidationError(
            f"stats cover {len(stats.mean)} channels, manifest has {len(manifest)}"
        )
    planes = []
    found_any = False
    for ref in manifest.channels:
        raw = _channel_plane(store, key, ref)
        if raw is None:
            planes.append(np.full((INPUT_PX, INPUT_PX), np.nan))
        else:
            found_any = True
            planes.append(resize_channel(raw, INPUT_PX, ref.kind))
    if not found_any:
        raise NotFoundError(
            f"no data for cell ({key.cell.x}, {key.cell.y}) on {key.date}"
        )
    stack = np.stack(planes, axis=-1)
    nodata = ~np.isfinite(stack).all(axis=-1)
    normalized = (stack - stats.mean) / stats.std
    normalized[~np.isfinite(stack)] = 0.0
    return normalized.astype(np.float32), nodata


def daily_fire_mask(
    store: PatchStore, product: str, date: dt.date, cell: CellId
) -> np.ndarray:
    """Binary 64x64 fire mask for one cell-day: day OR night overpass.

    Masks binarize at native resolution and reduce by block OR with
    floor index mapping, so any source fire pixel sets the covering
    output pixel regardless of the source patch size.
    """
    merged = None
    for half in (DayNight.DAY, DayNight.NIGHT):
        try:
            raster = store.read(product, date, half, cell)
        except NotFoundError:
            continue
        # fire products carry the mask as their sole channel
        vals = raster.values[0]
        finite = np.isfinite(vals)
        binary = np.zeros(vals.shape, dtype=np.uint8)
        binary[finite] = is_fire(np.rint(vals[finite]).astype(int)).astype(np.uint8)
        merged = binary if merged is None else np.maximum(merged, binary)
    if merged is None:
        raise NotFoundError(
            f"no {product} overpass for cell ({cell.x}, {cell.y}) on {date}"
        )
    src_px = merged.shape[0]
    if src_px < TARGET_PX:
        raise ValidationError(f"fire patch {src_px} px is below {TARGET_PX} px")
    idx = (np.arange(src_px) * TARGET_PX) // src_px
    rows = np.zeros((TARGET_PX, src_px), dtype=np.uint8)
    np.maximum.at(rows, idx, merged)
    out = np.zeros((TARGET_PX, TARGET_PX), dtype=np.uint8)
    np.maximum.at(out, idx, rows.T)
    return out.T


def build_target(store: PatchStore, key: SampleKey, target_product: str) -> np.ndarray:
    """Next-day binary target: the 64x64 daily fire mask of day t+1."""
    return daily_fire_mask(store, target_product, key.target_date, key.cell)


def _has_fire(store: PatchStore, product: str, date: dt.date, cell: CellId) -> bool:
    for half in (DayNight.DAY, DayNight.NIGHT):
        try:
            raster = store.read(product, date, half, cell)
        except NotFoundError:
            continue
        vals = raster.values[0]
        finite = np.isfinite(vals)
        if is_fire(np.rint(vals[finite]).astype(int)).any():
            return True
    return False


def _has_overpass(store: PatchStore, product: str, date: dt.date, cell: CellId) -> bool:
    return any(
        store.exists(product, date, half, cell)
        for half in (DayNight.DAY, DayNight.NIGHT)
    )


def select_samples(store: PatchStore, fire_products, date_range=None) -> list[SampleKey]:
    """Pick every (cell, day) where all fire products report fire.

    A key qualifies when each listed product sees at least one fire
    pixel on day t (either overpass) and has at least one day-t+1
    overpass for the cell, so differently-trained models share one
    sample set. Sorted by (date, y, x).
    """
    fire_products = tuple(fire_products)
    if not fire_products:
        raise ValidationError("need at least one fire product")
    date_sets = []
    for product in fire_products:
        dates = store.dates(product)
        if not dates:
            raise EmptyDataError(f"store has no data for product {product!r}")
        date_sets.append(set(dates))
    candidates = sorted(set.intersection(*date_sets))
    if date_range is not None:
        start, end = date_range
        candidates = [d for d in candidates if start <= d <= end]
    keys = []
    for date in candidates:
        cell_sets = []
        for product in fire_products:
            cells = set(store.cells(product, date, DayNight.DAY))
            cells |= set(store.cells(product, date, DayNight.NIGHT))
            cell_sets.append(cells)
        for cell in set.intersection(*cell_sets):
            ok = all(
                _has_fire(store, p, date, cell)
                and _has_overpass(store, p, date + dt.timedelta(days=1), cell)
                for p in fire_products
            )
            if ok:
                keys.append(SampleKey(cell, date))
    keys.sort(key=lambda k: (k.date, k.cell.y, k.cell.x))
    return keys


# -- materialization ----------------------------------------------------

@dataclass(frozen=True)
class Sample:
    key: SampleKey
    input: np.ndarray  # (192, 192, C) float32
    target: np.ndarray  # (64, 64) uint8
    nodata: np.ndarray  # (192, 192) bool


@dataclass(frozen=True)
class DatasetInfo:
    """Everything needed to reload a materialized dataset exactly."""

    manifest: ChannelManifest
    stats: NormalizationStats
    target_product: str
    keys: tuple[SampleKey, ...]
    split: dict[CellId, Split]


def sample_dir(root, key: SampleKey) -> Path:
    return Path(root) / "samples" / key.date.isoformat() / f"{key.cell.x}_{key.cell.y}"


def _write_sample(root, key: SampleKey, manifest: ChannelManifest, sample: Sample) -> None:
    from .store import write_raster

    base = sample_dir(root, key)
    stack = np.moveaxis(sample.input, -1, 0)
    planes = np.concatenate(
        [stack, sample.nodata[np.newaxis].astype(np.float32)], axis=0
    )
    names = (*manifest.idents, NODATA_CHANNEL)
    write_raster(base / "input.rst", PatchRaster(names, planes))
    write_raster(
        base / "target.rst",
        PatchRaster((TARGET_CHANNEL,), sample.target[np.newaxis].astype(np.float32)),
    )


def read_sample(root, key: SampleKey, manifest: ChannelManifest) -> Sample:
    from .store import read_raster

    base = sample_dir(root, key)
    input_raster = read_raster(base / "input.rst")
    expected = (*manifest.idents, NODATA_CHANNEL)
    if input_raster.channels != expected:
        raise ValidationError(f"{base}: sample channels do not match the manifest")
    stack = np.moveaxis(input_raster.values[: len(manifest)], 0, -1)
    nodata = input_raster.channel(NODATA_CHANNEL) > 0.5
    target_raster = read_raster(base / "target.rst")
    target = target_raster.channel(TARGET_CHANNEL).astype(np.uint8)
    return Sample(key, stack, target, nodata)


def _manifest_json(manifest: ChannelManifest) -> dict:
    return {
        "name": manifest.name,
        "version": manifest.version,
        "channels": [
            [c.product, c.band, c.daynight.value, c.kind.value]
            for c in manifest.channels
        ],
    }


def _manifest_from_json(obj: dict) -> ChannelManifest:
    channels = tuple(
        ChannelRef(product, band, DayNight(dn), BandKind(kind))
        for product, band, dn, kind in obj["channels"]
    )
    return ChannelManifest(obj["name"], int(obj["version"]), channels)


def build_dataset(
    out_dir,
    store: PatchStore,
    keys,
    manifest: ChannelManifest,
    split: dict[CellId, Split],
    target_product: str,
    stats: NormalizationStats | None = None,
) -> DatasetInfo:
    """Materialize samples under out_dir with a dataset.json manifest.

    Normalization statistics come from the TRAIN keys unless supplied;
    identical inputs produce byte-identical output trees.
    """
    keys = tuple(sorted(keys, key=lambda k: (k.date, k.cell.y, k.cell.x)))
    if not keys:
        raise EmptyDataError("empty sample set")
    missing = [k for k in keys if k.cell not in split]
    if missing:
        raise ValidationError(f"no split assignment for cell {missing[0].cell}")
    if stats is None:
        train_keys = [k for k in keys if split[k.cell] is Split.TRAIN]
        if not train_keys:
            raise EmptyDataError("no training samples to normalize from")
        stats = compute_normalization(store, train_keys, manifest)
    out_dir = Path(out_dir)
    for key in keys:
        x, nodata = build_input(store, key, manifest, stats)
        y = build_target(store, key, target_product)
        _write_sample(out_dir, key, manifest, Sample(key, x, y, nodata))
    info = DatasetInfo(manifest, stats, target_product, keys, dict(split))
    doc = {
        "format": 1,
        "input_px": INPUT_PX,
        "target_px": TARGET_PX,
        "manifest": _manifest_json(manifest),
        "normalization": {
            "mean": [float(v) for v in stats.mean],
            "std": [float(v) for v in stats.std],
        },
        "target_product": target_product,
        "samples": [
            {
                "date": k.date.isoformat(),
                "x": k.cell.x,
                "y": k.cell.y,
                "split": split[k.cell].value,
            }
            for k in keys
        ],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "dataset.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return info


def read_dataset_info(root) -> DatasetInfo:
    path = Path(root) / "dataset.json"
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise NotFoundError(f"{path}: no dataset manifest") from None
    manifest = _manifest_from_json(doc["manifest"])
    stats = NormalizationStats(
        np.asarray(doc["normalization"]["mean"]),
        np.asarray(doc["normalization"]["std"]),
    )
    keys = []
    split = {}
    for row in doc["samples"]:
        cell = CellId(int(row["x"]), int(row["y"]))
        keys.append(SampleKey(cell, dt.date.fromisoformat(row["date"])))
        split[cell] = Split(row["split"])
    return DatasetInfo(manifest, stats, doc["target_product"], tuple(keys), split)


def load_arrays(root, info: DatasetInfo):
    """Load all samples into arrays plus train/val index vectors."""
    n = len(info.keys)
    c = len(info.manifest)
    inputs = np.zeros((n, INPUT_PX, INPUT_PX, c), dtype=np.float32)
    targets = np.zeros((n, TARGET_PX, TARGET_PX), dtype=np.float32)
    train_idx, val_idx = [], []
    for i, key in enumerate(info.keys):
        sample = read_sample(root, key, info.manifest)
        inputs[i] = sample.input
        targets[i] = sample.target
        (train_idx if info.split[key.cell] is Split.TRAIN else val_idx).append(i)
    return inputs, targets, np.asarray(train_idx, int), np.asarray(val_idx, int)
