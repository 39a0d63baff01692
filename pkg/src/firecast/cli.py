"""Command-line pipeline: synthesize, resample, assemble, train, evaluate.

Every subcommand reads one merged configuration (defaults, then the
--config file, then flags) and writes that configuration next to its
artifacts, so identical invocations produce byte-identical output.

Exit codes: 0 success, 1 usage error, 2 missing or invalid data, 3
unexpected failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bands import (
    WEATHER_PRODUCT,
    WEATHER_VARS,
    DROUGHT_PRODUCT,
    DROUGHT_VAR,
    BandKind,
    DayNight,
    band_product,
    fire_product,
    is_fire,
)
from .config import PipelineConfig, load_config, write_provenance
from .dataset import (
    TARGET_PX,
    build_dataset,
    build_target,
    daily_fire_mask,
    load_arrays,
    modis_manifest,
    proxy_manifest,
    read_dataset_info,
    select_samples,
    split_cells,
    viirs_manifest,
)
from .errors import EmptyDataError, FirecastError, NotFoundError, ValidationError
from .grid import CellId, cell_local_date_offset_hours
from .metrics import (
    aggregate_runs,
    evaluate_pairs,
    format_percent,
    format_report_table,
)
from .progression import (
    TrackerParams,
    detections_from_mask,
    persistence_stats,
    progression_cells,
    progression_raster,
    track_events,
)
from .render import render_mask, render_progression, render_triptych, save_png
from .resample import GeodeticRaster, patchify_geodetic, swath_cells
from .resample import idw_resample, nn_resample
from .seeds import mix64
from .segnet import predict_prob
from .store import PatchRaster, PatchStore, local_date, read_raster, write_raster
from .swath import read_swath, write_swath
from .synth import (
    FIRE_BAND_NAME,
    FireSimParams,
    observe,
    simulate_fire,
    synthetic_weather,
)
from .train import read_checkpoint, train, write_checkpoint

BASE_DATE = dt.date(2020, 1, 1)
_HALVES = (DayNight.DAY, DayNight.NIGHT)


def _load_config(args, **sections) -> PipelineConfig:
    """Defaults, then the --config file, then non-None flag values."""
    overrides: dict = {}
    seed = getattr(args, "seed", None)
    if seed is not None:
        overrides["seed"] = seed
    for name, values in sections.items():
        clean = {k: v for k, v in values.items() if v is not None}
        if clean:
            overrides[name] = clean
    return load_config(getattr(args, "config", None), overrides or None)


def _store(args, cfg: PipelineConfig) -> PatchStore:
    return PatchStore(args.store if args.store else cfg.path("store"))


def _date_range(cfg: PipelineConfig):
    rng = cfg.data["dataset"]["date_range"]
    if not rng:
        return None
    if len(rng) != 2:
        raise ValidationError("date_range must be [start, end]")
    return (dt.date.fromisoformat(rng[0]), dt.date.fromisoformat(rng[1]))


def _resolve_manifest(cfg: PipelineConfig):
    spec = cfg.data["dataset"]["manifest"]
    if spec == "modis":
        return modis_manifest()
    if spec == "viirs":
        return viirs_manifest()
    if isinstance(spec, str) and spec.startswith("proxy:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError(f"bad manifest spec {spec!r}")
        return proxy_manifest(parts[1], cfg.resolution(parts[2]))
    raise ValidationError(f"unknown manifest spec {spec!r}")


def _campaign_cells(grid, n: int, seed: int) -> list[CellId]:
    """n distinct interior cells, a pure function of (grid, n, seed)."""
    margin = 2
    pool = [
        CellId(x, y)
        for y in range(margin, grid.n_rows - margin)
        for x in range(margin, grid.n_cols - margin)
    ]
    if not 1 <= n <= len(pool):
        raise ValidationError(f"cannot place {n} campaign cells on this grid")
    rng = np.random.default_rng(mix64(seed, 101))
    picked = rng.choice(len(pool), size=n, replace=False)
    return sorted(pool[i] for i in picked)


def _crop_patch(grid, raster: GeodeticRaster, cell: CellId) -> np.ndarray:
    """One cell's nearest-sampled patch; crops the raster first so the
    per-cell cost does not scale with the full grid extent."""
    lon0, lat0, lon1, lat1 = grid.cell_bounds(cell)
    h, w = raster.values.shape
    j0 = max(0, int((lon0 - raster.lon_min) / raster.dlon) - 1)
    j1 = min(w, int(np.ceil((lon1 - raster.lon_min) / raster.dlon)) + 1)
    i0 = max(0, int((raster.lat_max - lat1) / raster.dlat) - 1)
    i1 = min(h, int(np.ceil((raster.lat_max - lat0) / raster.dlat)) + 1)
    sub = GeodeticRaster(
        raster.values[i0:i1, j0:j1],
        raster.lon_min + j0 * raster.dlon,
        raster.lat_max - i0 * raster.dlat,
        raster.dlon,
        raster.dlat,
    )
    return patchify_geodetic(sub, grid, TARGET_PX)[cell]


def _cmd_synth(args) -> int:
    cfg = _load_config(args, synth={"days": args.days, "cells": args.cells})
    grid = cfg.grid()
    section = cfg.data["synth"]
    days = int(section["days"])
    if days < 2:
        raise ValidationError("a campaign needs at least two days")
    swath_dir = Path(args.out) if args.out else cfg.path("swaths")
    swath_dir.mkdir(parents=True, exist_ok=True)
    store = _store(args, cfg)
    seed = cfg.seed
    cells = _campaign_cells(grid, int(section["cells"]), seed)
    models = cfg.sensor_models()

    n_swaths = 0
    for cell in cells:
        rng = np.random.default_rng(mix64(seed, 1, cell.x, cell.y))
        col, row = (int(v) for v in rng.integers(16, 48, size=2))
        sim = FireSimParams(
            grid_px=TARGET_PX,
            ignitions=(((col, row), 0),),
            p_spread=float(section["p_spread"]),
            wind=tuple(float(v) for v in section["wind"]),
            burn_days=section["burn_days"],
            seed=mix64(seed, 2, cell.x, cell.y),
        )
        states = simulate_fire(sim, days)
        for day in range(days):
            date = BASE_DATE + dt.timedelta(days=day)
            for half_idx, half in enumerate(_HALVES):
                for model_idx, model in enumerate(models):
                    sw = observe(
                        states,
                        model,
                        grid,
                        cell,
                        day,
                        half,
                        seed=mix64(seed, 3, cell.x, cell.y, day, half_idx, model_idx),
                        base_date=BASE_DATE,
                    )
                    name = (
                        f"{model.name}_{date.isoformat()}_{half.value}"
                        f"_{cell.x}_{cell.y}.swt"
                    )
                    write_swath(swath_dir / name, sw)
                    n_swaths += 1

    for day in range(days):
        date = BASE_DATE + dt.timedelta(days=day)
        rasters = {
            var: synthetic_weather(grid, date, var)
            for var in (*WEATHER_VARS, DROUGHT_VAR)
        }
        for cell in cells:
            planes = np.stack([_crop_patch(grid, rasters[v], cell) for v in WEATHER_VARS])
            store.write(WEATHER_PRODUCT, date, DayNight.DAY, cell, PatchRaster(WEATHER_VARS, planes))
            kbdi = _crop_patch(grid, rasters[DROUGHT_VAR], cell)
            store.write(
                DROUGHT_PRODUCT, date, DayNight.DAY, cell,
                PatchRaster((DROUGHT_VAR,), kbdi[np.newaxis]),
            )

    write_provenance(cfg, swath_dir)
    write_provenance(cfg, store.root)
    print(f"wrote {n_swaths} swaths over {len(cells)} cells and {days} days")
    return 0


def _resample_swath(path, grid, params):
    """All (product, date, half, cell, raster) records for one swath."""
    sw = read_swath(path)
    out = []
    for cell in swath_cells(grid, sw):
        date = local_date(sw.acquired_at, cell_local_date_offset_hours(grid, cell))
        order = []
        groups: dict[str, list] = {}
        for spec, _ in sw.bands:
            if spec.kind is BandKind.FIREMASK:
                product = fire_product(sw.sensor)
                plane = nn_resample(sw, spec.name, grid, cell, params.radius_px)
            else:
                product = band_product(sw.sensor, spec.resolution)
                plane = idw_resample(sw, spec.name, grid, cell, params)
            if product not in groups:
                groups[product] = []
                order.append(product)
            groups[product].append((spec.name, plane))
        for product in order:
            names = tuple(name for name, _ in groups[product])
            planes = np.stack([plane for _, plane in groups[product]])
            out.append((product, date, sw.daynight, cell, PatchRaster(names, planes)))
    return out


def _cmd_resample(args) -> int:
    cfg = _load_config(args)
    grid = cfg.grid()
    params = cfg.resample_params()
    swath_dir = Path(args.swaths) if args.swaths else cfg.path("swaths")
    store = _store(args, cfg)
    files = sorted(swath_dir.glob("*.swt"))
    if not files:
        raise EmptyDataError(f"no swath files under {swath_dir}")
    # workers only compute; the single-threaded writes keep output
    # independent of the job count
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            batches = pool.map(lambda p: _resample_swath(p, grid, params), files)
            written = _write_batches(store, batches)
    else:
        written = _write_batches(
            store, (_resample_swath(p, grid, params) for p in files)
        )
    write_provenance(cfg, store.root)
    print(f"wrote {written} rasters from {len(files)} swaths")
    return 0


def _write_batches(store: PatchStore, batches) -> int:
    written = 0
    for batch in batches:
        for product, date, half, cell, raster in batch:
            store.write(product, date, half, cell, raster)
            written += 1
    return written


def _cmd_make_dataset(args) -> int:
    cfg = _load_config(args)
    store = _store(args, cfg)
    out = Path(args.out) if args.out else cfg.path("out") / "dataset"
    section = cfg.data["dataset"]
    keys = select_samples(store, tuple(section["fire_products"]), _date_range(cfg))
    cells = sorted({k.cell for k in keys})
    split = split_cells(cells, cfg.seed, float(section["val_fraction"]))
    manifest = _resolve_manifest(cfg)
    info = build_dataset(out, store, keys, manifest, split, section["target_product"])
    write_provenance(cfg, out)
    n_val = sum(1 for k in info.keys if info.split[k.cell].value == "val")
    print(f"wrote {len(info.keys)} samples ({n_val} validation) to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    data_dir = Path(args.data) if args.data else cfg.path("out") / "dataset"
    out = Path(args.out) if args.out else cfg.path("out") / "run"
    info = read_dataset_info(data_dir)
    inputs, targets, train_idx, val_idx = load_arrays(data_dir, info)
    net = cfg.net_config(len(info.manifest))
    ckpt, history = train(
        inputs, targets, train_idx, val_idx, net, cfg.train_config(), cfg.loss_spec()
    )
    out.mkdir(parents=True, exist_ok=True)
    write_checkpoint(out / "model.ckpt", ckpt)
    (out / "history.txt").write_text("\n".join(r.line() for r in history) + "\n")
    write_provenance(cfg, out)
    print(f"best epoch {ckpt.epoch} val_iou {ckpt.val_iou:.6f}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    data_dir = Path(args.data) if args.data else cfg.path("out") / "dataset"
    out = Path(args.out) if args.out else cfg.path("out") / "eval"
    info = read_dataset_info(data_dir)
    inputs, targets, _, val_idx = load_arrays(data_dir, info)
    if val_idx.size == 0:
        raise EmptyDataError("no validation samples")
    keys = [info.keys[i] for i in val_idx]
    eval_target = args.eval_target or info.target_product

    if args.eval_target and args.eval_target != info.target_product:
        store = _store(args, cfg)
        target_list = [build_target(store, key, eval_target) for key in keys]
    else:
        target_list = [targets[i] for i in val_idx]

    if args.baseline == "persistence":
        store = _store(args, cfg)
        preds = [
            daily_fire_mask(store, eval_target, key.date, key.cell).astype(np.float64)
            for key in keys
        ]
        input_name, train_target = "persistence", "-"
    else:
        ckpt_path = Path(args.run) if args.run else cfg.path("out") / "run"
        if ckpt_path.is_dir():
            ckpt_path = ckpt_path / "model.ckpt"
        ckpt = read_checkpoint(ckpt_path)
        batch = cfg.train_config().batch_size
        preds = []
        for start in range(0, val_idx.size, batch):
            chunk = val_idx[start : start + batch]
            preds.extend(predict_prob(ckpt.params, ckpt.net, inputs[chunk]))
        input_name, train_target = info.manifest.name, info.target_product

    f1, iou, counts = evaluate_pairs(zip(preds, target_list))
    result = {
        "input": input_name,
        "train_target": train_target,
        "eval_target": eval_target,
        "f1": f1,
        "iou": iou,
        "counts": {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn},
        "n_samples": len(keys),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    write_provenance(cfg, out)
    row = (
        input_name,
        train_target,
        eval_target,
        format_percent(f1, None),
        format_percent(iou, None),
    )
    print(format_report_table([row]), end="")
    return 0


def _cmd_baseline(args) -> int:
    cfg = _load_config(args)
    store = _store(args, cfg)
    out = Path(args.out) if args.out else cfg.path("out") / "baseline"
    if args.products:
        products = [p.strip() for p in args.products.split(",") if p.strip()]
    else:
        products = list(cfg.data["dataset"]["fire_products"])
    if not products:
        raise ValidationError("no fire products to evaluate")
    date_range = _date_range(cfg)
    results = {}
    rows = []
    for product in products:
        f1, iou, counts = persistence_stats(store, product, date_range)
        results[product] = {
            "f1": f1,
            "iou": iou,
            "counts": {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn},
        }
        rows.append(
            ("persistence", "-", product, format_percent(f1, None), format_percent(iou, None))
        )
    out.mkdir(parents=True, exist_ok=True)
    (out / "baseline.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    write_provenance(cfg, out)
    print(format_report_table(rows), end="")
    return 0


def _cmd_progression(args) -> int:
    cfg = _load_config(args)
    store = _store(args, cfg)
    product = args.product or cfg.data["dataset"]["target_product"]
    out = Path(args.out) if args.out else cfg.path("out") / "progression"
    params = TrackerParams(int(cfg.data["tracker"]["max_gap_days"]))
    detections = []
    for date in store.dates(product):
        cells = sorted(
            set(store.cells(product, date, DayNight.DAY))
            | set(store.cells(product, date, DayNight.NIGHT))
        )
        for cell in cells:
            mask = daily_fire_mask(store, product, date, cell)
            detections.extend(detections_from_mask(cell, date, mask))
    events = track_events(detections, params)
    per_cell = progression_cells(events)

    out.mkdir(parents=True, exist_ok=True)
    for cell in sorted(per_cell):
        raster = PatchRaster(("progression",), per_cell[cell][np.newaxis])
        write_raster(out / f"{cell.x}_{cell.y}.rst", raster)
    mosaic = progression_raster(events)
    save_png(render_progression(mosaic), out / "progression.png")
    summary = [
        {
            "id": e.id,
            "ignition_date": e.ignition_date.isoformat(),
            "last_date": e.last_date.isoformat(),
            "detections": len(e.detections),
        }
        for e in events
    ]
    (out / "events.json").write_text(json.dumps(summary, indent=2) + "\n")
    write_provenance(cfg, out)
    print(f"{len(events)} events over {len(per_cell)} cells")
    return 0


def _binary_plane(raster: PatchRaster, channel: str | None) -> np.ndarray:
    name = channel or raster.channels[0]
    vals = raster.channel(name)
    # fire products store confidence classes, not probabilities
    if name == FIRE_BAND_NAME:
        return is_fire(np.rint(np.nan_to_num(vals)).astype(np.int64))
    return np.nan_to_num(vals) > 0.5


def _cmd_render(args) -> int:
    if args.mode == "triptych":
        if not (args.pred and args.target):
            raise ValidationError("triptych mode needs --pred and --target")
        pred = _binary_plane(read_raster(args.pred), args.channel)
        target = _binary_plane(read_raster(args.target), args.channel)
        image = render_triptych(pred, target)
    else:
        if args.input is None:
            raise ValidationError(f"{args.mode} mode needs a raster file argument")
        raster = read_raster(args.input)
        if args.mode == "mask":
            image = render_mask(_binary_plane(raster, args.channel))
        else:
            name = args.channel or raster.channels[0]
            image = render_progression(raster.channel(name), vmax=args.vmax)
    save_png(image, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out) if args.out else cfg.path("out") / "report"
    groups: dict[tuple, list] = {}
    for given in args.runs:
        path = Path(given)
        if path.is_dir():
            path = path / "metrics.json"
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise NotFoundError(f"{path}: no metrics file") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        key = (str(doc["input"]), str(doc["train_target"]), str(doc["eval_target"]))
        groups.setdefault(key, []).append((float(doc["f1"]), float(doc["iou"])))
    rows = []
    meta = []
    for key in sorted(groups):
        summary = aggregate_runs(groups[key])
        rows.append(
            (
                *key,
                format_percent(summary.f1_mean, summary.f1_std),
                format_percent(summary.iou_mean, summary.iou_std),
            )
        )
        meta.append(f"{' | '.join(key)}: {len(groups[key])} run(s)")
    text = format_report_table(rows) + "\n" + "\n".join(meta) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    write_provenance(cfg, out)
    print(text, end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")

    parser = argparse.ArgumentParser(
        prog="firecast",
        description="Next-day fire spread pipeline over a patch store.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic campaign")
    p.add_argument("--out", type=Path, help="swath output directory")
    p.add_argument("--store", type=Path, help="patch store for weather products")
    p.add_argument("--days", type=int, help="campaign length in days")
    p.add_argument("--cells", type=int, help="number of burning cells")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("resample", parents=[common], help="grid swaths into the store")
    p.add_argument("--swaths", type=Path, help="swath input directory")
    p.add_argument("--store", type=Path, help="patch store to write")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.set_defaults(func=_cmd_resample)

    p = sub.add_parser("make-dataset", parents=[common], help="materialize training samples")
    p.add_argument("--store", type=Path, help="patch store to read")
    p.add_argument("--out", type=Path, help="dataset output directory")
    p.set_defaults(func=_cmd_make_dataset)

    p = sub.add_parser("train", parents=[common], help="fit the network on a dataset")
    p.add_argument("--data", type=Path, help="dataset directory")
    p.add_argument("--out", type=Path, help="run output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a run on validation samples")
    p.add_argument("--data", type=Path, help="dataset directory")
    p.add_argument("--run", type=Path, help="run directory or checkpoint file")
    p.add_argument("--store", type=Path, help="patch store, for --eval-target or --baseline")
    p.add_argument("--eval-target", help="score against this fire product instead")
    p.add_argument("--baseline", choices=("persistence",), help="score a baseline instead of the model")
    p.add_argument("--out", type=Path, help="metrics output directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("baseline", parents=[common], help="day-over-day persistence per product")
    p.add_argument("--store", type=Path, help="patch store to read")
    p.add_argument("--products", help="comma-separated fire products")
    p.add_argument("--out", type=Path, help="output directory")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("progression", parents=[common], help="track fire events and age maps")
    p.add_argument("--store", type=Path, help="patch store to read")
    p.add_argument("--product", help="fire product to track")
    p.add_argument("--out", type=Path, help="output directory")
    p.set_defaults(func=_cmd_progression)

    p = sub.add_parser("render", parents=[common], help="raster to PNG")
    p.add_argument("input", nargs="?", type=Path, help="raster file (mask and progression modes)")
    p.add_argument("--mode", choices=("mask", "progression", "triptych"), required=True)
    p.add_argument("--pred", type=Path, help="prediction raster (triptych mode)")
    p.add_argument("--target", type=Path, help="target raster (triptych mode)")
    p.add_argument("--channel", help="channel name, first by default")
    p.add_argument("--vmax", type=float, help="progression color scale ceiling")
    p.add_argument("--out", type=Path, required=True, help="PNG path")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("report", parents=[common], help="aggregate evaluation runs into a table")
    p.add_argument("runs", nargs="+", type=Path, help="metrics.json files or their directories")
    p.add_argument("--out", type=Path, help="output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return 1 if exc.code else 0
    try:
        return args.func(args) or 0
    except FirecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
