"""Gridded wildfire-spread pipeline: data formats, models, and benchmarks."""

from .bands import (
    BandKind,
    BandSpec,
    DayNight,
    band_product,
    fire_product,
    is_fire,
)
from .config import PipelineConfig, load_config, write_provenance
from .dataset import (
    ChannelManifest,
    ChannelRef,
    SampleKey,
    Split,
    build_dataset,
    build_input,
    build_target,
    modis_manifest,
    proxy_manifest,
    select_samples,
    split_cells,
    viirs_manifest,
)
from .errors import (
    EmptyDataError,
    FirecastError,
    FormatError,
    NotFoundError,
    ValidationError,
)
from .grid import (
    AUSTRALIA_BBOX,
    CellId,
    GeoGrid,
    ResolutionClass,
    make_grid,
    patch_size_for,
)
from .loss import LossSpec, wbce_loss
from .metrics import (
    ConfusionCounts,
    evaluate_pairs,
    iou_from_f1,
    score,
)
from .progression import (
    Detection,
    FireEvent,
    TrackerParams,
    track_events,
)
from .resample import ResampleParams, idw_resample, nn_resample
from .segnet import SegNetConfig, init_params, predict_prob
from .store import PatchRaster, PatchStore
from .swath import Swath, read_swath, write_swath
from .synth import FireSimParams, SensorModel, observe, simulate_fire
from .train import Checkpoint, TrainConfig, train

__all__ = [
    "AUSTRALIA_BBOX",
    "BandKind",
    "BandSpec",
    "CellId",
    "ChannelManifest",
    "ChannelRef",
    "Checkpoint",
    "ConfusionCounts",
    "DayNight",
    "Detection",
    "EmptyDataError",
    "FireEvent",
    "FireSimParams",
    "FirecastError",
    "FormatError",
    "GeoGrid",
    "LossSpec",
    "NotFoundError",
    "PatchRaster",
    "PatchStore",
    "PipelineConfig",
    "ResampleParams",
    "ResolutionClass",
    "SampleKey",
    "SegNetConfig",
    "SensorModel",
    "Split",
    "Swath",
    "TrackerParams",
    "TrainConfig",
    "ValidationError",
    "band_product",
    "build_dataset",
    "build_input",
    "build_target",
    "evaluate_pairs",
    "fire_product",
    "idw_resample",
    "init_params",
    "iou_from_f1",
    "is_fire",
    "load_config",
    "make_grid",
    "modis_manifest",
    "nn_resample",
    "observe",
    "patch_size_for",
    "predict_prob",
    "proxy_manifest",
    "read_swath",
    "score",
    "select_samples",
    "simulate_fire",
    "split_cells",
    "track_events",
    "train",
    "viirs_manifest",
    "write_provenance",
    "write_swath",
]

__version__ = "0.1.0"
