"""Mini-batch SGD trainer with best-validation-IoU checkpointing.

Fully deterministic: initialization comes from the network seed, the
epoch shuffles from the training seed, and the retained checkpoint is
the first epoch achieving the maximum validation IoU.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDataError, FormatError, ValidationError
from .loss import LossSpec
from .metrics import ConfusionCounts, accumulate, score
from .segnet import SegNetConfig, backward, forward, init_params
from .loss import sigmoid


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 8
    max_epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ValidationError("bad optimizer hyperparameters")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValidationError("batch_size and max_epochs must be positive")


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    net: SegNetConfig
    epoch: int
    val_iou: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_iou: float

    def line(self) -> str:
        return f"epoch={self.epoch} train_loss={self.train_loss:.6f} val_iou={self.val_iou:.6f}"


def _val_iou(params, net, inputs, targets, idx, batch_size, threshold=0.5):
    counts = ConfusionCounts()
    for start in range(0, len(idx), batch_size):
        chunk = idx[start : start + batch_size]
        probs = sigmoid(forward(params, net, inputs[chunk]))
        counts = accumulate(counts, probs > threshold, targets[chunk])
    return score(counts)[1]


def train(
    inputs: np.ndarray,
    targets: np.ndarray,
    train_idx,
    val_idx,
    net: SegNetConfig,
    cfg: TrainConfig = TrainConfig(),
    spec: LossSpec = LossSpec(),
) -> tuple[Checkpoint, list[EpochRecord]]:
    """Train on inputs[train_idx], checkpoint on inputs[val_idx] IoU.

    inputs is (N, H, W, C) and targets (N, h, w) binary. Returns the
    best checkpoint plus the per-epoch log.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    val_idx = np.asarray(val_idx, dtype=int)
    if train_idx.size == 0 or val_idx.size == 0:
        raise EmptyDataError("empty sample set")
    inputs = np.asarray(inputs, dtype=np.float32)
    targets = np.asarray(targets, dtype=np.float32)

    params = init_params(net, dtype=np.float32)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(cfg.seed)

    best: Checkpoint | None = None
    history: list[EpochRecord] = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        losses = []
        weights = []
        for start in range(0, order.size, cfg.batch_size):
            chunk = order[start : start + cfg.batch_size]
            loss, grads = backward(params, net, inputs[chunk], targets[chunk], spec)
            for name in params:
                velocity[name] = (
                    cfg.momentum * velocity[name]
                    - cfg.learning_rate * grads[name].astype(np.float32)
                )
                params[name] += velocity[name]
            losses.append(loss)
            weights.append(len(chunk))
        train_loss = float(np.average(losses, weights=weights))
        val_iou = _val_iou(params, net, inputs, targets, val_idx, cfg.batch_size)
        history.append(EpochRecord(epoch, train_loss, val_iou))
        if best is None or val_iou > best.val_iou:
            best = Checkpoint(
                {k: v.copy() for k, v in params.items()}, net, epoch, val_iou
            )
    return best, history


MAGIC = b"CKPT"
VERSION = 1


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    parts = [
        MAGIC,
        struct.pack(
            "<HIdHHHHq",
            VERSION,
            ckpt.epoch,
            float(ckpt.val_iou),
            ckpt.net.in_channels,
            ckpt.net.levels,
            ckpt.net.base_width,
            ckpt.net.head_pool,
            ckpt.net.seed,
        ),
        struct.pack("<I", len(ckpt.params)),
    ]
    for name in sorted(ckpt.params):
        arr = np.asarray(ckpt.params[name], dtype="<f4")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"{path}: truncated checkpoint")
        out = data[pos : pos + n]
        pos += n
        return out

    if take(4) != MAGIC:
        raise FormatError(f"{path}: bad magic, not a checkpoint")
    version, epoch, val_iou, in_ch, levels, base, pool, seed = struct.unpack(
        "<HIdHHHHq", take(struct.calcsize("<HIdHHHHq"))
    )
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (n_params,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(n_params):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape).copy()
    if pos != len(data):
        raise FormatError(f"{path}: trailing bytes")
    net = SegNetConfig(in_ch, levels, base, pool, seed)
    return Checkpoint(params, net, epoch, val_iou)
