"""A compact encoder-decoder segmentation network in plain numpy.

Channels-last layout (batch, height, width, channels). The encoder
stacks conv3x3 + tanh + 2x2 average pooling; the decoder mirrors it
with nearest upsampling and skip concatenation; a 1x1 head emits one
logit per input pixel, reduced to the target resolution by a fixed
max-pool. Average pooling and tanh keep everything except that final
pool smooth, which is what makes finite-difference gradient checks
tight. Backward passes are exact reverse-mode derivatives; the head
max-pool routes gradient to the first maximum of each block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .loss import LossSpec, sigmoid, wbce_loss


@dataclass(frozen=True)
class SegNetConfig:
    in_channels: int
    levels: int = 3
    base_width: int = 8
    head_pool: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.in_channels < 1 or self.levels < 1 or self.base_width < 1:
            raise ValidationError("channels, levels, and width must be positive")
        if self.head_pool < 1:
            raise ValidationError("head_pool must be positive")

    def width(self, level: int) -> int:
        return self.base_width * (1 << level)

    @property
    def mid_width(self) -> int:
        return self.base_width * (1 << self.levels)


def init_params(cfg: SegNetConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    """Fan-in-scaled uniform weights, zero biases, fixed draw order."""
    rng = np.random.default_rng(cfg.seed)

    def conv(name: str, c_in: int, c_out: int, k: int) -> None:
        limit = float(np.sqrt(1.0 / (k * k * c_in)))
        params[name + "_w"] = rng.uniform(-limit, limit, (k, k, c_in, c_out)).astype(
            dtype
        )
        params[name + "_b"] = np.zeros(c_out, dtype=dtype)

    params: dict[str, np.ndarray] = {}
    c = cfg.in_channels
    for i in range(cfg.levels):
        conv(f"enc{i}", c, cfg.width(i), 3)
        c = cfg.width(i)
    conv("mid", c, cfg.mid_width, 3)
    c = cfg.mid_width
    for i in reversed(range(cfg.levels)):
        conv(f"dec{i}", c + cfg.width(i), cfg.width(i), 3)
        c = cfg.width(i)
    conv("head", c, 1, 1)
    return params


def param_count(params: dict[str, np.ndarray]) -> int:
    return sum(int(v.size) for v in params.values())


def _conv3(x, w, b):
    bsz, h, wd, _ = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.broadcast_to(b, (bsz, h, wd, b.shape[0])).copy()
    for dy in range(3):
        for dx in range(3):
            out += np.tensordot(
                xp[:, dy : dy + h, dx : dx + wd, :], w[dy, dx], axes=([3], [0])
            )
    return out


def _conv3_backward(x, w, gout):
    bsz, h, wd, _ = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for dy in range(3):
        for dx in range(3):
            patch = xp[:, dy : dy + h, dx : dx + wd, :]
            gw[dy, dx] = np.tensordot(patch, gout, axes=([0, 1, 2], [0, 1, 2]))
            gxp[:, dy : dy + h, dx : dx + wd, :] += np.tensordot(
                gout, w[dy, dx], axes=([3], [1])
            )
    gb = gout.sum(axis=(0, 1, 2))
    return gxp[:, 1:-1, 1:-1, :], gw, gb


def _conv1(x, w, b):
    return np.tensordot(x, w[0, 0], axes=([3], [0])) + b


def _conv1_backward(x, w, gout):
    gw = np.tensordot(x, gout, axes=([0, 1, 2], [0, 1, 2]))[None, None]
    gx = np.tensordot(gout, w[0, 0], axes=([3], [1]))
    gb = gout.sum(axis=(0, 1, 2))
    return gx, gw, gb


def _avgpool2(x):
    bsz, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValidationError(f"spatial size {h}x{w} not divisible by 2")
    return x.reshape(bsz, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))


def _avgpool2_backward(gout):
    g = np.repeat(np.repeat(gout, 2, axis=1), 2, axis=2)
    return g / 4.0


def _upsample2(x):
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def _upsample2_backward(gout):
    bsz, h, w, c = gout.shape
    return gout.reshape(bsz, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


def _maxpool(x, p):
    bsz, h, w = x.shape
    if h % p or w % p:
        raise ValidationError(f"logit size {h}x{w} not divisible by pool {p}")
    xb = (
        x.reshape(bsz, h // p, p, w // p, p)
        .transpose(0, 1, 3, 2, 4)
        .reshape(bsz, h // p, w // p, p * p)
    )
    idx = xb.argmax(axis=3)
    out = np.take_along_axis(xb, idx[..., None], axis=3)[..., 0]
    return out, idx


def _maxpool_backward(gout, idx, h, w, p):
    bsz = gout.shape[0]
    gb = np.zeros((bsz, h // p, w // p, p * p), dtype=gout.dtype)
    np.put_along_axis(gb, idx[..., None], gout[..., None], axis=3)
    return (
        gb.reshape(bsz, h // p, w // p, p, p)
        .transpose(0, 1, 3, 2, 4)
        .reshape(bsz, h, w)
    )


def _run(params, cfg: SegNetConfig, x, keep_cache: bool):
    """Shared forward pass; the cache holds every tensor backward needs."""
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[3] != cfg.in_channels:
        raise ValidationError(
            f"input must be (batch, h, w, {cfg.in_channels}), got {x.shape}"
        )
    cache = {"x": x, "enc_in": [], "enc_act": [], "dec_in": [], "dec_act": []}
    a = x
    for i in range(cfg.levels):
        cache["enc_in"].append(a)
        a = np.tanh(_conv3(a, params[f"enc{i}_w"], params[f"enc{i}_b"]))
        cache["enc_act"].append(a)
        a = _avgpool2(a)
    cache["mid_in"] = a
    a = np.tanh(_conv3(a, params["mid_w"], params["mid_b"]))
    cache["mid_act"] = a
    for i in reversed(range(cfg.levels)):
        a = np.concatenate([_upsample2(a), cache["enc_act"][i]], axis=3)
        cache["dec_in"].append(a)
        a = np.tanh(_conv3(a, params[f"dec{i}_w"], params[f"dec{i}_b"]))
        cache["dec_act"].append(a)
    cache["head_in"] = a
    logits_full = _conv1(a, params["head_w"], params["head_b"])[..., 0]
    pooled, idx = _maxpool(logits_full, cfg.head_pool)
    cache["pool_idx"] = idx
    cache["full_shape"] = logits_full.shape
    if keep_cache:
        return logits_full, pooled, cache
    return logits_full, pooled, None


def forward(params, cfg: SegNetConfig, x, full: bool = False):
    """Pooled logits for a batch; full=True returns pre-pool logits too."""
    logits_full, pooled, _ = _run(params, cfg, x, keep_cache=False)
    if full:
        return pooled, logits_full
    return pooled


def predict_prob(params, cfg: SegNetConfig, x) -> np.ndarray:
    return sigmoid(forward(params, cfg, x))


def backward(
    params, cfg: SegNetConfig, x, target, spec: LossSpec = LossSpec()
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact parameter gradients for a batch.

    The loss is the weighted BCE of sigmoid(pooled logits) against the
    target mask, averaged over every pixel in the batch.
    """
    _, pooled, cache = _run(params, cfg, x, keep_cache=True)
    target = np.asarray(target)
    loss, gz = wbce_loss(sigmoid(pooled), target, spec)

    grads: dict[str, np.ndarray] = {}
    _, h, w = cache["full_shape"]
    g = _maxpool_backward(gz, cache["pool_idx"], h, w, cfg.head_pool)[..., None]
    g, grads["head_w"], grads["head_b"] = _conv1_backward(
        cache["head_in"], params["head_w"], g
    )
    # decoder ran levels-1 .. 0, so unwind 0 .. levels-1; level i sits at
    # cache position levels-1-i
    for i in range(cfg.levels):
        pos = cfg.levels - 1 - i
        act = cache["dec_act"][pos]
        g = g * (1.0 - act * act)
        g, grads[f"dec{i}_w"], grads[f"dec{i}_b"] = _conv3_backward(
            cache["dec_in"][pos], params[f"dec{i}_w"], g
        )
        up_c = g.shape[3] - cfg.width(i)
        g_skip = g[..., up_c:]
        g = _upsample2_backward(g[..., :up_c])
        # stash the skip gradient; it joins the encoder path at level i
        grads[f"_skip{i}"] = g_skip
    act = cache["mid_act"]
    g = g * (1.0 - act * act)
    g, grads["mid_w"], grads["mid_b"] = _conv3_backward(
        cache["mid_in"], params["mid_w"], g
    )
    for i in reversed(range(cfg.levels)):
        g = _avgpool2_backward(g)
        g = g + grads.pop(f"_skip{i}")
        act = cache["enc_act"][i]
        g = g * (1.0 - act * act)
        g, grads[f"enc{i}_w"], grads[f"enc{i}_b"] = _conv3_backward(
            cache["enc_in"][i], params[f"enc{i}_w"], g
        )
    return loss, grads
