"""Weighted binary cross-entropy over fire-probability maps.

Fire pixels are rare, so the positive term carries a weight w (default
3). Probabilities are clamped away from 0 and 1 before the logs; the
logit gradient uses the unclamped closed form, which is exact wherever
the clamp is inactive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class LossSpec:
    w: float = 3.0
    eps: float = 1e-7

    def __post_init__(self):
        if not self.w > 0:
            raise ValidationError("positive-class weight must be positive")
        if not 0.0 < self.eps < 0.5:
            raise ValidationError("eps must lie strictly between 0 and 0.5")


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def wbce_loss(
    pred_prob: np.ndarray, target: np.ndarray, spec: LossSpec = LossSpec()
) -> tuple[float, np.ndarray]:
    """Mean weighted BCE and its gradient with respect to the logits.

    L = -(1/N) sum[w y log(p) + (1 - y) log(1 - p)] with p clamped to
    [eps, 1 - eps]. The returned gradient is per pixel,
    (1/N)((w y + 1 - y) p - w y), taking p = sigmoid(logit).
    """
    p = np.asarray(pred_prob, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if p.shape != y.shape:
        raise ValidationError(
            f"prediction shape {p.shape} does not match target {y.shape}"
        )
    n = p.size
    if n == 0:
        raise ValidationError("empty prediction")
    pc = np.clip(p, spec.eps, 1.0 - spec.eps)
    loss = -(spec.w * y * np.log(pc) + (1.0 - y) * np.log1p(-pc)).sum() / n
    grad = ((spec.w * y + 1.0 - y) * p - spec.w * y) / n
    return (float(loss), grad)
