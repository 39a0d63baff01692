"""Pixel-wise evaluation: confusion counts, F1/IoU, run aggregation.

Counts accumulate across every evaluated sample before a single score
is taken (micro-averaging); averaging per-sample scores instead gives a
different and wrong number, which a test pins down with a constructed
counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataError, ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts cannot be negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def accumulate(
    counts: ConfusionCounts, pred_bin: np.ndarray, target: np.ndarray
) -> ConfusionCounts:
    pred = np.asarray(pred_bin).astype(bool)
    true = np.asarray(target).astype(bool)
    if pred.shape != true.shape:
        raise ValidationError(
            f"prediction shape {pred.shape} does not match target {true.shape}"
        )
    return counts + ConfusionCounts(
        tp=int((pred & true).sum()),
        fp=int((pred & ~true).sum()),
        fn=int((~pred & true).sum()),
        tn=int((~pred & ~true).sum()),
    )


def score(counts: ConfusionCounts) -> tuple[float, float]:
    """(f1, iou) from accumulated counts.

    When neither prediction nor target contains any positive pixel the
    two masks agree perfectly, so both scores are 1 by convention.
    """
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return (1.0, 1.0)
    f1 = 2 * counts.tp / denom
    iou = counts.tp / (counts.tp + counts.fp + counts.fn)
    return (f1, iou)


def iou_from_f1(f1: float) -> float:
    """The exact algebraic link between the two scores."""
    return f1 / (2.0 - f1)


def persistence_predict(current_mask: np.ndarray) -> np.ndarray:
    """Tomorrow's fire equals today's fire."""
    return np.asarray(current_mask).astype(bool)


def evaluate_pairs(pairs, threshold: float = 0.5) -> tuple[float, float, ConfusionCounts]:
    """Micro-averaged (f1, iou, counts) over (probability, target) pairs.

    Probabilities are binarized at the threshold; already-binary
    predictions pass through unchanged (True > 0.5).
    """
    counts = ConfusionCounts()
    n = 0
    for pred, target in pairs:
        pred_bin = np.asarray(pred, dtype=np.float64) > threshold
        counts = accumulate(counts, pred_bin, target)
        n += 1
    if n == 0:
        raise EmptyDataError("nothing to evaluate")
    f1, iou = score(counts)
    return (f1, iou, counts)


@dataclass(frozen=True)
class RunSummary:
    """Mean and sample standard deviation of per-run scores."""

    f1_runs: tuple[float, ...]
    iou_runs: tuple[float, ...]

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1_runs))

    @property
    def iou_mean(self) -> float:
        return float(np.mean(self.iou_runs))

    @property
    def f1_std(self) -> float | None:
        if len(self.f1_runs) < 2:
            return None
        return float(np.std(self.f1_runs, ddof=1))

    @property
    def iou_std(self) -> float | None:
        if len(self.iou_runs) < 2:
            return None
        return float(np.std(self.iou_runs, ddof=1))


def aggregate_runs(runs: list[tuple[float, float]]) -> RunSummary:
    if not runs:
        raise EmptyDataError("no runs to aggregate")
    return RunSummary(
        tuple(float(f1) for f1, _ in runs), tuple(float(iou) for _, iou in runs)
    )


def format_percent(mean: float, std: float | None) -> str:
    """Render a score as percent, '19.62 ± 0.31'; a single run has no
    spread to report, so its std column shows a dash."""
    if std is None:
        return f"{100 * mean:.2f} ± -"
    return f"{100 * mean:.2f} ± {100 * std:.2f}"


REPORT_COLUMNS = ("Input", "Training Target", "Evaluation Target", "F1 (%)", "IoU (%)")


def format_report_table(rows: list[tuple[str, str, str, str, str]]) -> str:
    """Delimited text table with the fixed evaluation report columns."""
    table = [REPORT_COLUMNS, *[tuple(str(v) for v in row) for row in rows]]
    widths = [max(len(r[i]) for r in table) for i in range(len(REPORT_COLUMNS))]
    lines = []
    for i, row in enumerate(table):
        lines.append(" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
