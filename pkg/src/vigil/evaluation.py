"""Detection quality scoring: confusion counts and benchmark replay helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import SMOOTHED_FLAG_THRESHOLD
from .errors import InvalidInput
from .timeseries import exp_smooth


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 1.0

    @property
    def true_negative_rate(self) -> float:
        denom = self.tn + self.fp
        return self.tn / denom if denom else 1.0

    @property
    def balanced_accuracy(self) -> float:
        return 0.5 * (self.recall + self.true_negative_rate)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "precision": self.precision, "recall": self.recall,
                "balanced_accuracy": self.balanced_accuracy}


def _as_binary(arr, name: str) -> np.ndarray:
    out = np.asarray(arr)
    if out.ndim != 1:
        raise InvalidInput(f"{name} must be 1-D")
    if not np.isin(out, (0, 1, False, True)).all():
        raise InvalidInput(f"{name} must be binary")
    return out.astype(bool)


def confusion(y_true, y_pred) -> EvalReport:
    t = _as_binary(y_true, "y_true")
    p = _as_binary(y_pred, "y_pred")
    if len(t) != len(p):
        raise InvalidInput("label arrays must be the same length",
                           n_true=len(t), n_pred=len(p))
    return EvalReport(tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
                      tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p)))


def point_adjusted(y_true, y_pred, tolerance: int = 0) -> EvalReport:
    """Confusion with index slack for detector echo.

    A true anomaly counts as caught when any flag lands within
    `tolerance` samples of it, and flags explained that way stop counting
    as false positives.  tolerance=0 reduces to plain confusion.
    """
    if tolerance < 0:
        raise InvalidInput("tolerance must be >= 0")
    t = _as_binary(y_true, "y_true")
    p = _as_binary(y_pred, "y_pred")
    if len(t) != len(p):
        raise InvalidInput("label arrays must be the same length")
    if tolerance == 0:
        return confusion(t, p)
    adjusted = p.copy()
    n = len(t)
    pred_idx = np.flatnonzero(p)
    claimed: set[int] = set()
    for i in np.flatnonzero(t):
        lo, hi = max(0, i - tolerance), min(n - 1, i + tolerance)
        nearby = pred_idx[(pred_idx >= lo) & (pred_idx <= hi)]
        if nearby.size:
            adjusted[i] = True
            claimed.update(int(j) for j in nearby if not t[j])
    for j in claimed:
        adjusted[j] = False
    return confusion(t, adjusted)


def rolling_verdicts(raw_flags, hold_window: int, hold_tolerance: int,
                     alpha: float) -> np.ndarray:
    """Replay the windowed verdict rule over a full flag sequence.

    Position t gets the verdict a detector window ending at t would
    produce: smooth the last `hold_window` raw flags from a healthy rest
    state, threshold at 0.5, and require strictly more than
    `hold_tolerance` holds.  Positions before one full window are False.
    """
    raw = np.asarray(raw_flags, dtype=float)
    if raw.ndim != 1:
        raise InvalidInput("raw_flags must be 1-D")
    if hold_window < 1 or hold_tolerance < 0:
        raise InvalidInput("bad hold parameters",
                           hold_window=hold_window,
                           hold_tolerance=hold_tolerance)
    n = len(raw)
    out = np.zeros(n, dtype=bool)
    for t in range(hold_window - 1, n):
        window = raw[t - hold_window + 1: t + 1]
        smoothed = exp_smooth(np.concatenate(([0.0], window)), alpha)[1:]
        holds = int(np.sum(smoothed >= SMOOTHED_FLAG_THRESHOLD))
        out[t] = holds > hold_tolerance
    return out
