"""Embedded in-memory metric store.

Holds every series the platform reads or publishes: raw signals pushed by
collectors, model predictions, anomaly flags, and internal counters.  One
process owns a store; appends take a lock, so any thread may write.

Series identity is (metric name, sorted label pairs).  Timestamps are
epoch milliseconds and must be strictly increasing per series.
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .selector import Selector, parse_selector
from .timeseries import SeriesWindow

DEFAULT_RETENTION_MS = 22 * 24 * 3_600_000  # one day of slack past the snapshot horizon

LabelPairs = tuple[tuple[str, str], ...]


def _label_key(labels: dict | None) -> LabelPairs:
    if not labels:
        return ()
    return tuple(sorted((str(k), str(v)) for k, v in labels.items()))


def format_series(name: str, labels: LabelPairs) -> str:
    if not labels:
        return name
    inner = ",".join(
        '{}="{}"'.format(k, v.replace("\\", "\\\\").replace('"', '\\"'))
        for k, v in labels
    )
    return f"{name}{{{inner}}}"


@dataclass
class _Series:
    name: str
    labels: LabelPairs
    timestamps: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class RangeResult:
    """Samples for one series aligned to a query step."""

    name: str
    labels: LabelPairs
    timestamps: tuple[int, ...]
    values: tuple[float, ...]


class MetricStore:
    def __init__(self, retention_ms: int = DEFAULT_RETENTION_MS):
        if retention_ms <= 0:
            raise InvalidInput("retention_ms must be positive")
        self._retention_ms = retention_ms
        self._series: dict[tuple[str, LabelPairs], _Series] = {}
        self._lock = threading.Lock()

    def append(self, name: str, value: float, ts_ms: int,
               labels: dict | None = None) -> None:
        value = float(value)
        ts_ms = int(ts_ms)
        if not np.isfinite(value):
            raise InvalidInput("metric value must be finite", name=name)
        key = (name, _label_key(labels))
        with self._lock:
            series = self._series.get(key)
            if series is None:
                series = _Series(name, key[1])
                self._series[key] = series
            if series.timestamps and ts_ms <= series.timestamps[-1]:
                raise InvalidInput(
                    "timestamps must be strictly increasing per series",
                    name=name, ts_ms=ts_ms, last_ts=series.timestamps[-1])
            series.timestamps.append(ts_ms)
            series.values.append(value)
            self._prune(series)

    def append_many(self, name: str, timestamps, values,
                    labels: dict | None = None) -> None:
        for ts, v in zip(timestamps, values, strict=True):
            self.append(name, v, ts, labels)

    def _prune(self, series: _Series) -> None:
        # amortized: only trim once a series carries a full day past retention
        horizon = series.timestamps[-1] - self._retention_ms
        if series.timestamps[0] >= horizon - 86_400_000:
            return
        cut = bisect.bisect_left(series.timestamps, horizon)
        if cut > 0:
            del series.timestamps[:cut]
            del series.values[:cut]

    # -- queries ---------------------------------------------------------

    def query_range(self, selector: str | Selector, start_ms: int,
                    end_ms: int, step_ms: int) -> list[RangeResult]:
        """Aligned range query.

        Returns, per matching series, one sample for each step instant in
        [start, end] where the series has data: the last raw value with
        timestamp inside (instant - step, instant].  Instants with no raw
        sample are omitted.
        """
        if step_ms <= 0:
            raise InvalidInput("step_ms must be positive")
        if end_ms < start_ms:
            raise InvalidInput("end before start", start=start_ms, end=end_ms)
        if isinstance(selector, str):
            selector = parse_selector(selector)
        out = []
        with self._lock:
            matched = [
                s for s in self._series.values()
                if selector.matches(s.name, dict(s.labels))
            ]
            for series in matched:
                ts_out: list[int] = []
                val_out: list[float] = []
                for instant in range(start_ms, end_ms + 1, step_ms):
                    idx = bisect.bisect_right(series.timestamps, instant) - 1
                    if idx < 0:
                        continue
                    if series.timestamps[idx] <= instant - step_ms:
                        continue
                    ts_out.append(instant)
                    val_out.append(series.values[idx])
                if ts_out:
                    out.append(RangeResult(series.name, series.labels,
                                           tuple(ts_out), tuple(val_out)))
        out.sort(key=lambda r: (r.name, r.labels))
        return out

    def latest(self, selector: str | Selector) -> list[tuple[str, LabelPairs, int, float]]:
        if isinstance(selector, str):
            selector = parse_selector(selector)
        with self._lock:
            rows = [
                (s.name, s.labels, s.timestamps[-1], s.values[-1])
                for s in self._series.values()
                if s.timestamps and selector.matches(s.name, dict(s.labels))
            ]
        rows.sort(key=lambda r: (r[0], r[1]))
        return rows

    def window(self, selector: str | Selector, end_ms: int, points: int,
               step_ms: int, signal_id: str | None = None) -> SeriesWindow | None:
        """Trailing fixed-length window for one series, or None if empty.

        Steps with no fresh sample repeat the previous aligned value, so
        the result is gap-free as long as the series covers the span.
        """
        start = end_ms - (points - 1) * step_ms
        results = self.query_range(selector, start, end_ms, step_ms)
        if not results:
            return None
        if len(results) > 1:
            raise InvalidInput("selector matched multiple series",
                               selector=str(selector), matched=len(results))
        r = results[0]
        by_ts = dict(zip(r.timestamps, r.values))
        ts, vals = [], []
        last = None
        for instant in range(start, end_ms + 1, step_ms):
            if instant in by_ts:
                last = by_ts[instant]
            if last is not None:
                ts.append(instant)
                vals.append(last)
        if not ts:
            return None
        return SeriesWindow(signal_id or format_series(r.name, r.labels),
                            np.asarray(ts, dtype=np.int64),
                            np.asarray(vals, dtype=np.float64),
                            step_ms=step_ms)

    def series_count(self) -> int:
        with self._lock:
            return len(self._series)

    def render_exposition(self, now_ms: int | None = None) -> str:
        """Text exposition: `name{labels} value timestamp_ms` per live series.

        Lines are sorted by metric name, then by label pairs.  ``now_ms``
        is accepted for interface symmetry; all live series render.
        """
        with self._lock:
            rows = [
                (s.name, s.labels, s.values[-1], s.timestamps[-1])
                for s in self._series.values() if s.timestamps
            ]
        rows.sort(key=lambda r: (r[0], r[1]))
        lines = [
            f"{format_series(name, labels)} {value!r} {ts}"
            for name, labels, value, ts in rows
        ]
        return "\n".join(lines) + ("\n" if lines else "")
