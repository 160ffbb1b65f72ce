"""Time-series primitives shared by every detector.

Windows, empirical quantiles, exponential smoothing, moving-median
seasonality extraction, decision boundaries, and training-noise injection.
All operations are pure functions over immutable inputs; every stochastic
operation takes an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import InsufficientData, InvalidInput

__all__ = [
    "TimePoint",
    "SeriesWindow",
    "MatrixWindow",
    "SeasonalProfile",
    "Boundary",
    "empirical_quantile",
    "exp_smooth",
    "moving_median",
    "mediff_extract",
    "iqr_boundary",
    "quantile_boundary",
    "inject_noise",
]


@dataclass(frozen=True)
class TimePoint:
    """One sample of a signal: epoch-millisecond timestamp and finite value."""

    ts: int
    value: float

    def __post_init__(self):
        if self.ts <= 0:
            raise InvalidInput("timestamp must be positive", ts=self.ts)
        if not math.isfinite(self.value):
            raise InvalidInput("value must be finite", ts=self.ts)


class SeriesWindow:
    """A rolling, timestamp-ordered slice of one signal's samples.

    Internally stores parallel numpy arrays for speed; ``points`` exposes the
    samples as :class:`TimePoint` objects. Timestamps are strictly increasing
    and every value is finite.
    """

    __slots__ = ("signal_id", "timestamps", "values", "step_ms")

    def __init__(self, signal_id: str, timestamps, values, step_ms: int = 60_000):
        ts = np.asarray(timestamps, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
        if ts.ndim != 1 or vals.ndim != 1 or ts.shape != vals.shape:
            raise InvalidInput("timestamps and values must be 1-D and equal length")
        if len(ts) < 1:
            raise InvalidInput("window must contain at least one point")
        if ts[0] <= 0:
            raise InvalidInput("timestamps must be positive")
        if len(ts) > 1 and not (np.diff(ts) > 0).all():
            raise InvalidInput("timestamps must be strictly increasing",
                               signal_id=signal_id)
        if not np.isfinite(vals).all():
            raise InvalidInput("values must be finite", signal_id=signal_id)
        self.signal_id = signal_id
        self.timestamps = ts
        self.values = vals
        self.step_ms = int(step_ms)

    @classmethod
    def from_points(cls, signal_id: str, points, step_ms: int = 60_000) -> "SeriesWindow":
        pts = list(points)
        return cls(signal_id, [p.ts for p in pts], [p.value for p in pts], step_ms)

    @property
    def points(self) -> list[TimePoint]:
        return [TimePoint(int(t), float(v))
                for t, v in zip(self.timestamps, self.values)]

    def __len__(self) -> int:
        return len(self.timestamps)

    def tail(self, n: int) -> "SeriesWindow":
        """Last ``n`` samples as a new window."""
        if n < 1:
            raise InvalidInput("tail length must be >= 1", n=n)
        return SeriesWindow(self.signal_id, self.timestamps[-n:],
                            self.values[-n:], self.step_ms)

    def __repr__(self) -> str:
        return (f"SeriesWindow({self.signal_id!r}, n={len(self)}, "
                f"span=[{self.timestamps[0]}..{self.timestamps[-1]}])")


class MatrixWindow:
    """Several signals sampled on one shared timestamp grid, one column each."""

    __slots__ = ("signal_ids", "timestamps", "values", "step_ms")

    def __init__(self, signal_ids, timestamps, values, step_ms: int = 60_000):
        ts = np.asarray(timestamps, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 2:
            raise InvalidInput("values must be 2-D (points x signals)")
        if ts.ndim != 1 or len(ts) != vals.shape[0]:
            raise InvalidInput("timestamps must align with value rows")
        if len(ts) < 1:
            raise InvalidInput("window must contain at least one point")
        if vals.shape[1] != len(signal_ids):
            raise InvalidInput("one signal id per column",
                               columns=vals.shape[1], ids=len(signal_ids))
        if ts[0] <= 0:
            raise InvalidInput("timestamps must be positive")
        if len(ts) > 1 and not (np.diff(ts) > 0).all():
            raise InvalidInput("timestamps must be strictly increasing")
        if not np.isfinite(vals).all():
            raise InvalidInput("values must be finite")
        self.signal_ids = tuple(signal_ids)
        self.timestamps = ts
        self.values = vals
        self.step_ms = int(step_ms)

    def __len__(self) -> int:
        return len(self.timestamps)

    def column(self, signal_id: str) -> SeriesWindow:
        idx = self.signal_ids.index(signal_id)
        return SeriesWindow(signal_id, self.timestamps, self.values[:, idx],
                            self.step_ms)

    def __repr__(self) -> str:
        return (f"MatrixWindow({len(self.signal_ids)} signals, n={len(self)}, "
                f"span=[{self.timestamps[0]}..{self.timestamps[-1]}])")


@dataclass(frozen=True)
class SeasonalProfile:
    """Per-phase seasonal offsets plus the median level they sit on.

    ``phase_values`` has length ``period`` and a median of zero; the constant
    offset lives in ``level`` so that
    ``level + phase_values[i % period] + residual[i]`` reconstructs the input.
    """

    period: int
    phase_values: tuple[float, ...]
    level: float

    def __post_init__(self):
        if self.period < 1:
            raise InvalidInput("period must be positive", period=self.period)
        if len(self.phase_values) != self.period:
            raise InvalidInput("phase_values length must equal period",
                               period=self.period, got=len(self.phase_values))

    def expected(self, i: int) -> float:
        """Seasonal expectation (level + phase offset) at sample index ``i``."""
        return self.level + self.phase_values[i % self.period]


@dataclass(frozen=True)
class Boundary:
    """A lower/upper decision boundary with the method that produced it."""

    lower: float
    upper: float
    method: str  # "iqr" or "quantile"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper:
            raise InvalidInput("boundary lower must not exceed upper",
                               lower=self.lower, upper=self.upper)

    def outside(self, x) -> np.ndarray:
        """Elementwise mask of values falling outside [lower, upper]."""
        arr = np.asarray(x, dtype=float)
        return (arr < self.lower) | (arr > self.upper)


def empirical_quantile(data, q: float) -> float:
    """Linear-interpolation quantile of ``data`` at ``q`` in [0, 1].

    Index h = q * (n - 1); the result interpolates between the floor(h)-th
    and ceil(h)-th order statistics.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise InvalidInput("quantile of empty data")
    if not np.isfinite(arr).all():
        raise InvalidInput("quantile input must be finite")
    if not 0.0 <= q <= 1.0:
        raise InvalidInput("quantile level must be in [0, 1]", q=q)
    s = np.sort(arr)
    h = q * (s.size - 1)
    lo = int(math.floor(h))
    hi = int(math.ceil(h))
    if lo == hi:
        return float(s[lo])
    return float(s[lo] + (h - lo) * (s[hi] - s[lo]))


def exp_smooth(series, alpha: float) -> np.ndarray:
    """Exponential smoothing: s_0 = x_0, s_t = alpha*x_t + (1-alpha)*s_{t-1}."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidInput("smoothing alpha must be in (0, 1]", alpha=alpha)
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise InvalidInput("cannot smooth an empty series")
    if alpha == 1.0:
        return x.copy()
    # lfilter evaluates the recursion in C; zi makes s_0 come out as x_0.
    out, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], x, zi=[(1.0 - alpha) * x[0]])
    return out


def moving_median(series, window: int) -> np.ndarray:
    """Centered moving median; edges use windows clipped to the array bounds.

    Even-sized (clipped) windows take the mean of the two central values.
    """
    if window <= 0 or window % 2 == 0:
        raise InvalidInput("window must be an odd positive integer", window=window)
    x = np.asarray(series, dtype=float)
    n = x.size
    if window > n:
        raise InvalidInput("window exceeds series length", window=window, n=n)
    half = window // 2
    out = np.empty(n, dtype=float)
    # Interior: full windows, vectorized in chunks to bound peak memory.
    if n >= window:
        interior = n - 2 * half
        chunk = max(1, 4_000_000 // window)
        view = np.lib.stride_tricks.sliding_window_view(x, window)
        for start in range(0, interior, chunk):
            stop = min(start + chunk, interior)
            out[half + start:half + stop] = np.median(view[start:stop], axis=1)
    for i in range(min(half, n)):
        out[i] = np.median(x[: i + half + 1])
    for i in range(max(n - half, 0), n):
        out[i] = np.median(x[i - half:])
    return out


def mediff_extract(series: SeriesWindow, period: int) -> tuple[SeasonalProfile, np.ndarray]:
    """Moving-median seasonality extraction.

    Steps: (1) trend = centered moving median with window = period rounded up
    to odd; (2) detrend; (3) per-phase medians of the detrended values,
    re-centered so their median is zero; (4) level = median(trend) plus the
    re-centering offset. Residuals satisfy the exact reconstruction identity
    ``value[i] == level + phase_values[i % period] + residuals[i]``.
    """
    if period < 1:
        raise InvalidInput("period must be positive", period=period)
    n = len(series)
    if n < 2 * period:
        raise InsufficientData("need at least two seasonal periods",
                               n=n, period=period)
    values = series.values
    trend_window = period if period % 2 == 1 else period + 1
    if trend_window > n:
        trend_window = n if n % 2 == 1 else n - 1
    trend = moving_median(values, trend_window)
    detrended = values - trend

    phase_values = np.empty(period, dtype=float)
    for p in range(period):
        phase_values[p] = np.median(detrended[p::period])
    offset = float(np.median(phase_values))
    phase_values -= offset
    level = float(np.median(trend)) + offset

    idx = np.arange(n) % period
    residuals = values - level - phase_values[idx]
    profile = SeasonalProfile(period=period,
                              phase_values=tuple(float(v) for v in phase_values),
                              level=level)
    return profile, residuals


def iqr_boundary(residuals, multiplier: float) -> Boundary:
    """Inter-quartile-range boundary: [Q1 - m*IQR, Q3 + m*IQR]."""
    if multiplier <= 0:
        raise InvalidInput("IQR multiplier must be positive", multiplier=multiplier)
    arr = np.asarray(residuals, dtype=float)
    if arr.size < 4:
        raise InsufficientData("need at least 4 residuals for an IQR boundary",
                               n=arr.size)
    q1 = empirical_quantile(arr, 0.25)
    q3 = empirical_quantile(arr, 0.75)
    iqr = q3 - q1
    return Boundary(lower=q1 - multiplier * iqr, upper=q3 + multiplier * iqr,
                    method="iqr", params={"multiplier": multiplier})


def quantile_boundary(residuals, q_low: float, q_high: float) -> Boundary:
    """Boundary at the empirical quantiles [q_low, q_high]."""
    if not (0.0 <= q_low < q_high <= 1.0):
        raise InvalidInput("need 0 <= q_low < q_high <= 1",
                           q_low=q_low, q_high=q_high)
    return Boundary(lower=empirical_quantile(residuals, q_low),
                    upper=empirical_quantile(residuals, q_high),
                    method="quantile", params={"q_low": q_low, "q_high": q_high})


def inject_noise(series, eta: float, seed: int) -> np.ndarray:
    """Add seeded Gaussian noise with sigma = eta * std(series).

    Used on training copies only, to counter sampling bias from short
    onboarding datasets. eta = 0 or a constant series returns the input
    unchanged; the same seed always produces the same output.
    """
    if eta < 0:
        raise InvalidInput("noise scale eta must be >= 0", eta=eta)
    x = np.asarray(series, dtype=float)
    sigma = eta * float(np.std(x))
    if sigma == 0.0:
        return x.copy()
    rng = np.random.default_rng(seed)
    return x + rng.normal(0.0, sigma, size=x.shape)
