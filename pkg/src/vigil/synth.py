"""Seeded synthetic data generators for benchmarks and demos.

Univariate: minutely series with daily seasonality plus injected point
anomalies.  Multivariate: co-moving feature excursions on four base
distributions, mixing nuisance transients (labeled normal) with sustained
anomalous runs (labeled anomalous).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .timeseries import MatrixWindow, SeriesWindow

MINUTE_MS = 60_000
DAY_MINUTES = 1440
EPOCH_START_MS = 1_700_000_000_000 - (1_700_000_000_000 % 86_400_000)


def seasonal_series(days: int = 21, seed: int = 0, level: float = 100.0,
                    amplitude: float = 25.0, noise_sigma: float = 2.0,
                    period: int = DAY_MINUTES, start_ts: int = EPOCH_START_MS,
                    signal_id: str = "synthetic") -> SeriesWindow:
    """Minutely series: daily two-harmonic seasonal shape plus white noise."""
    if days < 1:
        raise InvalidInput("days must be >= 1")
    n = days * DAY_MINUTES
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    phase = 2.0 * np.pi * (t % period) / period
    seasonal = amplitude * np.sin(phase) + 0.35 * amplitude * np.sin(2 * phase)
    values = level + seasonal + rng.normal(0.0, noise_sigma, n)
    timestamps = start_ts + MINUTE_MS * np.arange(n, dtype=np.int64)
    return SeriesWindow(signal_id, timestamps, values, step_ms=MINUTE_MS)


def inject_point_anomalies(values, count: int, magnitude: float, seed: int,
                           start: int = 0, end: int | None = None,
                           min_gap: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Add `count` isolated spikes of +-magnitude inside [start, end).

    Returns (modified copy, sorted anomaly indexes).  Injection sites keep
    `min_gap` samples apart so anomalies stay point-like.
    """
    x = np.asarray(values, dtype=float).copy()
    end = len(x) if end is None else end
    if not 0 <= start < end <= len(x):
        raise InvalidInput("bad injection range", start=start, end=end)
    rng = np.random.default_rng(seed)
    candidates = np.arange(start, end)
    chosen: list[int] = []
    rng.shuffle(candidates)
    for idx in candidates:
        if all(abs(idx - c) >= min_gap for c in chosen):
            chosen.append(int(idx))
            if len(chosen) == count:
                break
    if len(chosen) < count:
        raise InvalidInput("range too small for requested anomalies",
                           requested=count, placed=len(chosen))
    signs = rng.choice([-1.0, 1.0], size=count)
    for i, s in zip(chosen, signs):
        x[i] += s * magnitude
    return x, np.array(sorted(chosen))


@dataclass(frozen=True)
class MvDataset:
    name: str
    window: MatrixWindow
    y_true: np.ndarray            # per-point labels; 1 = sustained anomaly
    transient_idx: np.ndarray     # nuisance points (labeled 0)
    run_spans: tuple[tuple[int, int], ...]


def _base_points(kind: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Three-feature base distribution; kinds 0..3 vary the geometry."""
    if kind == 0:  # correlated gaussian
        cov = np.array([[1.0, 0.7, 0.3], [0.7, 1.0, 0.5], [0.3, 0.5, 1.0]])
        return rng.multivariate_normal([0.0, 0.0, 0.0], cov, size=n)
    if kind == 1:  # two clusters
        pick = rng.random(n) < 0.5
        a = rng.normal(-2.0, 0.6, (n, 3))
        b = rng.normal(2.0, 0.6, (n, 3))
        return np.where(pick[:, None], a, b)
    if kind == 2:  # curved manifold
        u = rng.normal(0.0, 1.0, n)
        x2 = 0.5 * u * u + rng.normal(0.0, 0.3, n)
        x3 = np.sin(u) + rng.normal(0.0, 0.3, n)
        return np.column_stack([u, x2, x3])
    if kind == 3:  # slow mean wander
        t = np.arange(n)
        drift = 0.8 * np.sin(2 * np.pi * t / (n / 3))
        return drift[:, None] + rng.normal(0.0, 1.0, (n, 3))
    raise InvalidInput("kind must be 0..3", kind=kind)


def mv_benchmark_dataset(kind: int, seed: int = 0, n: int = 4000,
                         n_singletons: int = 40, n_pairs: int = 35,
                         n_runs: int = 6, run_length: int = 12,
                         excursion: float = 6.0,
                         event_gap: int = 8) -> MvDataset:
    """One labeled multivariate benchmark set.

    All injected events are co-moving excursions (every feature shifts
    together); singleton and pair bursts are nuisance transients labeled
    normal, runs of `run_length` points are the true anomalies.
    `event_gap` keeps events that many points apart; anything above a
    detector's hold window keeps their verdict footprints disjoint.
    """
    rng = np.random.default_rng(seed)
    data = _base_points(kind, n, rng)
    scale = np.std(data, axis=0)
    shift = excursion * scale

    y_true = np.zeros(n, dtype=bool)
    taken = np.zeros(n, dtype=bool)
    taken[: 60] = True  # keep the window head clean for warm-up

    def claim(length: int, guard: int = event_gap) -> int:
        for _ in range(10_000):
            at = int(rng.integers(60, n - length - guard))
            lo, hi = max(0, at - guard), at + length + guard
            if not taken[lo:hi].any():
                taken[lo:hi] = True
                return at
        raise InvalidInput("could not place event", length=length)

    run_spans = []
    for _ in range(n_runs):
        at = claim(run_length)
        direction = rng.choice([-1.0, 1.0])
        data[at:at + run_length] += direction * shift
        y_true[at:at + run_length] = True
        run_spans.append((at, at + run_length))

    transients = []
    for _ in range(n_singletons):
        at = claim(1)
        data[at] += rng.choice([-1.0, 1.0]) * shift
        transients.append(at)
    for _ in range(n_pairs):
        at = claim(2)
        data[at:at + 2] += rng.choice([-1.0, 1.0]) * shift
        transients.extend([at, at + 1])

    timestamps = EPOCH_START_MS + MINUTE_MS * np.arange(n, dtype=np.int64)
    window = MatrixWindow([f"f{i}" for i in range(data.shape[1])],
                          timestamps, data, step_ms=MINUTE_MS)
    return MvDataset(name=f"mv-{kind}", window=window, y_true=y_true,
                     transient_idx=np.array(sorted(transients)),
                     run_spans=tuple(run_spans))
