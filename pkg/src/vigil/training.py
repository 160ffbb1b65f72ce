"""Training jobs: preview (fast, trailing subset) and full.

A job slices the snapshot datasets per mode, optionally injects noise on
the training copy, fits the model for the requested type, attaches the
per-signal training distribution summaries used later by drift grading,
and serializes the result to the artifact store.  Preview artifacts are
tagged temporary and must never be registered; registration of full
artifacts happens in the caller, after the bytes are safely on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detect import (DetectorSpec, FLOW_MV, FLOW_UV,
                     effective_mv_boundary, effective_uv_bounds)
from .drift import summarize
from .errors import InsufficientData, InvalidInput
from .models import arima_fit, iforest_fit, serialize_model
from .store import ModelConfig
from .timeseries import MatrixWindow, SeriesWindow, inject_noise, mediff_extract

DAY_MS = 24 * 3_600_000
PREVIEW_WINDOW_MS = 3 * DAY_MS
FULL_WINDOW_MS = 21 * DAY_MS

MODE_PREVIEW = "preview"
MODE_FULL = "full"

DEFAULT_CONFIGS = {
    "arima_uv": ModelConfig(
        model_type="arima_uv",
        min_training_length=7 * 1440,  # a week of minutes
        min_prediction_step=60,
        params={"iqr_multiplier": 3.0, "noise_eta": 0.05}),
    "iforest_mv": ModelConfig(
        model_type="iforest_mv",
        min_training_length=7 * 1440,
        min_prediction_step=60,
        params={"num_trees": 100, "subsample_n": 256,
                "contamination": 0.01, "noise_eta": 0.0}),
}


@dataclass(frozen=True)
class TrainRequest:
    model_type: str
    mode: str
    signal_ids: tuple[str, ...]
    detector_spec: DetectorSpec
    seed: int = 0
    noise_eta: float | None = None  # None = config default
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model_type not in DEFAULT_CONFIGS:
            raise InvalidInput("unknown model type", model_type=self.model_type)
        if self.mode not in (MODE_PREVIEW, MODE_FULL):
            raise InvalidInput("mode must be preview or full", mode=self.mode)
        if not self.signal_ids:
            raise InvalidInput("signal_ids must be non-empty")
        univariate = len(self.signal_ids) == 1
        if univariate != (self.detector_spec.flow == FLOW_UV):
            raise InvalidInput("signal count must match detector flow")


@dataclass(frozen=True)
class TrainResult:
    model: object
    artifact_ref: str
    temporary: bool
    mode: str
    trained_rows: int
    train_start_ts: int
    train_end_ts: int
    preview: dict


def _slice_mode(window: SeriesWindow, mode: str) -> SeriesWindow:
    end = int(window.timestamps[-1])
    span = PREVIEW_WINDOW_MS if mode == MODE_PREVIEW else FULL_WINDOW_MS
    mask = window.timestamps > end - span
    if mask.all():
        return window
    return SeriesWindow(window.signal_id, window.timestamps[mask],
                        window.values[mask], step_ms=window.step_ms)


def _align_matrix(windows: list[SeriesWindow]) -> MatrixWindow:
    """Inner-join signal windows on shared timestamps."""
    common = windows[0].timestamps
    for w in windows[1:]:
        common = np.intersect1d(common, w.timestamps)
    if common.size == 0:
        raise InsufficientData("signals share no timestamps")
    cols = []
    for w in windows:
        idx = np.searchsorted(w.timestamps, common)
        cols.append(w.values[idx])
    return MatrixWindow([w.signal_id for w in windows], common,
                        np.column_stack(cols), step_ms=windows[0].step_ms)


def _summaries(windows: list[SeriesWindow]) -> dict:
    return {w.signal_id: summarize(w.values).to_dict() for w in windows}


def train_job(request: TrainRequest, datasets: dict, artifact_store,
              now_ms: int, config: ModelConfig | None = None) -> TrainResult:
    """Fit one model from snapshot datasets and persist its artifact.

    `datasets` maps signal_id to its full snapshot SeriesWindow; the mode
    decides how much of each is used (preview: trailing 3 days; full: up
    to 21 days, at least the configured minimum).
    """
    config = config or DEFAULT_CONFIGS[request.model_type]
    missing = [s for s in request.signal_ids if s not in datasets]
    if missing:
        raise InsufficientData("missing datasets for signals", signals=missing)
    slices = [_slice_mode(datasets[s], request.mode) for s in request.signal_ids]
    rows = min(len(s) for s in slices)
    if request.mode == MODE_FULL and rows < config.min_training_length:
        raise InsufficientData(
            "dataset shorter than the configured full-training minimum",
            rows=rows, required=config.min_training_length)

    eta = request.noise_eta
    if eta is None:
        eta = config.params.get("noise_eta", 0.0)
    params = {**config.params, **request.params}
    spec = request.detector_spec

    if request.model_type == "arima_uv":
        window = slices[0]
        fit_values = window.values
        seasonal_note = None
        if spec.seasonality_period is not None:
            _, resid = mediff_extract(window, spec.seasonality_period)
            fit_values = resid
            seasonal_note = spec.seasonality_period
        fit_values = inject_noise(fit_values, eta, request.seed)
        fit_window = SeriesWindow(window.signal_id, window.timestamps,
                                  fit_values, step_ms=window.step_ms)
        model = arima_fit(fit_window,
                          orders=params.get("orders"),
                          seed=request.seed,
                          iqr_multiplier=params.get("iqr_multiplier", 3.0))
        model.train_summary = {
            "signals": _summaries(slices),
            "mode": request.mode,
            "rows": int(len(window)),
            "trained_at": int(now_ms),
            "seasonality_period": seasonal_note,
        }
        preview = _uv_preview(model, window, spec)
    else:
        matrix = _align_matrix(slices)
        data = matrix.values
        if eta:
            data = np.column_stack([
                inject_noise(data[:, j], eta, request.seed + j)
                for j in range(data.shape[1])])
        model = iforest_fit(data,
                            num_trees=params.get("num_trees", 100),
                            subsample_n=params.get("subsample_n", 256),
                            seed=request.seed,
                            contamination=params.get("contamination", 0.01),
                            feature_names=list(matrix.signal_ids))
        model.train_summary = {
            "signals": _summaries(slices),
            "mode": request.mode,
            "rows": int(len(matrix)),
            "trained_at": int(now_ms),
        }
        preview = _mv_preview(model, matrix, spec)

    blob = serialize_model(model, created_ts=int(now_ms),
                           config={"mode": request.mode,
                                   "temporary": request.mode == MODE_PREVIEW,
                                   "signal_ids": list(request.signal_ids),
                                   "detector_spec": spec.to_dict()})
    ref = artifact_store.save(blob)
    first = min(int(s.timestamps[0]) for s in slices)
    last = max(int(s.timestamps[-1]) for s in slices)
    return TrainResult(model=model, artifact_ref=ref,
                       temporary=request.mode == MODE_PREVIEW,
                       mode=request.mode, trained_rows=rows,
                       train_start_ts=first, train_end_ts=last,
                       preview=preview)


def _decimate_idx(n: int, cap: int = 720) -> np.ndarray:
    if n <= cap:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, cap).astype(int))


def _uv_preview(model, window: SeriesWindow, spec: DetectorSpec) -> dict:
    """Original vs model-predicted series with per-point flags."""
    values = window.values
    if spec.seasonality_period is not None:
        profile, resid = mediff_extract(window, spec.seasonality_period)
        seasonal = np.array([profile.expected(i) for i in range(len(values))])
        scored = resid
    else:
        seasonal = np.zeros(len(values))
        scored = values
    predicted = seasonal + model.predicted_values(scored)
    errors = model.residuals(scored)
    offset = len(values) - len(errors)
    flags = np.zeros(len(values), dtype=bool)
    # same bounds the detector will apply, so threshold edits show up here
    lower, upper = effective_uv_bounds(spec, model.resid_boundary)
    flags[offset:] = (errors < lower) | (errors > upper)
    idx = _decimate_idx(len(values))
    return {
        "kind": "univariate",
        "signal_id": window.signal_id,
        "timestamps": [int(window.timestamps[i]) for i in idx],
        "original": [float(values[i]) for i in idx],
        "predicted": [float(predicted[i]) for i in idx],
        "flagged": [bool(flags[i]) for i in idx],
        "flagged_count": int(flags.sum()),
    }


def _mv_preview(model, matrix: MatrixWindow, spec: DetectorSpec) -> dict:
    scores = model.score(matrix.values)
    boundary = effective_mv_boundary(spec, model.score_boundary.upper)
    flags = scores > boundary
    idx = _decimate_idx(len(matrix))
    return {
        "kind": "multivariate",
        "signal_ids": list(matrix.signal_ids),
        "timestamps": [int(matrix.timestamps[i]) for i in idx],
        "signals": {sid: [float(matrix.values[i, j]) for i in idx]
                    for j, sid in enumerate(matrix.signal_ids)},
        "scores": [float(scores[i]) for i in idx],
        "score_boundary": float(boundary),
        "flagged": [bool(flags[i]) for i in idx],
        "flagged_count": int(flags.sum()),
    }
