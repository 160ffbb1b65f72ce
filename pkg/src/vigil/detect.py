"""Detection pipeline: rule safety net, model scoring, smoothing, verdict.

Per window the order is fixed: count static-threshold breaches first and,
when they exceed the hold tolerance, return a rule verdict without ever
invoking the model. Otherwise score the window with the configured model
(seasonal removal first when a period is set), binarize the per-point
scores, smooth them exponentially, and apply the hold tolerance to the
smoothed flags of the last L points.

Smoothing runs with a healthy zero-valued sentinel prepended (dropped from
the output), i.e. the smoother starts from rest state rather than from the
first flag. A window that opens on a single anomalous point therefore
carries smoothed weight alpha, not 1, and one transient can never produce
two flagged points; without the sentinel the suppression guarantee would
fail exactly at the window edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, InvalidInput, ModelUnavailable
from .models.attribution import AttributionReport, attribute
from .timeseries import MatrixWindow, SeriesWindow, exp_smooth, mediff_extract

FLOW_UV = "univariate"
FLOW_MV = "multivariate"

DEFAULT_HOLD_WINDOW = 5
DEFAULT_HOLD_TOLERANCE = 1
DEFAULT_SMOOTHING_ALPHA = 0.6
DEFAULT_SENSITIVITY = 1.0

SMOOTHED_FLAG_THRESHOLD = 0.5


@dataclass(frozen=True)
class DetectorSpec:
    """Per-model detection configuration."""

    flow: str = FLOW_UV
    model_ref: tuple[str, int] | None = None
    static_upper: float | None = None
    static_lower: float | None = None
    hold_window: int = DEFAULT_HOLD_WINDOW
    hold_tolerance: int = DEFAULT_HOLD_TOLERANCE
    smoothing_alpha: float = DEFAULT_SMOOTHING_ALPHA
    seasonality_period: int | None = None
    spike_threshold: float | None = None
    drop_threshold: float | None = None
    sensitivity: float = DEFAULT_SENSITIVITY

    def __post_init__(self):
        if self.flow not in (FLOW_UV, FLOW_MV):
            raise InvalidInput("unknown flow", flow=self.flow)
        if self.hold_window < 1:
            raise InvalidInput("hold_window must be positive",
                               hold_window=self.hold_window)
        if not 0 <= self.hold_tolerance < self.hold_window:
            raise InvalidInput("hold_tolerance must satisfy 0 <= k < L",
                               hold_tolerance=self.hold_tolerance,
                               hold_window=self.hold_window)
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise InvalidInput("smoothing_alpha must be in (0, 1]",
                               alpha=self.smoothing_alpha)
        if not 0.0 < self.sensitivity <= 1.0:
            raise InvalidInput("sensitivity must be in (0, 1]",
                               sensitivity=self.sensitivity)
        if self.seasonality_period is not None:
            if self.seasonality_period < 1:
                raise InvalidInput("seasonality_period must be positive",
                                   period=self.seasonality_period)
            if self.flow != FLOW_UV:
                raise InvalidInput("seasonal removal applies to the "
                                   "univariate flow only")
        if (self.static_upper is not None and self.static_lower is not None
                and self.static_lower > self.static_upper):
            raise InvalidInput("static_lower must not exceed static_upper")

    def to_dict(self) -> dict:
        return {
            "flow": self.flow,
            "model_ref": list(self.model_ref) if self.model_ref else None,
            "static_upper": self.static_upper,
            "static_lower": self.static_lower,
            "hold_window": self.hold_window,
            "hold_tolerance": self.hold_tolerance,
            "smoothing_alpha": self.smoothing_alpha,
            "seasonality_period": self.seasonality_period,
            "spike_threshold": self.spike_threshold,
            "drop_threshold": self.drop_threshold,
            "sensitivity": self.sensitivity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorSpec":
        ref = data.get("model_ref")
        return cls(
            flow=data.get("flow", FLOW_UV),
            model_ref=(ref[0], int(ref[1])) if ref else None,
            static_upper=data.get("static_upper"),
            static_lower=data.get("static_lower"),
            hold_window=data.get("hold_window", DEFAULT_HOLD_WINDOW),
            hold_tolerance=data.get("hold_tolerance", DEFAULT_HOLD_TOLERANCE),
            smoothing_alpha=data.get("smoothing_alpha",
                                     DEFAULT_SMOOTHING_ALPHA),
            seasonality_period=data.get("seasonality_period"),
            spike_threshold=data.get("spike_threshold"),
            drop_threshold=data.get("drop_threshold"),
            sensitivity=data.get("sensitivity", DEFAULT_SENSITIVITY),
        )


@dataclass(frozen=True)
class Verdict:
    is_anomaly: bool
    triggered_by: str  # "rule" or "model"
    raw_scores: tuple[float, ...]
    smoothed_scores: tuple[float, ...]
    breach_count: int
    anomaly_count: int
    attribution: AttributionReport | None = None
    predicted_value: float | None = None
    model_scores: tuple[float, ...] = field(default=())

    def flagged_indexes(self) -> list[int]:
        """Window positions whose smoothed flag crossed the threshold."""
        return [i for i, s in enumerate(self.smoothed_scores)
                if s >= SMOOTHED_FLAG_THRESHOLD]


def _breach_mask(window, spec: DetectorSpec) -> np.ndarray:
    values = window.values
    mask = np.zeros(values.shape, dtype=bool)
    if spec.static_upper is not None:
        mask |= values > spec.static_upper
    if spec.static_lower is not None:
        mask |= values < spec.static_lower
    if mask.ndim == 2:
        mask = mask.any(axis=1)
    return mask


def static_breach_count(window, spec: DetectorSpec) -> int:
    """Points violating a configured static threshold; 0 when none are set.

    On matrix windows a point breaches when any of its signals does.
    """
    if spec.static_upper is None and spec.static_lower is None:
        return 0
    return int(_breach_mask(window, spec).sum())


def apply_hold_tolerance(flags, k: int) -> bool:
    """True iff the number of anomalous entries strictly exceeds k."""
    if k < 0:
        raise InvalidInput("hold tolerance must be non-negative", k=k)
    return sum(1 for f in flags if f) > k


def _smooth_flags(raw: np.ndarray, alpha: float) -> np.ndarray:
    # healthy sentinel: see module docstring
    return exp_smooth(np.concatenate(([0.0], raw)), alpha)[1:]


def effective_uv_bounds(spec: DetectorSpec, boundary) -> tuple[float, float]:
    """Residual bounds after spike/drop overrides.

    Setting either threshold replaces the trained boundary one-sidedly:
    the unset side flags nothing.
    """
    lower, upper = boundary.lower, boundary.upper
    if spec.spike_threshold is not None or spec.drop_threshold is not None:
        upper = (spec.spike_threshold if spec.spike_threshold is not None
                 else np.inf)
        lower = (spec.drop_threshold if spec.drop_threshold is not None
                 else -np.inf)
    return lower, upper


def effective_mv_boundary(spec: DetectorSpec, upper: float) -> float:
    # sensitivity 1 keeps the trained boundary; lower values widen it
    # toward 1.0 so fewer points flag
    return upper + (1.0 - spec.sensitivity) * (1.0 - upper)


def _uv_scores(spec: DetectorSpec, window: SeriesWindow,
               model) -> tuple[np.ndarray, np.ndarray, float]:
    """Raw binary flags, prediction errors, predicted last value."""
    values = window.values
    seasonal_expected = 0.0
    if spec.seasonality_period is not None:
        profile, residuals = mediff_extract(window, spec.seasonality_period)
        seasonal_expected = profile.expected(len(values) - 1)
        series = residuals
    else:
        series = values

    errors = model.residuals(series)
    lower, upper = effective_uv_bounds(spec, model.resid_boundary)
    breach = (errors > upper) | (errors < lower)

    flags = np.zeros(len(values))
    offset = len(values) - len(errors)  # differenced points carry no flag
    flags[offset:] = breach.astype(float)
    predicted = float(seasonal_expected + (series[-1] - errors[-1]))
    return flags, errors, predicted


def _mv_scores(spec: DetectorSpec, window: MatrixWindow,
               model) -> tuple[np.ndarray, np.ndarray]:
    """Raw binary flags and continuous forest scores."""
    scores = model.score(window.values)
    effective_upper = effective_mv_boundary(spec, model.score_boundary.upper)
    return (scores > effective_upper).astype(float), scores


def detect(spec: DetectorSpec, window, model) -> Verdict:
    """Run the full pipeline on one window and return the verdict."""
    if model is None:
        raise ModelUnavailable("model artifact missing",
                               model_ref=list(spec.model_ref or ()))
    n = len(window)
    if n < spec.hold_window:
        raise InsufficientData("window shorter than the hold window",
                               n=n, hold_window=spec.hold_window)
    is_matrix = isinstance(window, MatrixWindow)
    if spec.flow == FLOW_MV and not is_matrix:
        raise InvalidInput("multivariate flow needs a matrix window")
    if spec.flow == FLOW_UV and is_matrix:
        raise InvalidInput("univariate flow needs a series window")
    if getattr(model, "flow", spec.flow) != spec.flow:
        raise InvalidInput("model flow does not match the spec",
                           model_flow=model.flow, spec_flow=spec.flow)

    k = spec.hold_tolerance
    breaches = static_breach_count(window, spec)
    if breaches > k:
        mask = _breach_mask(window, spec)
        return Verdict(
            is_anomaly=True,
            triggered_by="rule",
            raw_scores=tuple(mask.astype(float)),
            smoothed_scores=(),
            breach_count=breaches,
            anomaly_count=0,
        )

    attribution = None
    predicted = None
    if spec.flow == FLOW_UV:
        raw, model_out, predicted = _uv_scores(spec, window, model)
    else:
        raw, model_out = _mv_scores(spec, window, model)

    smoothed = _smooth_flags(raw, spec.smoothing_alpha)
    hold = smoothed[-spec.hold_window:] >= SMOOTHED_FLAG_THRESHOLD
    anomaly_count = int(hold.sum())
    is_anomaly = apply_hold_tolerance(hold, k)

    if is_anomaly and spec.flow == FLOW_MV:
        attribution = attribute(model, window.values[-1])

    return Verdict(
        is_anomaly=is_anomaly,
        triggered_by="model",
        raw_scores=tuple(raw),
        smoothed_scores=tuple(smoothed),
        breach_count=breaches,
        anomaly_count=anomaly_count,
        attribution=attribution,
        predicted_value=predicted,
        model_scores=tuple(float(s) for s in model_out),
    )
