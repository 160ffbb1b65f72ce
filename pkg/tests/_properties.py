"""Detection pipeline property checks shared by the unit and acceptance
suites; each check is one hypothesis-driven invariant."""

import numpy as np

from vigil.detect import DetectorSpec, detect
from vigil.timeseries import Boundary, SeriesWindow


class IdentityUVModel:
    """Stub whose residuals are the values themselves; boundary [-1, 1]."""

    flow = "univariate"
    d = 0
    model_type = "stub_uv"
    resid_boundary = Boundary(-1.0, 1.0, "iqr", {})

    def residuals(self, values):
        return np.asarray(values, dtype=float)


class PoisonedModel:
    """Fails the test if the pipeline touches it."""

    flow = "univariate"

    def __getattr__(self, name):
        if name == "flow":
            return "univariate"
        raise AssertionError(f"model invoked via {name} despite rule verdict")


def make_window(values):
    values = np.asarray(values, dtype=float)
    ts = (np.arange(len(values)) + 1) * 60_000
    return SeriesWindow("prop", ts, values)


def check_hold_monotonicity(values, hold_window, k_low, k_high, alpha):
    """is_anomaly at k_high implies is_anomaly at k_low <= k_high."""
    window = make_window(values)
    model = IdentityUVModel()
    low = detect(DetectorSpec(hold_window=hold_window, hold_tolerance=k_low,
                              smoothing_alpha=alpha), window, model)
    high = detect(DetectorSpec(hold_window=hold_window, hold_tolerance=k_high,
                               smoothing_alpha=alpha), window, model)
    if high.is_anomaly:
        assert low.is_anomaly


def check_transient_suppression(n, pos, hold_window, k, alpha):
    """One isolated outlier, alpha <= 0.5, k >= 1: never an anomaly."""
    values = np.zeros(n)
    values[pos] = 5.0
    spec = DetectorSpec(hold_window=hold_window, hold_tolerance=k,
                        smoothing_alpha=alpha)
    verdict = detect(spec, make_window(values), IdentityUVModel())
    assert not verdict.is_anomaly


def check_rule_dominance(values, static_upper, hold_window, k):
    """With breaches > k the verdict ignores the model entirely."""
    spec = DetectorSpec(static_upper=static_upper, hold_window=hold_window,
                        hold_tolerance=k)
    window = make_window(values)
    breaches = int(np.sum(np.asarray(values) > static_upper))
    if breaches <= k:
        return
    with_model = detect(spec, window, IdentityUVModel())
    without = detect(spec, window, PoisonedModel())
    assert with_model == without
    assert with_model.triggered_by == "rule"
    assert with_model.is_anomaly


def check_determinism(values, hold_window, k, alpha, static_upper):
    spec = DetectorSpec(static_upper=static_upper, hold_window=hold_window,
                        hold_tolerance=k, smoothing_alpha=alpha)
    window = make_window(values)
    model = IdentityUVModel()
    assert detect(spec, window, model) == detect(spec, window, model)


def check_uv_one_sidedness(values, spike_threshold, hold_window):
    """Only spike_threshold configured: all-negative residuals never flag."""
    values = -np.abs(np.asarray(values, dtype=float))
    spec = DetectorSpec(spike_threshold=spike_threshold,
                        hold_window=hold_window, hold_tolerance=0,
                        smoothing_alpha=1.0)
    verdict = detect(spec, make_window(values), IdentityUVModel())
    assert not verdict.is_anomaly
    assert not any(verdict.raw_scores)


def check_verdict_invariant(values, static_upper, hold_window, k, alpha):
    """is_anomaly always decomposes by trigger path and strict count > k."""
    spec = DetectorSpec(static_upper=static_upper, hold_window=hold_window,
                        hold_tolerance=k, smoothing_alpha=alpha)
    verdict = detect(spec, make_window(values), IdentityUVModel())
    if verdict.triggered_by == "rule":
        assert verdict.is_anomaly == (verdict.breach_count > k)
    else:
        assert verdict.is_anomaly == (verdict.anomaly_count > k)
