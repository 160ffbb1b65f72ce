"""Training jobs: mode slicing, minimum-data gates, summaries, determinism."""

import numpy as np
import pytest

from vigil.detect import DetectorSpec, FLOW_MV
from vigil.drift import DistributionSummary
from vigil.errors import InsufficientData, InvalidInput
from vigil.models import deserialize_model
from vigil.store import ArtifactStore, ModelConfig
from vigil.synth import seasonal_series
from vigil.timeseries import SeriesWindow
from vigil.training import (
    MODE_FULL,
    MODE_PREVIEW,
    TrainRequest,
    train_job,
)

MINUTE = 60_000
NOW = 1_700_000_000_000


@pytest.fixture
def artifacts(tmp_path):
    return ArtifactStore(tmp_path / "artifacts")


def flat_window(signal_id: str, n: int, seed: int = 0,
                level: float = 100.0) -> SeriesWindow:
    rng = np.random.default_rng(seed)
    ts = MINUTE * np.arange(1, n + 1, dtype=np.int64)
    return SeriesWindow(signal_id, ts, level + rng.normal(0, 2.0, n))


SMALL_UV = ModelConfig(model_type="arima_uv", min_training_length=120,
                       min_prediction_step=60,
                       params={"iqr_multiplier": 3.0, "noise_eta": 0.05})
SMALL_MV = ModelConfig(model_type="iforest_mv", min_training_length=120,
                       min_prediction_step=60,
                       params={"num_trees": 50, "subsample_n": 128,
                               "contamination": 0.01, "noise_eta": 0.0})


class TestRequestValidation:
    def test_unknown_model_type(self):
        with pytest.raises(InvalidInput):
            TrainRequest("prophet", MODE_FULL, ("s1",), DetectorSpec())

    def test_bad_mode(self):
        with pytest.raises(InvalidInput):
            TrainRequest("arima_uv", "fast", ("s1",), DetectorSpec())

    def test_empty_signals(self):
        with pytest.raises(InvalidInput):
            TrainRequest("arima_uv", MODE_FULL, (), DetectorSpec())

    def test_flow_count_mismatch(self):
        with pytest.raises(InvalidInput):
            TrainRequest("iforest_mv", MODE_FULL, ("a", "b"), DetectorSpec())
        with pytest.raises(InvalidInput):
            TrainRequest("arima_uv", MODE_FULL, ("a",),
                         DetectorSpec(flow=FLOW_MV))


class TestDataGates:
    def test_missing_dataset(self, artifacts):
        req = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec())
        with pytest.raises(InsufficientData):
            train_job(req, {}, artifacts, NOW)

    def test_full_below_minimum(self, artifacts):
        req = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec())
        datasets = {"s1": seasonal_series(days=2, signal_id="s1")}
        with pytest.raises(InsufficientData):
            train_job(req, datasets, artifacts, NOW)  # 2 days < 7-day default

    def test_preview_ignores_full_minimum(self, artifacts):
        req = TrainRequest("arima_uv", MODE_PREVIEW, ("s1",), DetectorSpec())
        datasets = {"s1": flat_window("s1", 600)}
        result = train_job(req, datasets, artifacts, NOW)
        assert result.temporary
        assert result.trained_rows == 600


class TestUnivariate:
    def test_preview_uses_trailing_3_days(self, artifacts):
        datasets = {"s1": seasonal_series(days=8, seed=1, signal_id="s1")}
        req = TrainRequest("arima_uv", MODE_PREVIEW, ("s1",),
                           DetectorSpec(seasonality_period=1440))
        result = train_job(req, datasets, artifacts, NOW)
        assert result.trained_rows == 3 * 1440
        assert result.temporary
        assert result.mode == MODE_PREVIEW
        span = result.train_end_ts - result.train_start_ts
        assert span == (3 * 1440 - 1) * MINUTE

    def test_full_keeps_everything_under_21_days(self, artifacts):
        datasets = {"s1": flat_window("s1", 7 * 1440)}
        req = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec())
        result = train_job(req, datasets, artifacts, NOW)
        assert result.trained_rows == 7 * 1440
        assert not result.temporary

    def test_artifact_round_trip(self, artifacts):
        datasets = {"s1": flat_window("s1", 300)}
        req = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec())
        result = train_job(req, datasets, artifacts, NOW, config=SMALL_UV)
        model, envelope = deserialize_model(artifacts.load(result.artifact_ref))
        assert envelope["config"]["mode"] == MODE_FULL
        assert envelope["config"]["temporary"] is False
        assert envelope["config"]["signal_ids"] == ["s1"]
        assert model.train_summary["rows"] == 300

    def test_train_summary_feeds_drift(self, artifacts):
        datasets = {"s1": flat_window("s1", 300)}
        req = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec())
        result = train_job(req, datasets, artifacts, NOW, config=SMALL_UV)
        summary = result.model.train_summary["signals"]["s1"]
        restored = DistributionSummary.from_dict(summary)
        assert restored.sample_count == 300
        assert abs(restored.mean - 100.0) < 1.0

    def test_preview_payload_decimated(self, artifacts):
        datasets = {"s1": flat_window("s1", 3000)}
        req = TrainRequest("arima_uv", MODE_PREVIEW, ("s1",), DetectorSpec())
        result = train_job(req, datasets, artifacts, NOW, config=SMALL_UV)
        p = result.preview
        assert p["kind"] == "univariate"
        assert len(p["timestamps"]) <= 720
        assert len(p["original"]) == len(p["predicted"]) == len(p["flagged"])
        assert p["flagged_count"] >= 0

    def test_deterministic_artifact_ref(self, artifacts):
        datasets = {"s1": flat_window("s1", 300)}
        req = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec(),
                           seed=3)
        a = train_job(req, datasets, artifacts, NOW, config=SMALL_UV)
        b = train_job(req, datasets, artifacts, NOW, config=SMALL_UV)
        assert a.artifact_ref == b.artifact_ref

    def test_noise_changes_artifact(self, artifacts):
        datasets = {"s1": flat_window("s1", 300)}
        quiet = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec(),
                             noise_eta=0.0)
        loud = TrainRequest("arima_uv", MODE_FULL, ("s1",), DetectorSpec(),
                            noise_eta=0.3)
        a = train_job(quiet, datasets, artifacts, NOW, config=SMALL_UV)
        b = train_job(loud, datasets, artifacts, NOW, config=SMALL_UV)
        assert a.artifact_ref != b.artifact_ref


class TestMultivariate:
    def make_request(self, spec=None):
        return TrainRequest("iforest_mv", MODE_FULL, ("a", "b"),
                            spec or DetectorSpec(flow=FLOW_MV))

    def test_trains_on_aligned_rows(self, artifacts):
        datasets = {"a": flat_window("a", 400, seed=1),
                    "b": flat_window("b", 400, seed=2)}
        result = train_job(self.make_request(), datasets, artifacts, NOW,
                           config=SMALL_MV)
        assert result.trained_rows == 400
        assert result.model.feature_names == ("a", "b")
        assert result.preview["kind"] == "multivariate"
        assert 0.0 < result.preview["score_boundary"] < 1.0

    def test_inner_join_on_timestamps(self, artifacts):
        a = flat_window("a", 400, seed=1)
        ts_b = a.timestamps[50:]
        rng = np.random.default_rng(3)
        b = SeriesWindow("b", ts_b, 5.0 + rng.normal(0, 1.0, len(ts_b)))
        result = train_job(self.make_request(), {"a": a, "b": b},
                           artifacts, NOW, config=SMALL_MV)
        assert result.trained_rows == 350

    def test_disjoint_timestamps_rejected(self, artifacts):
        a = flat_window("a", 200, seed=1)
        b = SeriesWindow("b", a.timestamps + 7, np.ones(200))
        with pytest.raises(InsufficientData):
            train_job(self.make_request(), {"a": a, "b": b}, artifacts, NOW,
                      config=SMALL_MV)

    def test_summary_per_signal(self, artifacts):
        datasets = {"a": flat_window("a", 300, seed=1, level=10.0),
                    "b": flat_window("b", 300, seed=2, level=500.0)}
        result = train_job(self.make_request(), datasets, artifacts, NOW,
                           config=SMALL_MV)
        signals = result.model.train_summary["signals"]
        assert set(signals) == {"a", "b"}
        assert abs(signals["a"]["mean"] - 10.0) < 1.0
        assert abs(signals["b"]["mean"] - 500.0) < 2.0
