"""Selector grammar, metric store, and durable store contracts."""

import hashlib
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vigil.detect import DetectorSpec, FLOW_MV, FLOW_UV
from vigil.drift import (
    DriftReport,
    PROPOSAL_APPROVED,
    RetrainProposal,
)
from vigil.errors import (
    Conflict,
    InvalidInput,
    InvalidQuery,
    InvalidState,
    NotFound,
    SourceUnavailable,
)
from vigil.metrics import MetricStore, format_series
from vigil.selector import parse_selector
from vigil.store import (
    DAY_MS,
    JsonlLog,
    MODEL_STATUS_ACTIVE,
    MODEL_STATUS_PAUSED,
    SNAPSHOT_HORIZON_MS,
    Stores,
)
from vigil.timeseries import SeriesWindow

BASE = 20_000 * DAY_MS  # an arbitrary UTC midnight
MIN = 60_000


# -- selector ----------------------------------------------------------------


class TestSelector:
    def test_plain_name(self):
        sel = parse_selector("http_requests_total")
        assert sel.metric_name == "http_requests_total"
        assert sel.labels == ()

    def test_labels_parsed_and_sorted(self):
        sel = parse_selector('cpu{zone="b",host="a"}')
        assert sel.labels == (("host", "a"), ("zone", "b"))

    def test_escaped_quote_in_value(self):
        sel = parse_selector('m{msg="say \\"hi\\""}')
        assert sel.labels == (("msg", 'say "hi"'),)

    def test_matches_requires_all_selector_labels(self):
        sel = parse_selector('cpu{host="a"}')
        assert sel.matches("cpu", {"host": "a", "zone": "b"})
        assert not sel.matches("cpu", {"zone": "b"})
        assert not sel.matches("mem", {"host": "a"})

    def test_empty_label_block_ok(self):
        assert parse_selector("cpu{}").labels == ()

    @pytest.mark.parametrize("expr", [
        "{{", "", "   ", "cpu{", "cpu}", 'cpu{a=b}', 'cpu{a="b"',
        'cpu{a="b}', 'cpu{="b"}', 'cpu{a="b",}', 'cpu{a="b" extra',
        'cpu{a="1",a="2"}', "1cpu", 'cpu{9bad="x"}', 'cpu{a="b"}trail',
    ])
    def test_malformed_rejected(self, expr):
        with pytest.raises(InvalidQuery):
            parse_selector(expr)

    def test_round_trip_via_str(self):
        sel = parse_selector('cpu{host="a",zone="b"}')
        assert parse_selector(str(sel)) == sel


# -- metric store -------------------------------------------------------------


class TestMetricStore:
    def test_append_and_latest(self):
        ms = MetricStore()
        ms.append("cpu", 1.0, BASE, {"host": "a"})
        ms.append("cpu", 2.0, BASE + MIN, {"host": "a"})
        rows = ms.latest('cpu{host="a"}')
        assert rows == [("cpu", (("host", "a"),), BASE + MIN, 2.0)]

    def test_per_series_monotonic_timestamps(self):
        ms = MetricStore()
        ms.append("cpu", 1.0, BASE, {"host": "a"})
        with pytest.raises(InvalidInput):
            ms.append("cpu", 2.0, BASE, {"host": "a"})
        # a different series is independent
        ms.append("cpu", 2.0, BASE, {"host": "b"})

    def test_non_finite_rejected(self):
        ms = MetricStore()
        with pytest.raises(InvalidInput):
            ms.append("cpu", float("nan"), BASE)

    def test_query_range_last_value_within_step(self):
        ms = MetricStore()
        # raw samples at +10s and +70s; minutely instants at BASE+60s, +120s
        ms.append("cpu", 1.0, BASE + 10_000)
        ms.append("cpu", 2.0, BASE + 70_000)
        out = ms.query_range("cpu", BASE + MIN, BASE + 3 * MIN, MIN)
        assert len(out) == 1
        r = out[0]
        # instant BASE+60s covers (BASE, BASE+60s]: sample at +10s
        # instant BASE+120s covers (+60s, +120s]: sample at +70s
        # instant BASE+180s has no raw sample in window: omitted
        assert r.timestamps == (BASE + MIN, BASE + 2 * MIN)
        assert r.values == (1.0, 2.0)

    def test_query_range_picks_last_of_multiple_in_step(self):
        ms = MetricStore()
        ms.append("cpu", 1.0, BASE + 1_000)
        ms.append("cpu", 5.0, BASE + 59_000)
        out = ms.query_range("cpu", BASE + MIN, BASE + MIN, MIN)
        assert out[0].values == (5.0,)

    def test_window_gap_fill_repeats_last_value(self):
        ms = MetricStore()
        ms.append("sig", 1.0, BASE + MIN)
        ms.append("sig", 3.0, BASE + 3 * MIN)  # no sample at +2min
        w = ms.window("sig", BASE + 3 * MIN, points=3, step_ms=MIN)
        assert list(w.values) == [1.0, 1.0, 3.0]
        assert list(w.timestamps) == [BASE + MIN, BASE + 2 * MIN, BASE + 3 * MIN]

    def test_window_none_when_empty(self):
        ms = MetricStore()
        assert ms.window("sig", BASE, points=5, step_ms=MIN) is None

    def test_exposition_sorted_name_then_labels(self):
        ms = MetricStore()
        ms.append("b_metric", 2.0, BASE + 1)
        ms.append("a_metric", 1.5, BASE, {"z": "1"})
        ms.append("a_metric", 1.0, BASE, {"a": "1"})
        text = ms.render_exposition(BASE + 10)
        lines = text.strip().split("\n")
        assert lines == [
            f'a_metric{{a="1"}} 1.0 {BASE}',
            f'a_metric{{z="1"}} 1.5 {BASE}',
            f'b_metric 2.0 {BASE + 1}',
        ]

    def test_retention_prunes_old_samples(self):
        ms = MetricStore(retention_ms=2 * DAY_MS)
        # 4 days of hourly data: anything older than 2 days behind the
        # newest sample is eventually dropped
        for h in range(4 * 24 + 1):
            ms.append("cpu", float(h), BASE + h * 3_600_000)
        rows = ms.latest("cpu")
        assert rows[0][3] == float(4 * 24)
        out = ms.query_range("cpu", BASE, BASE + 4 * DAY_MS, 3_600_000)
        assert out[0].timestamps[0] >= BASE + DAY_MS  # old head gone

    def test_format_series_escaping(self):
        assert format_series("m", (("k", 'v"x'),)) == 'm{k="v\\"x"}'


# -- jsonl log ----------------------------------------------------------------


class TestJsonlLog:
    def test_torn_tail_line_ignored(self, tmp_path):
        log = JsonlLog(tmp_path / "x.jsonl")
        log.append({"op": "a"})
        log.append({"op": "b"})
        raw = (tmp_path / "x.jsonl").read_bytes()
        (tmp_path / "x.jsonl").write_bytes(raw[:-5])  # crash mid-write
        ops = [r["op"] for r in JsonlLog(tmp_path / "x.jsonl").replay()]
        assert ops == ["a"]

    def test_mid_file_corruption_raises(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text('{"op":"a"}\ngarbage\n{"op":"b"}\n')
        with pytest.raises(InvalidState):
            JsonlLog(path).replay()

    def test_rewrite_replaces_content(self, tmp_path):
        log = JsonlLog(tmp_path / "x.jsonl")
        for i in range(5):
            log.append({"op": "put", "i": i})
        log.rewrite([{"op": "put", "i": 99}])
        records = JsonlLog(tmp_path / "x.jsonl").replay()
        assert [r["i"] for r in records] == [99]


# -- store fixtures -----------------------------------------------------------


def uv_spec(**kw) -> DetectorSpec:
    return DetectorSpec(flow=FLOW_UV, **kw)


def mv_spec(**kw) -> DetectorSpec:
    return DetectorSpec(flow=FLOW_MV, **kw)


@pytest.fixture
def stores(tmp_path):
    return Stores(tmp_path / "data")


def seeded_signal(stores, name="cpu_total", expr='cpu{host="a"}'):
    return stores.signals.register(name, expr, BASE)


def seeded_artifact(stores, blob=b"model-bytes"):
    return stores.artifacts.save(blob)


# -- signal store -------------------------------------------------------------


class TestSignalStore:
    def test_register_and_get(self, stores):
        rec = seeded_signal(stores)
        assert stores.signals.get(rec.signal_id) == rec
        assert stores.signals.get_by_name("cpu_total") == rec
        assert rec.last_snapshot_at is None

    def test_duplicate_name_conflicts(self, stores):
        seeded_signal(stores)
        with pytest.raises(Conflict):
            seeded_signal(stores)

    def test_malformed_selector_rejected(self, stores):
        with pytest.raises(InvalidQuery):
            stores.signals.register("bad", "{{", BASE)

    def test_delete_then_get_not_found(self, stores):
        rec = seeded_signal(stores)
        stores.signals.delete(rec.signal_id)
        with pytest.raises(NotFound):
            stores.signals.get(rec.signal_id)
        # name freed for reuse
        seeded_signal(stores)

    def test_rename_frees_old_name(self, stores):
        rec = seeded_signal(stores)
        stores.signals.update(replace(rec, name="renamed"))
        assert stores.signals.get_by_name("renamed").signal_id == rec.signal_id
        with pytest.raises(NotFound):
            stores.signals.get_by_name("cpu_total")
        seeded_signal(stores)  # old name reusable

    def test_rename_onto_taken_name_conflicts(self, stores):
        rec = seeded_signal(stores)
        other = seeded_signal(stores, name="mem_total")
        with pytest.raises(Conflict):
            stores.signals.update(replace(other, name="cpu_total"))
        # losing update must not corrupt the index
        assert stores.signals.get_by_name("cpu_total") == rec
        assert stores.signals.get_by_name("mem_total") == other

    def test_update_validates_selector(self, stores):
        rec = seeded_signal(stores)
        with pytest.raises(InvalidQuery):
            stores.signals.update(replace(rec, query_expr="{{"))

    def test_reopen_preserves_state(self, stores, tmp_path):
        rec = seeded_signal(stores)
        reopened = Stores(tmp_path / "data")
        assert reopened.signals.get(rec.signal_id) == rec

    def test_compact_preserves_state(self, stores, tmp_path):
        rec = seeded_signal(stores)
        stores.signals.delete(rec.signal_id)
        rec2 = seeded_signal(stores, name="other")
        stores.signals.compact()
        reopened = Stores(tmp_path / "data")
        assert [r.signal_id for r in reopened.signals.list()] == [rec2.signal_id]


# -- model registry -----------------------------------------------------------


class TestModelRegistry:
    def test_register_assigns_version_one(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        rec = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                    uv_spec(), ref, None, BASE)
        assert rec.version == 1
        assert rec.status == MODEL_STATUS_ACTIVE

    def test_version_bump_pauses_previous(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        v1 = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                   uv_spec(), ref, None, BASE)
        v2 = stores.register_model(v1.model_id, "arima_uv", (sig.signal_id,),
                                   uv_spec(), ref, None, BASE + 1)
        assert v2.version == 2
        assert stores.models.get(v1.model_id, 1).status == MODEL_STATUS_PAUSED
        active = stores.models.get_active_models()
        assert [(m.model_id, m.version) for m in active] == [(v1.model_id, 2)]

    def test_scan_returns_each_model_once(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        a = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                  uv_spec(), ref, None, BASE)
        stores.register_model(a.model_id, "arima_uv", (sig.signal_id,),
                              uv_spec(), ref, None, BASE + 1)
        b = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                  uv_spec(), ref, None, BASE + 2)
        ids = [m.model_id for m in stores.models.get_active_models()]
        assert sorted(ids) == sorted([a.model_id, b.model_id])
        assert len(ids) == len(set(ids))

    def test_unknown_signal_ref_rejected(self, stores):
        ref = seeded_artifact(stores)
        with pytest.raises(NotFound):
            stores.register_model(None, "arima_uv", ("sig-missing",),
                                  uv_spec(), ref, None, BASE)

    def test_unknown_artifact_ref_rejected(self, stores):
        sig = seeded_signal(stores)
        with pytest.raises(NotFound):
            stores.register_model(None, "arima_uv", (sig.signal_id,),
                                  uv_spec(), "deadbeef", None, BASE)

    def test_flow_must_match_signal_count(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        with pytest.raises(InvalidInput):
            stores.register_model(None, "iforest_mv", (sig.signal_id,),
                                  mv_spec(), ref, None, BASE)

    def test_pause_and_resume(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        rec = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                    uv_spec(), ref, None, BASE)
        stores.models.set_status(rec.model_id, 1, MODEL_STATUS_PAUSED)
        assert stores.models.get_active_models() == []
        stores.models.set_status(rec.model_id, 1, MODEL_STATUS_ACTIVE)
        assert len(stores.models.get_active_models()) == 1

    def test_activating_old_version_pauses_new(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        v1 = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                   uv_spec(), ref, None, BASE)
        stores.register_model(v1.model_id, "arima_uv", (sig.signal_id,),
                              uv_spec(), ref, None, BASE + 1)
        stores.models.set_status(v1.model_id, 1, MODEL_STATUS_ACTIVE)
        active = stores.models.get_active_models()
        assert [(m.model_id, m.version) for m in active] == [(v1.model_id, 1)]

    def test_delete_is_soft_and_terminal(self, stores):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        rec = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                    uv_spec(), ref, None, BASE)
        stores.models.delete_model(rec.model_id)
        assert stores.models.get_active_models() == []
        # history retained
        assert stores.models.list_versions(rec.model_id)[0].status == "deleted"
        with pytest.raises(InvalidState):
            stores.models.set_status(rec.model_id, 1, MODEL_STATUS_ACTIVE)

    def test_unknown_model_not_found(self, stores):
        with pytest.raises(NotFound):
            stores.models.get("nope")

    def test_reopen_preserves_versions(self, stores, tmp_path):
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        v1 = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                   uv_spec(), ref, None, BASE)
        stores.register_model(v1.model_id, "arima_uv", (sig.signal_id,),
                              uv_spec(), ref, None, BASE + 1)
        reopened = Stores(tmp_path / "data")
        assert len(reopened.models.list_versions(v1.model_id)) == 2
        active = reopened.models.get_active_models()
        assert [(m.model_id, m.version) for m in active] == [(v1.model_id, 2)]


# -- artifacts ----------------------------------------------------------------


class TestArtifactStore:
    def test_round_trip_bit_exact(self, stores):
        blob = bytes(range(256)) * 3
        ref = stores.artifacts.save(blob)
        assert stores.artifacts.load(ref) == blob

    def test_ref_is_sha256_of_bytes(self, stores):
        blob = b"some model"
        assert stores.artifacts.save(blob) == hashlib.sha256(blob).hexdigest()

    def test_save_idempotent(self, stores):
        assert stores.artifacts.save(b"x") == stores.artifacts.save(b"x")

    def test_unknown_ref_not_found(self, stores):
        with pytest.raises(NotFound):
            stores.artifacts.load("0" * 64)


# -- datasets and snapshots ----------------------------------------------------


def _fill_metric_store(days: float, start: int = BASE,
                       expr_name: str = "cpu", labels=None) -> MetricStore:
    ms = MetricStore()
    n = int(days * DAY_MS / MIN)
    ts = start + MIN * np.arange(n + 1, dtype=np.int64)
    rng = np.random.default_rng(7)
    vals = 10.0 + rng.normal(0, 0.1, n + 1)
    ms.append_many(expr_name, ts.tolist(), vals.tolist(), labels or {"host": "a"})
    return ms


class TestDatasetStore:
    def test_write_read_round_trip(self, stores):
        ts = BASE + MIN * np.arange(100, dtype=np.int64)
        vals = np.linspace(0.0, 9.9, 100)
        w = SeriesWindow("sig-1", ts, vals, step_ms=MIN)
        stores.datasets.write(w)
        back = stores.datasets.read("sig-1")
        assert back.signal_id == "sig-1"
        assert back.step_ms == MIN
        np.testing.assert_array_equal(back.timestamps, ts)
        np.testing.assert_array_equal(back.values, vals)

    def test_header_line_format(self, stores, tmp_path):
        ts = BASE + MIN * np.arange(3, dtype=np.int64)
        stores.datasets.write(SeriesWindow("sig-2", ts, [1.0, 2.0, 3.0],
                                           step_ms=MIN))
        lines = (tmp_path / "data" / "datasets" / "sig-2.ds").read_text().splitlines()
        header = json.loads(lines[0])
        assert set(header) == {"signal_id", "step_ms", "start_ts"}
        assert header == {"signal_id": "sig-2", "step_ms": MIN, "start_ts": BASE}
        assert lines[1] == f"{BASE},1.0"

    def test_missing_dataset_not_found(self, stores):
        with pytest.raises(NotFound):
            stores.datasets.read("nope")


class TestSnapshot:
    def test_22_days_trims_to_21(self, stores):
        sig = seeded_signal(stores)
        ms = _fill_metric_store(days=22)
        now = BASE + 22 * DAY_MS + 5 * 3_600_000  # 5am on day 22
        meta = stores.snapshot_signal(sig.signal_id, ms, now)
        w = stores.datasets.read(sig.signal_id)
        span = int(w.timestamps[-1] - w.timestamps[0])
        assert span == SNAPSHOT_HORIZON_MS
        assert meta.short is False
        assert int(w.timestamps[-1]) == BASE + 22 * DAY_MS  # day-aligned end
        assert stores.signals.get(sig.signal_id).last_snapshot_at == now

    def test_same_day_rerun_byte_identical(self, stores, tmp_path):
        sig = seeded_signal(stores)
        ms = _fill_metric_store(days=22)
        path = tmp_path / "data" / "datasets" / f"{sig.signal_id}.ds"
        stores.snapshot_signal(sig.signal_id, ms, BASE + 22 * DAY_MS + 3_600_000)
        first = path.read_bytes()
        stores.snapshot_signal(sig.signal_id, ms, BASE + 22 * DAY_MS + 9 * 3_600_000)
        assert path.read_bytes() == first

    def test_partial_window_flagged_short(self, stores):
        sig = seeded_signal(stores)
        ms = _fill_metric_store(days=5, start=BASE + 17 * DAY_MS)
        meta = stores.snapshot_signal(sig.signal_id, ms, BASE + 22 * DAY_MS + 1)
        assert meta.short is True
        w = stores.datasets.read(sig.signal_id)
        assert int(w.timestamps[-1] - w.timestamps[0]) == 5 * DAY_MS
        assert stores.signals.get(sig.signal_id).last_snapshot_short is True

    def test_source_unavailable_retains_previous(self, stores):
        sig = seeded_signal(stores)
        ms = _fill_metric_store(days=22)
        stores.snapshot_signal(sig.signal_id, ms, BASE + 22 * DAY_MS + 1)
        before = stores.datasets.read(sig.signal_id)
        with pytest.raises(SourceUnavailable):
            stores.snapshot_signal(sig.signal_id, MetricStore(),
                                   BASE + 23 * DAY_MS)
        after = stores.datasets.read(sig.signal_id)
        np.testing.assert_array_equal(after.values, before.values)

    def test_never_exceeds_horizon_plus_step(self, stores):
        sig = seeded_signal(stores)
        ms = _fill_metric_store(days=21.5)
        stores.snapshot_signal(sig.signal_id, ms, BASE + 22 * DAY_MS - 1)
        w = stores.datasets.read(sig.signal_id)
        assert int(w.timestamps[-1] - w.timestamps[0]) <= SNAPSHOT_HORIZON_MS + MIN


# -- alerts --------------------------------------------------------------------


class TestAlertStore:
    def _alert(self, stores, fired_at=BASE, model_id="m1"):
        return stores.alerts.record_alert(model_id, 1, fired_at,
                                          {"is_anomaly": True}, "high")

    def test_record_and_get(self, stores):
        a = self._alert(stores)
        assert stores.alerts.get(a.alert_id).state == "open"

    def test_feedback_set_once(self, stores):
        a = self._alert(stores)
        updated = stores.alerts.record_feedback(a.alert_id, "true_positive",
                                                "ops", BASE + 1)
        assert updated.feedback["outcome"] == "true_positive"
        with pytest.raises(Conflict):
            stores.alerts.record_feedback(a.alert_id, "false_positive",
                                          "ops", BASE + 2)

    def test_bad_outcome_rejected(self, stores):
        a = self._alert(stores)
        with pytest.raises(InvalidInput):
            stores.alerts.record_feedback(a.alert_id, "maybe", "ops", BASE)

    def test_snooze_requires_open(self, stores):
        a = self._alert(stores)
        stores.alerts.snooze(a.alert_id, BASE + DAY_MS)
        with pytest.raises(InvalidState):
            stores.alerts.snooze(a.alert_id, BASE + 2 * DAY_MS)
        b = self._alert(stores)
        stores.alerts.delete(b.alert_id)
        with pytest.raises(InvalidState):
            stores.alerts.snooze(b.alert_id, BASE + DAY_MS)

    def test_unknown_alert_not_found(self, stores):
        with pytest.raises(NotFound):
            stores.alerts.record_feedback("nope", "true_positive", "ops", BASE)

    def test_list_filters(self, stores):
        self._alert(stores, fired_at=BASE, model_id="m1")
        self._alert(stores, fired_at=BASE + 10, model_id="m2")
        assert len(stores.alerts.list(model_id="m1")) == 1
        assert len(stores.alerts.list(since_ms=BASE + 5)) == 1
        assert len(stores.alerts.list(state="open")) == 2

    def test_daily_counts_oracle(self, stores):
        # hand-placed: 2 alerts three days ago, 1 yesterday
        now = BASE + 30 * DAY_MS + 3_600_000
        today = BASE + 30 * DAY_MS
        self._alert(stores, fired_at=today - 3 * DAY_MS + 100)
        self._alert(stores, fired_at=today - 3 * DAY_MS + 200)
        self._alert(stores, fired_at=today - DAY_MS + 50)
        counts = stores.alerts.daily_counts("m1", now, days=7, created_at=BASE)
        assert counts == [0, 0, 0, 0, 2, 0, 1]

    def test_daily_counts_truncated_for_young_model(self, stores):
        now = BASE + 30 * DAY_MS
        created = now - 2 * DAY_MS
        counts = stores.alerts.daily_counts("m1", now, days=7,
                                            created_at=created)
        assert counts == [0, 0]

    def test_feedback_outcomes(self, stores):
        a = self._alert(stores)
        b = self._alert(stores, fired_at=BASE + 1)
        self._alert(stores, fired_at=BASE + 2)
        stores.alerts.record_feedback(a.alert_id, "false_positive", "u", BASE)
        stores.alerts.record_feedback(b.alert_id, "true_positive", "u", BASE)
        outcomes = stores.alerts.feedback_outcomes("m1")
        assert sorted(outcomes) == ["false_positive", "true_positive"]


# -- tokens ---------------------------------------------------------------------


class TestTokenStore:
    def test_single_use(self, stores):
        token = stores.tokens.issue("alert", "alr-1", "false_positive")
        entry = stores.tokens.consume(token)
        assert entry == {"target_kind": "alert", "target_id": "alr-1",
                         "action": "false_positive"}
        with pytest.raises(Conflict):
            stores.tokens.consume(token)

    def test_unknown_token(self, stores):
        with pytest.raises(NotFound):
            stores.tokens.consume("nope")

    def test_used_state_survives_reopen(self, stores, tmp_path):
        token = stores.tokens.issue("alert", "alr-1", "snooze")
        stores.tokens.consume(token)
        reopened = Stores(tmp_path / "data")
        with pytest.raises(Conflict):
            reopened.tokens.consume(token)


# -- drift reports and proposals -------------------------------------------------


def _report(model_id="m1", evaluated_at=BASE, verdict="drifted") -> DriftReport:
    return DriftReport(model_id=model_id, ks=0.5, psi=0.3, kl=0.7, js=0.2,
                       wasserstein=1.0, daily_alert_count=3, verdict=verdict,
                       evaluated_at=evaluated_at)


class TestDriftAndProposalStores:
    def test_same_day_overwrites(self, stores):
        stores.drift_reports.put(_report(evaluated_at=BASE + 1_000))
        stores.drift_reports.put(_report(evaluated_at=BASE + 2_000))
        assert len(stores.drift_reports.list("m1")) == 1
        assert stores.drift_reports.latest("m1").evaluated_at == BASE + 2_000

    def test_different_days_accumulate(self, stores):
        stores.drift_reports.put(_report(evaluated_at=BASE))
        stores.drift_reports.put(_report(evaluated_at=BASE + DAY_MS))
        assert len(stores.drift_reports.list("m1")) == 2

    def test_proposal_round_trip_and_terminal_guard(self, stores):
        p = RetrainProposal(proposal_id="p1", model_id="m1", old_version=1,
                            candidate_version=2, preview={},
                            created_at=BASE, expires_at=BASE + DAY_MS)
        stores.proposals.put(p)
        assert stores.proposals.get("p1").status == "pending"
        p.status = PROPOSAL_APPROVED
        stores.proposals.put(p)
        p2 = RetrainProposal(proposal_id="p1", model_id="m1", old_version=1,
                             candidate_version=2, preview={},
                             created_at=BASE, expires_at=BASE + DAY_MS)
        with pytest.raises(InvalidState):
            stores.proposals.put(p2)  # cannot go back to pending

    def test_proposal_list_filters(self, stores):
        for i, status in enumerate(["pending", "pending"]):
            stores.proposals.put(RetrainProposal(
                proposal_id=f"p{i}", model_id=f"m{i}", old_version=1,
                candidate_version=2, preview={}, created_at=BASE + i,
                expires_at=BASE + DAY_MS, status=status))
        assert len(stores.proposals.list(status="pending")) == 2
        assert len(stores.proposals.list(model_id="m1")) == 1


# -- crash safety -----------------------------------------------------------------


class TestCrashSafety:
    def _build(self, tmp_path):
        stores = Stores(tmp_path / "data")
        sig = seeded_signal(stores)
        ref = seeded_artifact(stores)
        m = stores.register_model(None, "arima_uv", (sig.signal_id,),
                                  uv_spec(), ref, None, BASE)
        stores.register_model(m.model_id, "arima_uv", (sig.signal_id,),
                              uv_spec(), ref, None, BASE + 1)
        a = stores.alerts.record_alert(m.model_id, 1, BASE, {}, "low")
        stores.alerts.record_feedback(a.alert_id, "true_positive", "u", BASE)
        return stores

    @given(cut=st.integers(min_value=0, max_value=4000))
    @settings(max_examples=60, deadline=None)
    def test_any_model_log_prefix_is_consistent(self, tmp_path_factory, cut):
        tmp_path = tmp_path_factory.mktemp("crash")
        self._build(tmp_path)
        log_path = tmp_path / "data" / "models.jsonl"
        raw = log_path.read_bytes()
        log_path.write_bytes(raw[:min(cut, len(raw))])
        reopened = Stores(tmp_path / "data")  # must not raise
        # invariant: never two active versions of one model
        active = reopened.models.get_active_models()
        ids = [m.model_id for m in active]
        assert len(ids) == len(set(ids))
        # committed records never dangle: artifacts resolvable
        for record in active:
            assert reopened.artifacts.load(record.artifact_ref)

    def test_alert_log_prefix_keeps_feedback_immutability(self, tmp_path):
        stores = self._build(tmp_path)
        alert = stores.alerts.list()[0]
        log_path = tmp_path / "data" / "alerts.jsonl"
        raw = log_path.read_bytes()
        # cut off the feedback record: alert reverts to no-feedback state
        first_line_end = raw.index(b"\n") + 1
        log_path.write_bytes(raw[:first_line_end])
        reopened = Stores(tmp_path / "data")
        assert reopened.alerts.get(alert.alert_id).feedback is None
        reopened.alerts.record_feedback(alert.alert_id, "false_positive",
                                        "u", BASE + 5)
