"""The runtime: minute ticks, scoring dispatch, alerts, drift lifecycle.

A Runtime binds the durable stores, the metric store, the model cache,
and the webhook dispatcher behind the tick/train/drift operations.  All
time flows through an injected clock, so the same runtime executes in
real time or replays weeks in milliseconds under a virtual clock.

Tick dispatch: active models are partitioned over live workers by
rendezvous hash (the leader keeps an empty shard while any other worker
lives).  A worker death mid-tick re-dispatches only its unfinished
models, once, to the survivors; models already scored are never re-run,
keeping publication at-most-once per tick.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cluster import ModelCache, cache_get, partition_models
from .detect import DetectorSpec, detect
from .drift import (
    DistributionSummary,
    PROPOSAL_APPROVED,
    PROPOSAL_AUTO_APPLIED,
    PROPOSAL_PENDING,
    VERDICT_HEALTHY,
    apply_or_timeout,
    evaluate_drift,
    new_proposal,
    refine_from_feedback,
)
from .errors import InsufficientData, InvalidInput, VigilError
from .metrics import MetricStore, format_series
from .store import ModelRecord, Stores
from .training import (
    DEFAULT_CONFIGS,
    MODE_FULL,
    TrainRequest,
    _align_matrix,
    train_job,
)
from .webhook import WebhookDispatcher, build_alert_event, build_proposal_event

PREDICTION_METRIC = "vigil_prediction"
ANOMALY_METRIC = "vigil_anomaly"

DAY_MS = 24 * 3_600_000
DRIFT_RECENT_MS = DAY_MS  # drift grades against the trailing day


class RealClock:
    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def sleep_ms(self, ms: float) -> None:
        time.sleep(ms / 1000.0)


class VirtualClock:
    """Manual time; sleeping advances instantly."""

    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def sleep_ms(self, ms: float) -> None:
        self._now += int(ms)

    def advance_ms(self, ms: float) -> None:
        self._now += int(ms)


class WorkerDied(Exception):
    """Raised by a worker mid-shard; carries outcomes finished before death."""

    def __init__(self, completed: dict):
        super().__init__("worker died mid-shard")
        self.completed = completed


class LocalWorker:
    """In-process scoring executor.

    `fail_after` is a chaos hook: the worker dies after scoring that many
    models of a shard, reporting what it finished.
    """

    def __init__(self, node_id: str, fail_after: int | None = None):
        self.node_id = node_id
        self.fail_after = fail_after

    def run_shard(self, score_fn, records, now_ms: int) -> dict:
        outcomes: dict[str, dict] = {}
        for i, record in enumerate(records):
            if self.fail_after is not None and i >= self.fail_after:
                self.fail_after = None  # dies once, not on re-dispatch
                raise WorkerDied(outcomes)
            outcomes[record.model_id] = score_fn(record, now_ms)
        return outcomes


@dataclass(frozen=True)
class TickReport:
    tick_id: int
    term: int
    completed: tuple[str, ...]
    failed: dict
    skipped: dict
    anomalies: tuple[str, ...]
    dispatched: dict
    redispatched: tuple[str, ...]
    duration_ms: float

    def to_dict(self) -> dict:
        return {"tick_id": self.tick_id, "term": self.term,
                "completed": list(self.completed), "failed": self.failed,
                "skipped": self.skipped, "anomalies": list(self.anomalies),
                "dispatched": self.dispatched,
                "redispatched": list(self.redispatched),
                "duration_ms": self.duration_ms}


def severity_of(verdict_dict: dict, hold_window: int) -> str:
    """Informational severity from breach magnitude quartiles."""
    if verdict_dict.get("triggered_by") == "rule":
        total = max(len(verdict_dict.get("raw_scores", ())), 1)
        magnitude = verdict_dict.get("breach_count", 0) / total
    else:
        magnitude = verdict_dict.get("anomaly_count", 0) / max(hold_window, 1)
    if magnitude <= 0.25:
        return "low"
    if magnitude <= 0.5:
        return "medium"
    if magnitude <= 0.75:
        return "high"
    return "critical"


def verdict_to_dict(verdict) -> dict:
    out = {
        "is_anomaly": verdict.is_anomaly,
        "triggered_by": verdict.triggered_by,
        "raw_scores": list(verdict.raw_scores),
        "smoothed_scores": list(verdict.smoothed_scores),
        "breach_count": verdict.breach_count,
        "anomaly_count": verdict.anomaly_count,
        "predicted_value": verdict.predicted_value,
    }
    if verdict.attribution is not None:
        out["attribution"] = [
            {"feature": name, "contribution": float(c)}
            for name, c in verdict.attribution.ranked()
        ]
    return out


class Runtime:
    def __init__(self, stores: Stores, metric_store: MetricStore | None = None,
                 cache: ModelCache | None = None,
                 webhooks: WebhookDispatcher | None = None,
                 clock=None, node_id: str = "n0", step_ms: int = 60_000,
                 base_url: str = ""):
        self.stores = stores
        self.metrics = metric_store or MetricStore()
        self.cache = cache or ModelCache()
        self.webhooks = webhooks or WebhookDispatcher(post=lambda u, b: None)
        self.clock = clock or RealClock()
        self.node_id = node_id
        self.step_ms = step_ms
        self.base_url = base_url
        self.term = 1
        self.tick_counter = 0
        self.workers: list[LocalWorker] = []  # non-leader pool; empty = degraded

    # -- scoring ------------------------------------------------------------

    def _window_points(self, record: ModelRecord) -> int:
        spec = record.detector_spec
        config = DEFAULT_CONFIGS.get(record.model_type)
        points = max(spec.hold_window,
                     config.min_prediction_step if config else 1)
        if spec.seasonality_period:
            points = max(points, 2 * spec.seasonality_period)
        return points

    def _fetch_window(self, record: ModelRecord, now_ms: int):
        points = self._window_points(record)
        windows = []
        for signal_id in record.signal_ids:
            signal = self.stores.signals.get(signal_id)
            w = self.metrics.window(signal.query_expr, now_ms, points,
                                    self.step_ms, signal_id=signal_id)
            if w is None or len(w) < record.detector_spec.hold_window:
                raise InsufficientData("not enough live samples",
                                       signal_id=signal_id,
                                       have=0 if w is None else len(w),
                                       need=record.detector_spec.hold_window)
            windows.append(w)
        if len(windows) == 1:
            return windows[0]
        return _align_matrix(windows)

    def score_model(self, record: ModelRecord, now_ms: int) -> dict:
        """Score one model once: fetch, detect, publish, maybe alert."""
        window = self._fetch_window(record, now_ms)
        model = cache_get(self.cache, record.model_id, record.version,
                          self.stores.artifacts,
                          artifact_ref=record.artifact_ref)
        verdict = detect(record.detector_spec, window, model)

        if verdict.predicted_value is not None:
            predicted = float(verdict.predicted_value)
        elif verdict.model_scores:
            predicted = float(verdict.model_scores[-1])
        else:
            # rule path skips the model; echo the last observation
            predicted = float(np.asarray(window.values)[-1]
                              if np.asarray(window.values).ndim == 1
                              else np.asarray(window.values)[-1, 0])
        self.metrics.append(PREDICTION_METRIC, predicted, now_ms,
                            {"model_id": record.model_id})
        self.metrics.append(ANOMALY_METRIC, 1.0 if verdict.is_anomaly else 0.0,
                            now_ms, {"model_id": record.model_id})

        outcome = {"status": "completed", "anomaly": verdict.is_anomaly}
        if verdict.is_anomaly:
            vd = verdict_to_dict(verdict)
            severity = severity_of(vd, record.detector_spec.hold_window)
            alert = self.stores.alerts.record_alert(
                record.model_id, record.version, now_ms, vd, severity)
            event = build_alert_event(alert, record, self.stores.tokens,
                                      self.base_url)
            self.webhooks.enqueue(record.channel_ref, event)
            outcome["alert_id"] = alert.alert_id
            outcome["severity"] = severity
        return outcome

    def _score_outcome(self, record: ModelRecord, now_ms: int) -> dict:
        try:
            return self.score_model(record, now_ms)
        except InsufficientData as exc:
            return {"status": "skipped", "reason": exc.message}
        except VigilError as exc:
            return {"status": "failed", "reason": f"{exc.code}: {exc.message}"}

    # -- the tick -------------------------------------------------------------

    def inference_tick(self, now_ms: int | None = None) -> TickReport:
        started = time.perf_counter()
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        self.tick_counter += 1
        tick_id = self.tick_counter
        records = self.stores.models.get_active_models()
        by_id = {r.model_id: r for r in records}

        pool = self.workers or [LocalWorker(self.node_id)]  # degraded mode
        assignment = partition_models(list(by_id), [w.node_id for w in pool],
                                      tick_id=tick_id, term=self.term)
        outcomes: dict[str, dict] = {}
        retry: list[str] = []
        dead: set[str] = set()
        for worker in pool:
            shard = assignment.shards.get(worker.node_id, ())
            try:
                outcomes.update(worker.run_shard(
                    self._score_outcome, [by_id[m] for m in shard], now))
            except WorkerDied as died:
                outcomes.update(died.completed)
                dead.add(worker.node_id)
                retry.extend(m for m in shard if m not in outcomes)

        redispatched = tuple(retry)
        if retry:
            survivors = [w for w in pool if w.node_id not in dead]
            if survivors:
                second = partition_models(retry, [w.node_id for w in survivors],
                                          tick_id=tick_id, term=self.term)
                for worker in survivors:
                    shard = second.shards.get(worker.node_id, ())
                    try:
                        outcomes.update(worker.run_shard(
                            self._score_outcome, [by_id[m] for m in shard], now))
                    except WorkerDied as died:
                        outcomes.update(died.completed)
                        for m in shard:
                            outcomes.setdefault(m, {
                                "status": "failed",
                                "reason": "worker died on re-dispatch"})
            else:
                for m in retry:
                    outcomes.setdefault(m, {"status": "failed",
                                            "reason": "no surviving workers"})

        completed = tuple(m for m, o in sorted(outcomes.items())
                          if o["status"] == "completed")
        return TickReport(
            tick_id=tick_id,
            term=self.term,
            completed=completed,
            failed={m: o["reason"] for m, o in sorted(outcomes.items())
                    if o["status"] == "failed"},
            skipped={m: o["reason"] for m, o in sorted(outcomes.items())
                     if o["status"] == "skipped"},
            anomalies=tuple(m for m, o in sorted(outcomes.items())
                            if o.get("anomaly")),
            dispatched={w: len(assignment.shards.get(w, ()))
                        for w in assignment.shards},
            redispatched=redispatched,
            duration_ms=(time.perf_counter() - started) * 1000.0,
        )

    # -- training --------------------------------------------------------------

    def load_datasets(self, signal_ids) -> dict:
        return {sid: self.stores.datasets.read(sid) for sid in signal_ids}

    def train_and_register(self, request: TrainRequest,
                           model_id: str | None = None,
                           channel_ref: str | None = None,
                           register: bool = True, now_ms: int | None = None,
                           config=None):
        """Run a training job; full mode optionally registers the new version.

        Returns (TrainResult, ModelRecord | None).  The artifact hits the
        store before any registry write, so a crash between the two never
        leaves a dangling reference.
        """
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        datasets = self.load_datasets(request.signal_ids)
        result = train_job(request, datasets, self.stores.artifacts, now,
                           config=config)
        record = None
        if register and not result.temporary:
            record = self.stores.register_model(
                model_id, request.model_type, request.signal_ids,
                request.detector_spec, result.artifact_ref, channel_ref, now)
        return result, record

    # -- drift lifecycle ----------------------------------------------------------

    _VERDICT_RANK = {VERDICT_HEALTHY: 0, "quiet": 1, "noisy": 2, "drifted": 3}

    def evaluate_model_drift(self, record: ModelRecord, now_ms: int):
        """Grade one model against the trailing day; worst signal wins."""
        model = cache_get(self.cache, record.model_id, record.version,
                          self.stores.artifacts,
                          artifact_ref=record.artifact_ref)
        summaries = (getattr(model, "train_summary", None) or {}).get("signals", {})
        counts = self.stores.alerts.daily_counts(
            record.model_id, now_ms, days=7, created_at=record.created_at)
        worst = None
        for signal_id in record.signal_ids:
            summary_dict = summaries.get(signal_id)
            if summary_dict is None:
                continue
            signal = self.stores.signals.get(signal_id)
            points = DRIFT_RECENT_MS // self.step_ms
            window = self.metrics.window(signal.query_expr, now_ms,
                                         points, self.step_ms,
                                         signal_id=signal_id)
            if window is None:
                continue
            try:
                report = evaluate_drift(
                    record.model_id,
                    DistributionSummary.from_dict(summary_dict),
                    window.values, counts, now_ms)
            except InsufficientData:
                continue
            key = (self._VERDICT_RANK.get(report.verdict, 0), report.ks)
            if worst is None or key > worst[0]:
                worst = (key, report)
        return worst[1] if worst else None

    def propose_retrain(self, record: ModelRecord, report, now_ms: int):
        """Refine parameters from feedback and fast-train a candidate.

        The candidate artifact is stored but NOT registered; registration
        happens when the proposal is approved or times out.
        """
        outcomes = self.stores.alerts.feedback_outcomes(record.model_id)
        new_spec, scale = refine_from_feedback(record.detector_spec, outcomes,
                                               report.verdict)
        params = dict(DEFAULT_CONFIGS[record.model_type].params)
        if record.model_type == "arima_uv":
            params["iqr_multiplier"] = params.get("iqr_multiplier", 3.0) * scale
        else:
            base = params.get("contamination", 0.01)
            params["contamination"] = min(0.4, max(0.001, base / scale))
        request = TrainRequest(
            model_type=record.model_type, mode=MODE_FULL,
            signal_ids=record.signal_ids, detector_spec=new_spec,
            seed=record.version + 1, params=params)
        datasets = self.load_datasets(record.signal_ids)
        result = train_job(request, datasets, self.stores.artifacts, now_ms)

        old_dict = record.detector_spec.to_dict()
        spec_updates = {k: v for k, v in new_spec.to_dict().items()
                        if old_dict.get(k) != v}
        preview = {"flagged_count": result.preview.get("flagged_count"),
                   "trained_rows": result.trained_rows,
                   "kind": result.preview.get("kind")}
        proposal = new_proposal(report, record.version, preview,
                                spec_updates, scale, now_ms)
        proposal.artifact_ref = result.artifact_ref
        self.stores.proposals.put(proposal)
        event = build_proposal_event(proposal, self.stores.tokens, self.base_url)
        self.webhooks.enqueue(record.channel_ref, event)
        return proposal

    def run_drift_job(self, now_ms: int | None = None) -> list:
        """Daily grading pass: one report per active model, proposals for
        any verdict short of healthy."""
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        results = []
        for record in self.stores.models.get_active_models():
            try:
                report = self.evaluate_model_drift(record, now)
            except VigilError:
                continue
            if report is None:
                continue
            self.stores.drift_reports.put(report)
            proposal = None
            if report.verdict != VERDICT_HEALTHY:
                open_proposals = self.stores.proposals.list(
                    status=PROPOSAL_PENDING, model_id=record.model_id)
                if not open_proposals:
                    try:
                        proposal = self.propose_retrain(record, report, now)
                    except VigilError:
                        proposal = None
            results.append((report, proposal))
        return results

    def resolve_proposal(self, proposal_id: str, decision: str | None,
                         now_ms: int | None = None) -> str:
        """Apply an explicit decision, or the timeout rule when None.

        The decision is persisted before the registry bump so a crash in
        between can never register the candidate twice.
        """
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        proposal = self.stores.proposals.get(proposal_id)
        status = apply_or_timeout(proposal, decision, now)
        if status == PROPOSAL_PENDING:
            return status  # not expired yet, nothing to persist
        if status in (PROPOSAL_APPROVED, PROPOSAL_AUTO_APPLIED) \
                and proposal.artifact_ref is None:
            raise InvalidInput("proposal has no candidate artifact",
                               proposal_id=proposal_id)
        self.stores.proposals.put(proposal)
        if status in (PROPOSAL_APPROVED, PROPOSAL_AUTO_APPLIED):
            record = self.stores.models.get(proposal.model_id,
                                            proposal.old_version)
            new_spec = DetectorSpec.from_dict(
                {**record.detector_spec.to_dict(), **proposal.spec_updates})
            self.stores.register_model(
                proposal.model_id, record.model_type, record.signal_ids,
                new_spec, proposal.artifact_ref, record.channel_ref, now)
            self.cache.invalidate(proposal.model_id)
        return status

    def expire_proposals(self, now_ms: int | None = None) -> list[str]:
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        applied = []
        for proposal in self.stores.proposals.list(status=PROPOSAL_PENDING):
            if now >= proposal.expires_at:
                self.resolve_proposal(proposal.proposal_id, None, now)
                applied.append(proposal.proposal_id)
        return applied

    # -- feedback-driven spec updates ------------------------------------------

    def apply_action_token(self, token: str, now_ms: int | None = None) -> dict:
        """Consume a single-use action link and perform its action."""
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        entry = self.stores.tokens.consume(token)
        kind, target, action = (entry["target_kind"], entry["target_id"],
                                entry["action"])
        if kind == "alert":
            if action in ("true_positive", "false_positive"):
                self.stores.alerts.record_feedback(target, action,
                                                   "webhook-action", now)
            elif action == "snooze":
                self.stores.alerts.snooze(target, now + DAY_MS)
            elif action == "delete":
                self.stores.alerts.delete(target)
            else:
                raise InvalidInput("unknown alert action", action=action)
        elif kind == "proposal":
            self.resolve_proposal(target, "approve" if action == "approve"
                                  else "reject", now)
        else:
            raise InvalidInput("unknown token kind", kind=kind)
        return {"target_kind": kind, "target_id": target, "action": action}

    # -- observability -------------------------------------------------------------

    def exposition(self, now_ms: int | None = None) -> str:
        """Metric-store exposition plus runtime counters, globally sorted."""
        now = self.clock.now_ms() if now_ms is None else int(now_ms)
        text = self.metrics.render_exposition(now)
        lines = [ln for ln in text.split("\n") if ln]
        counters = {
            "vigil_cache_entries": float(len(self.cache)),
            "vigil_cache_hits": float(self.cache.hits),
            "vigil_cache_misses": float(self.cache.misses),
            "vigil_ticks_total": float(self.tick_counter),
            "vigil_webhook_dropped": float(self.webhooks.dropped),
            "vigil_active_models": float(
                len(self.stores.models.get_active_models())),
        }
        for name, value in counters.items():
            lines.append(f"{format_series(name, ())} {value!r} {now}")
        lines.sort(key=lambda ln: ln.split(" ")[0])
        return "\n".join(lines) + "\n"

    # -- serving loop ------------------------------------------------------------

    def run_forever(self, max_ticks: int | None = None,
                    drift_every_ticks: int = 1440, gate=None,
                    stop=None) -> None:
        """Minute-tick loop; drift job once per simulated day of ticks.

        A `gate` callable vetoes individual ticks (followers pass a
        leadership check); a `stop` event ends the loop between ticks.
        """
        ticks = 0
        while max_ticks is None or ticks < max_ticks:
            if stop is not None and stop.is_set():
                return
            start = self.clock.now_ms()
            if gate is None or gate():
                self.inference_tick(start)
                self.webhooks.flush()
                ticks += 1
                if ticks % drift_every_ticks == 0:
                    self.run_drift_job(self.clock.now_ms())
                    self.expire_proposals(self.clock.now_ms())
            elapsed = self.clock.now_ms() - start
            if elapsed < self.step_ms:
                self.clock.sleep_ms(self.step_ms - elapsed)
