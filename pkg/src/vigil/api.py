"""The HTTP face of the runtime: a versioned REST API plus exposition.

Every handler speaks the same dialect: JSON bodies in, JSON out, and any
platform error rendered as a ``{code, message, details}`` envelope with a
status derived from the error code, never from the raising site.  Mutating
endpoints honor an ``Idempotency-Key`` header so client retries are safe.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import PlainTextResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .cluster.cache import ModelCache, cache_get
from .detect import FLOW_MV, FLOW_UV, DetectorSpec, detect
from .errors import Conflict, InvalidInput, VigilError
from .metrics import MetricStore
from .orchestrator import DAY_MS, Runtime, verdict_to_dict
from .store import JsonlLog, ModelRecord, Stores
from .timeseries import MatrixWindow, SeriesWindow
from .training import MODE_FULL, MODE_PREVIEW, TrainRequest
from .webhook import WebhookDispatcher

# error code -> HTTP status; anything unlisted is an internal 500
_STATUS = {
    "invalid_input": 400,
    "invalid_query": 400,
    "not_found": 404,
    "conflict": 409,
    "invalid_state": 409,
    "insufficient_data": 422,
    "degenerate_distribution": 422,
    "fit_failure": 422,
    "delivery_failed": 502,
    "source_unavailable": 503,
    "model_unavailable": 503,
}

_MUTATING = ("POST", "PATCH", "DELETE", "PUT")


def _envelope(code: str, message: str, details: dict | None = None,
              status: int | None = None) -> Response:
    body = {"code": code, "message": message, "details": details or {}}
    return Response(content=json.dumps(body, default=str),
                    status_code=status or _STATUS.get(code, 500),
                    media_type="application/json")


async def _body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InvalidInput("body must be valid JSON", error=str(exc))
    if not isinstance(data, dict):
        raise InvalidInput("body must be a JSON object")
    return data


def _require(body: dict, key: str):
    if key not in body or body[key] is None:
        raise InvalidInput("missing required field", field=key)
    return body[key]


def _int_param(request: Request, name: str, default: int | None = None,
               required: bool = False) -> int | None:
    raw = request.query_params.get(name)
    if raw is None:
        if required:
            raise InvalidInput("missing query parameter", parameter=name)
        return default
    try:
        return int(raw)
    except ValueError:
        raise InvalidInput("query parameter must be an integer",
                           parameter=name, value=raw)


def _train_request(body: dict, mode: str) -> TrainRequest:
    raw_ids = _require(body, "signal_ids")
    if not isinstance(raw_ids, list):
        raise InvalidInput("signal_ids must be an array")
    signal_ids = tuple(str(s) for s in raw_ids)
    spec = dict(body.get("detector_spec") or {})
    spec.setdefault("flow", FLOW_MV if len(signal_ids) > 1 else FLOW_UV)
    kwargs = {}
    if body.get("seed") is not None:
        kwargs["seed"] = int(body["seed"])
    if body.get("noise_eta") is not None:
        kwargs["noise_eta"] = float(body["noise_eta"])
    if body.get("params") is not None:
        if not isinstance(body["params"], dict):
            raise InvalidInput("params must be an object")
        kwargs["params"] = dict(body["params"])
    return TrainRequest(model_type=str(_require(body, "model_type")),
                        mode=mode, signal_ids=signal_ids,
                        detector_spec=DetectorSpec.from_dict(spec), **kwargs)


def _train_payload(result) -> dict:
    return {
        "artifact_ref": result.artifact_ref,
        "mode": result.mode,
        "trained_rows": result.trained_rows,
        "train_start_ts": result.train_start_ts,
        "train_end_ts": result.train_end_ts,
        "preview": result.preview,
    }


def _inline_window(record: ModelRecord, body: dict, now_ms: int,
                   step_ms: int):
    """Build a scoring window from values posted inline.

    Timestamps are optional; absent, a trailing grid at the tick step is
    synthesized so callers can probe a model with bare numbers.
    """
    try:
        values = np.asarray(body["values"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInput("values must be a numeric array", error=str(exc))
    n = values.shape[0] if values.ndim else 0
    if n == 0:
        raise InvalidInput("values must be non-empty")
    if body.get("timestamps") is not None:
        timestamps = np.asarray(body["timestamps"], dtype=np.int64)
    else:
        end = (now_ms // step_ms) * step_ms
        timestamps = end - step_ms * np.arange(n - 1, -1, -1, dtype=np.int64)
    if len(record.signal_ids) == 1:
        if values.ndim != 1:
            raise InvalidInput("univariate models take a flat values array")
        return SeriesWindow(record.signal_ids[0], timestamps, values, step_ms)
    if values.ndim != 2 or values.shape[1] != len(record.signal_ids):
        raise InvalidInput("values must be rows of one value per signal",
                           signals=len(record.signal_ids))
    return MatrixWindow(record.signal_ids, timestamps, values, step_ms)


def build_runtime(data_dir: str | Path, node_id: str = "n0",
                  step_ms: int = 60_000, base_url: str = "",
                  post=None) -> Runtime:
    """Assemble a runtime over one data directory.

    Webhook delivery records are appended to a durable log next to the
    stores, so the delivery history survives restarts.
    """
    stores = Stores(data_dir)
    deliveries = JsonlLog(Path(data_dir) / "deliveries.jsonl")
    webhooks = WebhookDispatcher(post=post, record_sink=deliveries.append)
    return Runtime(stores, metric_store=MetricStore(), cache=ModelCache(),
                   webhooks=webhooks, node_id=node_id, step_ms=step_ms,
                   base_url=base_url)


def create_app(rt: Runtime, api_token: str | None = None) -> FastAPI:
    app = FastAPI(title="vigil", docs_url=None, redoc_url=None,
                  openapi_url=None)
    app.state.runtime = rt
    app.state.idempotency: dict[tuple, tuple] = {}
    app.state.idempotency_lock = threading.Lock()

    # -- error envelope ----------------------------------------------------

    @app.exception_handler(VigilError)
    async def on_vigil_error(request: Request, exc: VigilError):
        return _envelope(exc.code, exc.message, exc.details)

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "http_error"
        return _envelope(code, str(exc.detail), status=exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request,
                                  exc: RequestValidationError):
        return _envelope("invalid_input", "request validation failed",
                         {"errors": [str(e) for e in exc.errors()]},
                         status=400)

    @app.exception_handler(Exception)
    async def on_unexpected(request: Request, exc: Exception):
        return _envelope("internal", f"{type(exc).__name__}: {exc}",
                         status=500)

    # -- middleware (added later runs outer) ---------------------------------

    @app.middleware("http")
    async def idempotency(request: Request, call_next):
        key = request.headers.get("idempotency-key")
        if key is None or request.method not in _MUTATING:
            return await call_next(request)
        cache_key = (request.method, request.url.path, key)
        with app.state.idempotency_lock:
            hit = app.state.idempotency.get(cache_key)
        if hit is not None:
            status, payload, headers = hit
            return Response(content=payload, status_code=status,
                            headers={**headers, "idempotent-replay": "true"})
        response = await call_next(request)
        payload = b"".join([chunk async for chunk in response.body_iterator])
        headers = dict(response.headers)
        # 5xx responses stay uncached so a retry can actually retry
        if response.status_code < 500:
            with app.state.idempotency_lock:
                app.state.idempotency[cache_key] = (response.status_code,
                                                    payload, headers)
        return Response(content=payload, status_code=response.status_code,
                        headers=headers)

    @app.middleware("http")
    async def bearer_auth(request: Request, call_next):
        if api_token and request.url.path.startswith("/v1/"):
            header = request.headers.get("authorization", "")
            if header != f"Bearer {api_token}":
                return _envelope("unauthorized", "missing or bad bearer token",
                                 status=401)
        return await call_next(request)

    # -- signals -------------------------------------------------------------

    @app.post("/v1/signals", status_code=201)
    async def create_signal(request: Request):
        body = await _body(request)
        record = rt.stores.signals.register(
            str(_require(body, "name")), str(_require(body, "query_expr")),
            rt.clock.now_ms())
        return record.to_dict()

    @app.get("/v1/signals")
    async def list_signals():
        return {"signals": [s.to_dict() for s in rt.stores.signals.list()]}

    @app.get("/v1/signals/{signal_id}")
    async def get_signal(signal_id: str):
        return rt.stores.signals.get(signal_id).to_dict()

    @app.patch("/v1/signals/{signal_id}")
    async def update_signal(signal_id: str, request: Request):
        body = await _body(request)
        record = rt.stores.signals.get(signal_id)
        updated = replace(
            record,
            name=str(body.get("name", record.name)),
            query_expr=str(body.get("query_expr", record.query_expr)))
        return rt.stores.signals.update(updated).to_dict()

    @app.delete("/v1/signals/{signal_id}")
    async def delete_signal(signal_id: str):
        rt.stores.signals.get(signal_id)
        holders = [m.model_id for m in rt.stores.models.list_models()
                   if signal_id in m.signal_ids]
        if holders:
            raise Conflict("signal is referenced by models",
                           signal_id=signal_id, model_ids=holders)
        rt.stores.signals.delete(signal_id)
        return {"signal_id": signal_id, "deleted": True}

    @app.post("/v1/signals/{signal_id}/snapshot")
    async def snapshot_signal(signal_id: str):
        meta = rt.stores.snapshot_signal(signal_id, rt.metrics,
                                         rt.clock.now_ms(),
                                         step_ms=rt.step_ms)
        return asdict(meta)

    # -- metric ingestion and range queries -----------------------------------

    @app.post("/v1/metrics", status_code=202)
    async def ingest_metrics(request: Request):
        body = await _body(request)
        samples = body.get("samples")
        if samples is None:
            samples = [body] if "name" in body else []
        if not isinstance(samples, list) or not samples:
            raise InvalidInput("provide a sample or a samples array")
        for sample in samples:
            if not isinstance(sample, dict):
                raise InvalidInput("each sample must be an object")
            rt.metrics.append(str(_require(sample, "name")),
                              float(_require(sample, "value")),
                              int(_require(sample, "ts_ms")),
                              sample.get("labels"))
        return {"accepted": len(samples)}

    @app.get("/v1/query_range")
    async def query_range(request: Request):
        selector = request.query_params.get("selector")
        if not selector:
            raise InvalidInput("missing query parameter", parameter="selector")
        results = rt.metrics.query_range(
            selector,
            _int_param(request, "start_ms", required=True),
            _int_param(request, "end_ms", required=True),
            _int_param(request, "step_ms", default=rt.step_ms))
        return {"results": [
            {"name": r.name, "labels": dict(r.labels),
             "timestamps": list(r.timestamps), "values": list(r.values)}
            for r in results]}

    # -- models --------------------------------------------------------------

    @app.post("/v1/models/train", status_code=201)
    async def train_model(request: Request):
        body = await _body(request)
        train_request = _train_request(body, MODE_FULL)
        result, record = rt.train_and_register(
            train_request,
            model_id=body.get("model_id"),
            channel_ref=body.get("channel_ref"),
            register=bool(body.get("register", True)))
        payload = _train_payload(result)
        payload["model"] = record.to_dict() if record else None
        return payload

    @app.post("/v1/models/preview")
    async def preview_training(request: Request):
        body = await _body(request)
        result, _ = rt.train_and_register(_train_request(body, MODE_PREVIEW),
                                          register=False)
        return _train_payload(result)

    @app.get("/v1/models")
    async def list_models():
        return {"models": [m.to_dict() for m in rt.stores.models.list_models()]}

    @app.get("/v1/models/{model_id}")
    async def get_model(model_id: str):
        record = rt.stores.models.get(model_id)
        versions = rt.stores.models.list_versions(model_id)
        return {"model": record.to_dict(),
                "versions": [v.to_dict() for v in versions]}

    @app.patch("/v1/models/{model_id}")
    async def set_model_status(model_id: str, request: Request):
        body = await _body(request)
        record = rt.stores.models.set_status(
            model_id, int(_require(body, "version")),
            str(_require(body, "status")))
        rt.cache.invalidate(model_id)
        return record.to_dict()

    @app.delete("/v1/models/{model_id}")
    async def delete_model(model_id: str):
        rt.stores.models.delete_model(model_id)
        rt.cache.invalidate(model_id)
        return {"model_id": model_id, "deleted": True}

    @app.post("/v1/models/{model_id}/preview")
    async def preview_spec_change(model_id: str, request: Request):
        """Re-run the preview for an existing model, with optional tweaks."""
        body = await _body(request)
        version = body.get("version")
        record = rt.stores.models.get(
            model_id, int(version) if version is not None else None)
        spec = DetectorSpec.from_dict({**record.detector_spec.to_dict(),
                                       **dict(body.get("spec_updates") or {})})
        train_request = TrainRequest(
            model_type=record.model_type, mode=MODE_PREVIEW,
            signal_ids=record.signal_ids, detector_spec=spec)
        result, _ = rt.train_and_register(train_request, register=False)
        payload = _train_payload(result)
        payload["model_id"] = record.model_id
        payload["version"] = record.version
        payload["detector_spec"] = spec.to_dict()
        return payload

    # -- ad hoc scoring -------------------------------------------------------

    @app.post("/v1/detect")
    async def detect_once(request: Request):
        """Score one window without publishing metrics or firing alerts."""
        body = await _body(request)
        version = body.get("version")
        record = rt.stores.models.get(
            str(_require(body, "model_id")),
            int(version) if version is not None else None)
        model = cache_get(rt.cache, record.model_id, record.version,
                          rt.stores.artifacts,
                          artifact_ref=record.artifact_ref)
        now = rt.clock.now_ms()
        if body.get("values") is not None:
            window = _inline_window(record, body, now, rt.step_ms)
        else:
            window = rt._fetch_window(record, now)
        verdict = detect(record.detector_spec, window, model)
        return {"model_id": record.model_id, "version": record.version,
                "verdict": verdict_to_dict(verdict)}

    # -- alerts ---------------------------------------------------------------

    @app.get("/v1/alerts")
    async def list_alerts(request: Request):
        params = request.query_params
        alerts = rt.stores.alerts.list(
            model_id=params.get("model_id"), state=params.get("state"),
            since_ms=_int_param(request, "since_ms"))
        return {"alerts": [a.to_dict() for a in alerts]}

    @app.get("/v1/alerts/{alert_id}")
    async def get_alert(alert_id: str):
        return rt.stores.alerts.get(alert_id).to_dict()

    @app.post("/v1/alerts/{alert_id}/feedback")
    async def alert_feedback(alert_id: str, request: Request):
        body = await _body(request)
        record = rt.stores.alerts.record_feedback(
            alert_id, str(_require(body, "outcome")),
            str(body.get("by", "api")), rt.clock.now_ms())
        return record.to_dict()

    @app.post("/v1/alerts/{alert_id}/snooze")
    async def snooze_alert(alert_id: str, request: Request):
        body = await _body(request)
        until = body.get("until_ms")
        until = rt.clock.now_ms() + DAY_MS if until is None else int(until)
        return rt.stores.alerts.snooze(alert_id, until).to_dict()

    @app.delete("/v1/alerts/{alert_id}")
    async def delete_alert(alert_id: str):
        return rt.stores.alerts.delete(alert_id).to_dict()

    # -- drift and proposals ----------------------------------------------------

    @app.get("/v1/drift/reports")
    async def list_drift_reports(request: Request):
        reports = rt.stores.drift_reports.list(
            request.query_params.get("model_id"))
        return {"reports": [r.to_dict() for r in reports]}

    @app.get("/v1/proposals")
    async def list_proposals(request: Request):
        params = request.query_params
        proposals = rt.stores.proposals.list(status=params.get("status"),
                                             model_id=params.get("model_id"))
        return {"proposals": [p.to_dict() for p in proposals]}

    @app.get("/v1/proposals/{proposal_id}")
    async def get_proposal(proposal_id: str):
        return rt.stores.proposals.get(proposal_id).to_dict()

    @app.post("/v1/proposals/{proposal_id}/approve")
    async def approve_proposal(proposal_id: str):
        status = rt.resolve_proposal(proposal_id, "approve")
        return {"proposal_id": proposal_id, "status": status}

    @app.post("/v1/proposals/{proposal_id}/reject")
    async def reject_proposal(proposal_id: str):
        status = rt.resolve_proposal(proposal_id, "reject")
        return {"proposal_id": proposal_id, "status": status}

    # -- single-use action links ----------------------------------------------

    @app.api_route("/v1/actions/{token}", methods=["GET", "POST"])
    async def apply_action(token: str):
        # GET accepted so the links pasted into chat clients just work
        result = rt.apply_action_token(token)
        return {"applied": True, **result}

    # -- observability ----------------------------------------------------------

    @app.get("/metrics")
    async def exposition():
        return PlainTextResponse(rt.exposition())

    @app.get("/healthz")
    async def healthz():
        # now_ms lets clients anchor time math on the service clock,
        # which matters when a replay runs on a virtual one
        return {"status": "ok", "node_id": rt.node_id,
                "now_ms": rt.clock.now_ms()}

    return app
