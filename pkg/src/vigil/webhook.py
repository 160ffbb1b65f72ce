"""Outbound webhook delivery for alerts and retrain proposals.

Events queue into a bounded buffer (capacity 1024, oldest dropped first
under pressure) and deliver with up to 3 attempts per event on an
exponential backoff.  The HTTP POST and the sleep are injectable so tests
and the virtual-clock lifecycle run without sockets or real waiting.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .errors import DeliveryFailed, InvalidInput

DEFAULT_QUEUE_CAPACITY = 1024
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_BASE_S = 0.2

STATUS_DELIVERED = "delivered"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class DeliveryRecord:
    url: str
    event_kind: str
    target_id: str
    attempts: int
    status: str
    last_error: str | None = None

    def to_dict(self) -> dict:
        return {"url": self.url, "event_kind": self.event_kind,
                "target_id": self.target_id, "attempts": self.attempts,
                "status": self.status, "last_error": self.last_error}


def serialize_event(event: dict) -> bytes:
    """Deterministic wire form: sorted keys, tight separators, UTF-8."""
    return json.dumps(event, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False).encode("utf-8")


def build_alert_event(alert, model, tokens, base_url: str = "") -> dict:
    """Wire-form alert with single-use action links."""
    verdict = alert.verdict or {}
    attribution = verdict.get("attribution") or []
    actions = {}
    for action in ("true_positive", "false_positive", "snooze", "delete"):
        token = tokens.issue("alert", alert.alert_id, action)
        actions[action] = f"{base_url}/v1/actions/{token}"
    return {
        "kind": "alert",
        "alert_id": alert.alert_id,
        "model": model.model_id,
        "model_version": model.version,
        "fired_at": alert.fired_at,
        "severity": alert.severity,
        "summary": {
            "triggered_by": verdict.get("triggered_by"),
            "breach_count": verdict.get("breach_count", 0),
            "anomaly_count": verdict.get("anomaly_count", 0),
            "top_features": attribution[:3],
        },
        "actions": actions,
    }


def build_proposal_event(proposal, tokens, base_url: str = "") -> dict:
    actions = {}
    for action in ("approve", "reject"):
        token = tokens.issue("proposal", proposal.proposal_id, action)
        actions[action] = f"{base_url}/v1/actions/{token}"
    return {
        "kind": "retrain_proposal",
        "proposal_id": proposal.proposal_id,
        "model": proposal.model_id,
        "old_version": proposal.old_version,
        "candidate_version": proposal.candidate_version,
        "expires_at": proposal.expires_at,
        "verdict": (proposal.report or {}).get("verdict"),
        "actions": actions,
    }


def _default_post(url: str, body: bytes) -> None:
    import httpx
    response = httpx.post(url, content=body,
                          headers={"content-type": "application/json"},
                          timeout=5.0)
    if response.status_code >= 400:
        raise DeliveryFailed("webhook endpoint rejected event",
                             url=url, status=response.status_code)


class WebhookDispatcher:
    def __init__(self, post=None, sleep=None,
                 max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                 backoff_base_s: float = DEFAULT_BACKOFF_BASE_S,
                 capacity: int = DEFAULT_QUEUE_CAPACITY,
                 record_sink=None):
        if capacity < 1:
            raise InvalidInput("capacity must be >= 1")
        if max_attempts < 1:
            raise InvalidInput("max_attempts must be >= 1")
        self._post = post or _default_post
        self._sleep = sleep if sleep is not None else time.sleep
        self._record_sink = record_sink  # e.g. a durable log's append
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.capacity = capacity
        self._queue: deque = deque()
        self._lock = threading.Lock()
        self.dropped = 0
        self.records: list[DeliveryRecord] = []

    def enqueue(self, url: str, event: dict) -> None:
        """Queue one event; oldest queued event is dropped at capacity."""
        if not url:
            return  # no channel configured: silently skip
        with self._lock:
            if len(self._queue) >= self.capacity:
                self._queue.popleft()
                self.dropped += 1
            self._queue.append((url, event))

    def pending(self) -> int:
        with self._lock:
            return len(self._queue)

    def _deliver(self, url: str, event: dict) -> DeliveryRecord:
        body = serialize_event(event)
        error = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                self._post(url, body)
                return DeliveryRecord(url=url, event_kind=event.get("kind", "?"),
                                      target_id=event.get("alert_id")
                                      or event.get("proposal_id") or "?",
                                      attempts=attempt, status=STATUS_DELIVERED)
            except Exception as exc:  # noqa: BLE001 - endpoint faults must not kill the loop
                error = str(exc)
                if attempt < self.max_attempts:
                    self._sleep(self.backoff_base_s * (2 ** (attempt - 1)))
        return DeliveryRecord(url=url, event_kind=event.get("kind", "?"),
                              target_id=event.get("alert_id")
                              or event.get("proposal_id") or "?",
                              attempts=self.max_attempts, status=STATUS_FAILED,
                              last_error=error)

    def flush(self) -> list[DeliveryRecord]:
        """Drain the queue synchronously; returns this flush's records."""
        out = []
        while True:
            with self._lock:
                if not self._queue:
                    break
                url, event = self._queue.popleft()
            record = self._deliver(url, event)
            out.append(record)
            with self._lock:
                self.records.append(record)
            if self._record_sink is not None:
                self._record_sink(record.to_dict())
        return out
