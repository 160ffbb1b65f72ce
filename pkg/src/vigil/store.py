"""Durable system of record.

Every store persists as an append-only JSON-lines log under one data
directory, replayed on open and compacted on demand; artifacts are
content-addressed files.  Mutations are serialized per store (single
writer); readers see the last committed state.

Crash safety comes from the log discipline: a torn final line is ignored
on replay, and callers write artifact bytes before appending any record
that references them, so replaying any prefix of a log yields a
consistent store.

All operations take explicit epoch-millisecond timestamps; nothing here
reads the wall clock, so the same code runs under real and virtual time.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .detect import DetectorSpec, FLOW_MV
from .drift import PROPOSAL_PENDING, DriftReport, RetrainProposal
from .errors import (
    Conflict,
    InvalidInput,
    InvalidState,
    NotFound,
    SourceUnavailable,
)
from .selector import parse_selector
from .timeseries import SeriesWindow

RECORD_VERSION = 1
SNAPSHOT_HORIZON_MS = 21 * 24 * 3_600_000
DAY_MS = 24 * 3_600_000
DEFAULT_STEP_MS = 60_000

MODEL_STATUS_ACTIVE = "active"
MODEL_STATUS_PAUSED = "paused"
MODEL_STATUS_DELETED = "deleted"
MODEL_STATUSES = (MODEL_STATUS_ACTIVE, MODEL_STATUS_PAUSED, MODEL_STATUS_DELETED)

ALERT_OPEN = "open"
ALERT_SNOOZED = "snoozed"
ALERT_DELETED = "deleted"

FEEDBACK_OUTCOMES = ("true_positive", "false_positive")


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


class JsonlLog:
    """Append-only JSON-lines file with crash-tolerant replay."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

    def append(self, record: dict) -> None:
        line = json.dumps({"v": RECORD_VERSION, **record},
                          sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False, allow_nan=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()

    def replay(self) -> list[dict]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, "r", encoding="utf-8") as f:
            lines = f.read().split("\n")
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    break  # torn tail from a crash mid-append
                raise InvalidState("corrupt log line", path=str(self.path),
                                   line_number=i + 1)
        return records

    def rewrite(self, records: list[dict]) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with self._lock:
            with open(tmp, "w", encoding="utf-8") as f:
                for record in records:
                    f.write(json.dumps({"v": RECORD_VERSION, **record},
                                       sort_keys=True, separators=(",", ":"),
                                       ensure_ascii=False, allow_nan=False) + "\n")
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, self.path)


# -- signals ---------------------------------------------------------------


@dataclass(frozen=True)
class SignalRecord:
    signal_id: str
    name: str
    query_expr: str
    created_at: int
    last_snapshot_at: int | None = None
    last_snapshot_short: bool = False

    def to_dict(self) -> dict:
        return {
            "signal_id": self.signal_id,
            "name": self.name,
            "query_expr": self.query_expr,
            "created_at": self.created_at,
            "last_snapshot_at": self.last_snapshot_at,
            "last_snapshot_short": self.last_snapshot_short,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignalRecord":
        return cls(**{k: d[k] for k in (
            "signal_id", "name", "query_expr", "created_at",
            "last_snapshot_at", "last_snapshot_short")})


class SignalStore:
    def __init__(self, path: Path):
        self._log = JsonlLog(path)
        self._lock = threading.RLock()
        self._by_id: dict[str, SignalRecord] = {}
        self._by_name: dict[str, str] = {}
        for rec in self._log.replay():
            self._apply(rec)

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "put":
            record = SignalRecord.from_dict(rec["record"])
            prior = self._by_id.get(record.signal_id)
            if prior is not None and prior.name != record.name:
                self._by_name.pop(prior.name, None)  # rename frees old name
            self._by_id[record.signal_id] = record
            self._by_name[record.name] = record.signal_id
        elif rec["op"] == "delete":
            record = self._by_id.pop(rec["signal_id"], None)
            if record is not None:
                self._by_name.pop(record.name, None)

    def register(self, name: str, query_expr: str, now_ms: int) -> SignalRecord:
        parse_selector(query_expr)  # InvalidQuery on malformed
        if not name or not isinstance(name, str):
            raise InvalidInput("signal name must be a non-empty string")
        with self._lock:
            if name in self._by_name:
                raise Conflict("signal name already registered", name=name)
            record = SignalRecord(new_id("sig"), name, query_expr, int(now_ms))
            self._log.append({"op": "put", "record": record.to_dict()})
            self._apply({"op": "put", "record": record.to_dict()})
            return record

    def update(self, record: SignalRecord) -> SignalRecord:
        parse_selector(record.query_expr)
        with self._lock:
            if record.signal_id not in self._by_id:
                raise NotFound("unknown signal", signal_id=record.signal_id)
            owner = self._by_name.get(record.name)
            if owner is not None and owner != record.signal_id:
                raise Conflict("signal name already registered",
                               name=record.name)
            self._log.append({"op": "put", "record": record.to_dict()})
            self._apply({"op": "put", "record": record.to_dict()})
            return record

    def get(self, signal_id: str) -> SignalRecord:
        with self._lock:
            record = self._by_id.get(signal_id)
        if record is None:
            raise NotFound("unknown signal", signal_id=signal_id)
        return record

    def get_by_name(self, name: str) -> SignalRecord:
        with self._lock:
            signal_id = self._by_name.get(name)
        if signal_id is None:
            raise NotFound("unknown signal name", name=name)
        return self.get(signal_id)

    def list(self) -> list[SignalRecord]:
        with self._lock:
            return sorted(self._by_id.values(), key=lambda r: r.created_at)

    def delete(self, signal_id: str) -> None:
        with self._lock:
            if signal_id not in self._by_id:
                raise NotFound("unknown signal", signal_id=signal_id)
            self._log.append({"op": "delete", "signal_id": signal_id})
            self._apply({"op": "delete", "signal_id": signal_id})

    def compact(self) -> None:
        with self._lock:
            self._log.rewrite([{"op": "put", "record": r.to_dict()}
                               for r in self.list()])


# -- model registry --------------------------------------------------------


@dataclass(frozen=True)
class ModelRecord:
    model_id: str
    version: int
    model_type: str
    signal_ids: tuple[str, ...]
    detector_spec: DetectorSpec
    artifact_ref: str
    channel_ref: str | None
    status: str
    created_at: int

    def __post_init__(self):
        if self.status not in MODEL_STATUSES:
            raise InvalidInput("bad model status", status=self.status)
        if not self.signal_ids:
            raise InvalidInput("signal_ids must be non-empty")
        multivariate = len(self.signal_ids) > 1
        if multivariate != (self.detector_spec.flow == FLOW_MV):
            raise InvalidInput(
                "signal count must match detector flow",
                signal_count=len(self.signal_ids), flow=self.detector_spec.flow)
        if self.version < 1:
            raise InvalidInput("version must be >= 1", version=self.version)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "version": self.version,
            "model_type": self.model_type,
            "signal_ids": list(self.signal_ids),
            "detector_spec": self.detector_spec.to_dict(),
            "artifact_ref": self.artifact_ref,
            "channel_ref": self.channel_ref,
            "status": self.status,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelRecord":
        return cls(
            model_id=d["model_id"], version=d["version"],
            model_type=d["model_type"], signal_ids=tuple(d["signal_ids"]),
            detector_spec=DetectorSpec.from_dict(d["detector_spec"]),
            artifact_ref=d["artifact_ref"], channel_ref=d["channel_ref"],
            status=d["status"], created_at=d["created_at"])


@dataclass(frozen=True)
class ModelConfig:
    """Per-type training policy: data minima and fit parameters."""

    model_type: str
    min_training_length: int
    min_prediction_step: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.min_prediction_step > self.min_training_length:
            raise InvalidInput(
                "min_prediction_step must not exceed min_training_length",
                step=self.min_prediction_step, length=self.min_training_length)


class ModelRegistry:
    """Versioned model records; at most one active version per model_id.

    Registering a new active version atomically pauses the previous one,
    so the registry scan never returns a model twice.  Soft delete only;
    every version stays in the log.
    """

    def __init__(self, path: Path):
        self._log = JsonlLog(path)
        self._lock = threading.RLock()
        self._records: dict[tuple[str, int], ModelRecord] = {}
        for rec in self._log.replay():
            self._apply(rec)
        self._check_invariant()

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "put":
            record = ModelRecord.from_dict(rec["record"])
            self._records[(record.model_id, record.version)] = record

    def _append(self, record: ModelRecord) -> None:
        self._log.append({"op": "put", "record": record.to_dict()})
        self._records[(record.model_id, record.version)] = record

    def _check_invariant(self) -> None:
        active: dict[str, int] = {}
        for record in self._records.values():
            if record.status == MODEL_STATUS_ACTIVE:
                active[record.model_id] = active.get(record.model_id, 0) + 1
        bad = {m: n for m, n in active.items() if n > 1}
        if bad:
            raise InvalidState("model has multiple active versions", models=bad)

    def register(self, model_id: str | None, model_type: str,
                 signal_ids: tuple[str, ...], detector_spec: DetectorSpec,
                 artifact_ref: str, channel_ref: str | None,
                 now_ms: int, activate: bool = True) -> ModelRecord:
        with self._lock:
            if model_id is None:
                model_id = new_id("mdl")
                version = 1
            else:
                versions = [v for m, v in self._records if m == model_id]
                version = max(versions, default=0) + 1
            if activate:
                current = self._active_of(model_id)
                if current is not None:
                    self._append(replace(current, status=MODEL_STATUS_PAUSED))
            record = ModelRecord(
                model_id=model_id, version=version, model_type=model_type,
                signal_ids=tuple(signal_ids), detector_spec=detector_spec,
                artifact_ref=artifact_ref, channel_ref=channel_ref,
                status=MODEL_STATUS_ACTIVE if activate else MODEL_STATUS_PAUSED,
                created_at=int(now_ms))
            self._append(record)
            self._check_invariant()
            return record

    def _active_of(self, model_id: str) -> ModelRecord | None:
        for record in self._records.values():
            if record.model_id == model_id and record.status == MODEL_STATUS_ACTIVE:
                return record
        return None

    def get(self, model_id: str, version: int | None = None) -> ModelRecord:
        with self._lock:
            if version is not None:
                record = self._records.get((model_id, version))
                if record is None:
                    raise NotFound("unknown model version",
                                   model_id=model_id, version=version)
                return record
            record = self._active_of(model_id)
            if record is None:
                versions = [v for m, v in self._records if m == model_id]
                if not versions:
                    raise NotFound("unknown model", model_id=model_id)
                return self._records[(model_id, max(versions))]
            return record

    def get_active_models(self) -> list[ModelRecord]:
        with self._lock:
            out = [r for r in self._records.values()
                   if r.status == MODEL_STATUS_ACTIVE]
        return sorted(out, key=lambda r: (r.model_id, r.version))

    def list_versions(self, model_id: str) -> list[ModelRecord]:
        with self._lock:
            out = [r for (m, _), r in self._records.items() if m == model_id]
        if not out:
            raise NotFound("unknown model", model_id=model_id)
        return sorted(out, key=lambda r: r.version)

    def list_models(self) -> list[ModelRecord]:
        """Latest non-deleted version of every model."""
        with self._lock:
            by_model: dict[str, ModelRecord] = {}
            for record in self._records.values():
                if record.status == MODEL_STATUS_DELETED:
                    continue
                cur = by_model.get(record.model_id)
                if cur is None or record.version > cur.version:
                    by_model[record.model_id] = record
        return sorted(by_model.values(), key=lambda r: r.model_id)

    def set_status(self, model_id: str, version: int, status: str) -> ModelRecord:
        if status not in MODEL_STATUSES:
            raise InvalidInput("bad model status", status=status)
        with self._lock:
            record = self.get(model_id, version)
            if record.status == MODEL_STATUS_DELETED:
                raise InvalidState("model version is deleted",
                                   model_id=model_id, version=version)
            if status == MODEL_STATUS_ACTIVE:
                current = self._active_of(model_id)
                if current is not None and current.version != version:
                    self._append(replace(current, status=MODEL_STATUS_PAUSED))
            updated = replace(record, status=status)
            self._append(updated)
            self._check_invariant()
            return updated

    def delete_model(self, model_id: str) -> None:
        with self._lock:
            for record in self.list_versions(model_id):
                if record.status != MODEL_STATUS_DELETED:
                    self._append(replace(record, status=MODEL_STATUS_DELETED))
            self._check_invariant()

    def compact(self) -> None:
        with self._lock:
            records = sorted(self._records.values(),
                             key=lambda r: (r.model_id, r.version))
            self._log.rewrite([{"op": "put", "record": r.to_dict()}
                               for r in records])


# -- artifacts -------------------------------------------------------------


class ArtifactStore:
    """Content-addressed blobs: ref = sha256 hex of the bytes."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def save(self, blob: bytes) -> str:
        if not isinstance(blob, (bytes, bytearray)):
            raise InvalidInput("artifact must be bytes")
        ref = hashlib.sha256(blob).hexdigest()
        path = self.root / ref
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(blob)
            os.replace(tmp, path)
        return ref

    def load(self, ref: str) -> bytes:
        path = self.root / ref
        if not path.exists() or not ref or "/" in ref:
            raise NotFound("unknown artifact", artifact_ref=ref)
        return path.read_bytes()

    def exists(self, ref: str) -> bool:
        return bool(ref) and "/" not in ref and (self.root / ref).exists()

    def delete(self, ref: str) -> None:
        path = self.root / ref
        if path.exists():
            path.unlink()


# -- datasets ---------------------------------------------------------------


@dataclass(frozen=True)
class DatasetMeta:
    signal_id: str
    step_ms: int
    start_ts: int
    end_ts: int
    rows: int
    short: bool


class DatasetStore:
    """Signal snapshot files.

    Format: one header line, a JSON object {signal_id, step_ms, start_ts},
    then ascending `ts_ms,value` rows, one per line.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, signal_id: str) -> Path:
        return self.root / f"{signal_id}.ds"

    def write(self, window: SeriesWindow) -> DatasetMeta:
        header = json.dumps(
            {"signal_id": window.signal_id, "step_ms": window.step_ms,
             "start_ts": int(window.timestamps[0])},
            sort_keys=True, separators=(",", ":"))
        lines = [header]
        lines.extend(f"{int(ts)},{float(v)!r}"
                     for ts, v in zip(window.timestamps, window.values))
        path = self._path(window.signal_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        os.replace(tmp, path)
        span = int(window.timestamps[-1] - window.timestamps[0])
        return DatasetMeta(
            signal_id=window.signal_id, step_ms=window.step_ms,
            start_ts=int(window.timestamps[0]), end_ts=int(window.timestamps[-1]),
            rows=len(window), short=span < SNAPSHOT_HORIZON_MS - window.step_ms)

    def read(self, signal_id: str) -> SeriesWindow:
        path = self._path(signal_id)
        if not path.exists():
            raise NotFound("no dataset for signal", signal_id=signal_id)
        with open(path, "r", encoding="utf-8") as f:
            header = json.loads(f.readline())
            ts, vals = [], []
            for line in f:
                line = line.strip()
                if not line:
                    continue
                raw_ts, _, raw_v = line.partition(",")
                ts.append(int(raw_ts))
                vals.append(float(raw_v))
        if not ts:
            raise InvalidState("dataset has no rows", signal_id=signal_id)
        return SeriesWindow(header["signal_id"],
                            np.asarray(ts, dtype=np.int64),
                            np.asarray(vals, dtype=np.float64),
                            step_ms=int(header["step_ms"]))

    def exists(self, signal_id: str) -> bool:
        return self._path(signal_id).exists()


# -- alerts ------------------------------------------------------------------


@dataclass(frozen=True)
class AlertRecord:
    alert_id: str
    model_id: str
    version: int
    fired_at: int
    verdict: dict
    severity: str = "low"
    state: str = ALERT_OPEN
    snoozed_until: int | None = None
    feedback: dict | None = None  # {outcome, by, at}, set at most once

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id, "model_id": self.model_id,
            "version": self.version, "fired_at": self.fired_at,
            "verdict": self.verdict, "severity": self.severity,
            "state": self.state, "snoozed_until": self.snoozed_until,
            "feedback": self.feedback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlertRecord":
        return cls(**{k: d[k] for k in (
            "alert_id", "model_id", "version", "fired_at", "verdict",
            "severity", "state", "snoozed_until", "feedback")})


class AlertStore:
    def __init__(self, path: Path):
        self._log = JsonlLog(path)
        self._lock = threading.RLock()
        self._by_id: dict[str, AlertRecord] = {}
        for rec in self._log.replay():
            self._apply(rec)

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "put":
            record = AlertRecord.from_dict(rec["record"])
            self._by_id[record.alert_id] = record

    def _put(self, record: AlertRecord) -> AlertRecord:
        self._log.append({"op": "put", "record": record.to_dict()})
        self._by_id[record.alert_id] = record
        return record

    def record_alert(self, model_id: str, version: int, fired_at: int,
                     verdict: dict, severity: str = "low") -> AlertRecord:
        with self._lock:
            return self._put(AlertRecord(
                alert_id=new_id("alr"), model_id=model_id, version=version,
                fired_at=int(fired_at), verdict=verdict, severity=severity))

    def get(self, alert_id: str) -> AlertRecord:
        with self._lock:
            record = self._by_id.get(alert_id)
        if record is None:
            raise NotFound("unknown alert", alert_id=alert_id)
        return record

    def record_feedback(self, alert_id: str, outcome: str, by: str,
                        at_ms: int) -> AlertRecord:
        if outcome not in FEEDBACK_OUTCOMES:
            raise InvalidInput("bad feedback outcome", outcome=outcome)
        with self._lock:
            record = self.get(alert_id)
            if record.feedback is not None:
                raise Conflict("feedback already recorded", alert_id=alert_id)
            return self._put(replace(record, feedback={
                "outcome": outcome, "by": by, "at": int(at_ms)}))

    def snooze(self, alert_id: str, until_ms: int) -> AlertRecord:
        with self._lock:
            record = self.get(alert_id)
            if record.state != ALERT_OPEN:
                raise InvalidState("only open alerts can be snoozed",
                                   alert_id=alert_id, state=record.state)
            return self._put(replace(record, state=ALERT_SNOOZED,
                                     snoozed_until=int(until_ms)))

    def delete(self, alert_id: str) -> AlertRecord:
        with self._lock:
            record = self.get(alert_id)
            return self._put(replace(record, state=ALERT_DELETED))

    def list(self, model_id: str | None = None, state: str | None = None,
             since_ms: int | None = None) -> list[AlertRecord]:
        with self._lock:
            out = list(self._by_id.values())
        if model_id is not None:
            out = [a for a in out if a.model_id == model_id]
        if state is not None:
            out = [a for a in out if a.state == state]
        if since_ms is not None:
            out = [a for a in out if a.fired_at >= since_ms]
        return sorted(out, key=lambda a: (a.fired_at, a.alert_id))

    def daily_counts(self, model_id: str, now_ms: int, days: int = 7,
                     created_at: int | None = None) -> list[int]:
        """Alerts per UTC day for the trailing `days` full days, oldest first.

        Days that predate the model (its creation time, or its first alert
        when no creation time is given) are dropped, so a young model
        reports a short history rather than fabricated quiet days.
        """
        alerts = self.list(model_id=model_id)
        if created_at is None:
            if not alerts:
                return []
            created_at = alerts[0].fired_at
        today = (now_ms // DAY_MS) * DAY_MS
        counts = []
        for offset in range(days, 0, -1):
            day_start = today - offset * DAY_MS
            if day_start + DAY_MS <= created_at:
                continue
            counts.append(sum(1 for a in alerts
                              if day_start <= a.fired_at < day_start + DAY_MS))
        return counts

    def feedback_outcomes(self, model_id: str, version: int | None = None,
                          since_ms: int | None = None) -> list[str]:
        alerts = self.list(model_id=model_id, since_ms=since_ms)
        return [a.feedback["outcome"] for a in alerts
                if a.feedback is not None
                and (version is None or a.version == version)]

    def compact(self) -> None:
        with self._lock:
            self._log.rewrite([{"op": "put", "record": a.to_dict()}
                               for a in self.list()])


# -- single-use action tokens -------------------------------------------------


class TokenStore:
    """Tokens bound to one action on one record; consuming twice conflicts."""

    def __init__(self, path: Path):
        self._log = JsonlLog(path)
        self._lock = threading.RLock()
        self._tokens: dict[str, dict] = {}
        for rec in self._log.replay():
            self._apply(rec)

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "issue":
            self._tokens[rec["token"]] = {
                "target_kind": rec["target_kind"], "target_id": rec["target_id"],
                "action": rec["action"], "used": False}
        elif rec["op"] == "consume":
            if rec["token"] in self._tokens:
                self._tokens[rec["token"]]["used"] = True

    def issue(self, target_kind: str, target_id: str, action: str) -> str:
        token = uuid.uuid4().hex
        with self._lock:
            rec = {"op": "issue", "token": token, "target_kind": target_kind,
                   "target_id": target_id, "action": action}
            self._log.append(rec)
            self._apply(rec)
        return token

    def consume(self, token: str) -> dict:
        with self._lock:
            entry = self._tokens.get(token)
            if entry is None:
                raise NotFound("unknown action token")
            if entry["used"]:
                raise Conflict("action token already used")
            rec = {"op": "consume", "token": token}
            self._log.append(rec)
            self._apply(rec)
            return {k: entry[k] for k in ("target_kind", "target_id", "action")}


# -- drift reports and proposals ----------------------------------------------


class DriftReportStore:
    """One report per (model_id, UTC day); same-day rerun overwrites."""

    def __init__(self, path: Path):
        self._log = JsonlLog(path)
        self._lock = threading.RLock()
        self._reports: dict[tuple[str, int], DriftReport] = {}
        for rec in self._log.replay():
            self._apply(rec)

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "put":
            report = DriftReport.from_dict(rec["report"])
            day = report.evaluated_at // DAY_MS
            self._reports[(report.model_id, day)] = report

    def put(self, report: DriftReport) -> None:
        with self._lock:
            rec = {"op": "put", "report": report.to_dict()}
            self._log.append(rec)
            self._apply(rec)

    def list(self, model_id: str | None = None) -> list[DriftReport]:
        with self._lock:
            out = list(self._reports.values())
        if model_id is not None:
            out = [r for r in out if r.model_id == model_id]
        return sorted(out, key=lambda r: (r.model_id, r.evaluated_at))

    def latest(self, model_id: str) -> DriftReport | None:
        reports = self.list(model_id=model_id)
        return reports[-1] if reports else None

    def compact(self) -> None:
        with self._lock:
            self._log.rewrite([{"op": "put", "report": r.to_dict()}
                               for r in self.list()])


class ProposalStore:
    def __init__(self, path: Path):
        self._log = JsonlLog(path)
        self._lock = threading.RLock()
        self._by_id: dict[str, RetrainProposal] = {}
        for rec in self._log.replay():
            self._apply(rec)

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "put":
            proposal = RetrainProposal.from_dict(rec["proposal"])
            self._by_id[proposal.proposal_id] = proposal

    def put(self, proposal: RetrainProposal) -> RetrainProposal:
        with self._lock:
            current = self._by_id.get(proposal.proposal_id)
            if current is not None and current.status != PROPOSAL_PENDING \
                    and current.status != proposal.status:
                raise InvalidState("proposal already resolved",
                                   proposal_id=proposal.proposal_id,
                                   status=current.status)
            rec = {"op": "put", "proposal": proposal.to_dict()}
            self._log.append(rec)
            self._apply(rec)
            return proposal

    def get(self, proposal_id: str) -> RetrainProposal:
        with self._lock:
            proposal = self._by_id.get(proposal_id)
        if proposal is None:
            raise NotFound("unknown proposal", proposal_id=proposal_id)
        return proposal

    def list(self, status: str | None = None,
             model_id: str | None = None) -> list[RetrainProposal]:
        with self._lock:
            out = list(self._by_id.values())
        if status is not None:
            out = [p for p in out if p.status == status]
        if model_id is not None:
            out = [p for p in out if p.model_id == model_id]
        return sorted(out, key=lambda p: (p.created_at, p.proposal_id))


# -- facade -------------------------------------------------------------------


class Stores:
    """All durable stores in one data directory."""

    def __init__(self, data_dir: str | Path):
        root = Path(data_dir)
        root.mkdir(parents=True, exist_ok=True)
        self.root = root
        self.signals = SignalStore(root / "signals.jsonl")
        self.models = ModelRegistry(root / "models.jsonl")
        self.artifacts = ArtifactStore(root / "artifacts")
        self.datasets = DatasetStore(root / "datasets")
        self.alerts = AlertStore(root / "alerts.jsonl")
        self.tokens = TokenStore(root / "tokens.jsonl")
        self.drift_reports = DriftReportStore(root / "drift_reports.jsonl")
        self.proposals = ProposalStore(root / "proposals.jsonl")

    def register_model(self, model_id: str | None, model_type: str,
                       signal_ids, detector_spec: DetectorSpec,
                       artifact_ref: str, channel_ref: str | None,
                       now_ms: int) -> ModelRecord:
        """Registry write with referential checks: signals and artifact must exist."""
        for signal_id in signal_ids:
            self.signals.get(signal_id)
        if not self.artifacts.exists(artifact_ref):
            raise NotFound("unknown artifact", artifact_ref=artifact_ref)
        return self.models.register(model_id, model_type, tuple(signal_ids),
                                    detector_spec, artifact_ref, channel_ref,
                                    now_ms)

    def snapshot_signal(self, signal_id: str, metric_store, now_ms: int,
                        step_ms: int = DEFAULT_STEP_MS) -> DatasetMeta:
        """Persist the rolling 21-day dataset for one signal.

        The window end is the last UTC midnight at or before `now`, so
        repeated runs within a day produce byte-identical files.  With no
        matching samples at all the previous snapshot is retained and
        SourceUnavailable raised.
        """
        record = self.signals.get(signal_id)
        end = (int(now_ms) // DAY_MS) * DAY_MS
        start = end - SNAPSHOT_HORIZON_MS
        results = metric_store.query_range(record.query_expr, start, end, step_ms)
        if not results or not results[0].timestamps:
            raise SourceUnavailable("no samples for signal",
                                    signal_id=signal_id,
                                    query_expr=record.query_expr)
        if len(results) > 1:
            raise InvalidState("signal selector matches multiple series",
                               signal_id=signal_id, matched=len(results))
        r = results[0]
        window = SeriesWindow(signal_id,
                              np.asarray(r.timestamps, dtype=np.int64),
                              np.asarray(r.values, dtype=np.float64),
                              step_ms=step_ms)
        meta = self.datasets.write(window)
        self.signals.update(replace(record, last_snapshot_at=int(now_ms),
                                    last_snapshot_short=meta.short))
        return meta

    def compact_all(self) -> None:
        self.signals.compact()
        self.models.compact()
        self.alerts.compact()
        self.drift_reports.compact()
